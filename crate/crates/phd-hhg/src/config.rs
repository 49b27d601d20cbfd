//! Run configuration: TOML text layered over a named preset.
//!
//! A config file may name a `preset`; every key it sets overrides the
//! preset value and every key it omits keeps it. Without a preset the desk
//! defaults of the requested emitter kind are used. Unknown keys are
//! rejected.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::{Table, Value};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("config: {0}")]
    Invalid(String),
    #[error("unknown preset '{0}' (expected desk-atom, desk-hubbard, paper-atom or paper-hubbard)")]
    UnknownPreset(String),
    #[error("missing emitter kind: set `preset` or `[emitter] kind`")]
    MissingEmitterKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Name of the preset this config was layered on, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub emitter: EmitterConfig,
    pub pulse: PulseSection,
    pub grid: GridSection,
    pub ensemble: EnsembleSection,
    pub observables: ObservableSection,
    pub frequencies: FrequencySection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmitterConfig {
    Atom(AtomSection),
    Hubbard(HubbardSection),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSection {
    pub x_max: f64,
    pub n_points: usize,
    pub epsilon: f64,
    pub states: usize,
    pub mask_width: f64,
    pub mask_exponent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HubbardBasis {
    /// Lattice-momentum block of the ground state (periodic chains only).
    Momentum,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HubbardSection {
    pub sites: usize,
    pub t0: f64,
    pub lattice_spacing: f64,
    pub u: f64,
    pub v: f64,
    pub periodic: bool,
    pub n_up: usize,
    pub n_dn: usize,
    pub states: usize,
    pub krylov_dim: usize,
    pub basis: HubbardBasis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    pub f0: f64,
    pub omega_l: f64,
    pub n_cycles: u32,
    pub cep: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dt: f64,
    /// Recording stride; derived from the highest frequency when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub n: Vec<f64>,
    /// Coupling; derived from V = (10λ_L)³ when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSection {
    pub spectrum: bool,
    pub squeezing: bool,
    pub g2: bool,
    pub mandel_q: bool,
    /// States kept for g²; all states when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g2_states: Option<usize>,
    pub convergence: bool,
}

/// Harmonic orders h_min, h_min + step, … ≤ h_max (fundamental skipped).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencySection {
    pub h_min: f64,
    pub h_max: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    pub write_table: bool,
}

pub const PRESETS: [&str; 4] = ["desk-atom", "desk-hubbard", "paper-atom", "paper-hubbard"];

fn default_observables(g2_states: Option<usize>) -> ObservableSection {
    ObservableSection { spectrum: true, squeezing: true, g2: true, mandel_q: true, g2_states, convergence: true }
}

/// Fully specified configuration for a named preset. `desk` is an alias of
/// `desk-atom`.
pub fn preset(name: &str) -> Result<RunConfig, ConfigError> {
    let atom_pulse = |n_cycles| PulseSection { f0: 0.053, omega_l: 0.057, n_cycles, cep: std::f64::consts::FRAC_PI_2 };
    let hubbard_pulse = PulseSection { f0: 0.0025, omega_l: 0.00955, n_cycles: 10, cep: std::f64::consts::FRAC_PI_2 };
    let t0 = 0.0191;
    let hubbard = |sites: usize, states| HubbardSection {
        sites,
        t0,
        lattice_spacing: 7.5589,
        u: 12.0 * t0,
        v: 4.0 * t0,
        periodic: true,
        n_up: sites / 2,
        n_dn: sites / 2,
        states,
        krylov_dim: 6,
        basis: HubbardBasis::Momentum,
    };
    let cfg = match name {
        "desk-atom" | "desk" => RunConfig {
            preset: Some("desk-atom".into()),
            emitter: EmitterConfig::Atom(AtomSection { x_max: 400.0, n_points: 8192, epsilon: 0.816, states: 64, mask_width: 0.1, mask_exponent: 0.125 }),
            pulse: atom_pulse(8),
            grid: GridSection { dt: 0.05, stride: None },
            ensemble: EnsembleSection { n: vec![1e5, 1e6, 1e7], g0: None },
            observables: default_observables(None),
            frequencies: FrequencySection { h_min: 2.0, h_max: 40.0, step: 0.25 },
            output: OutputSection { dir: "phd-out".into(), write_table: false },
        },
        "paper-atom" => RunConfig {
            preset: Some("paper-atom".into()),
            emitter: EmitterConfig::Atom(AtomSection { x_max: 3000.0, n_points: 150_000, epsilon: 0.816, states: 250, mask_width: 0.1, mask_exponent: 0.125 }),
            pulse: atom_pulse(20),
            grid: GridSection { dt: 0.02, stride: None },
            ensemble: EnsembleSection { n: vec![1e3, 1e4, 1e5], g0: Some(4e-8) },
            observables: default_observables(Some(64)),
            frequencies: FrequencySection { h_min: 2.0, h_max: 40.0, step: 0.1 },
            output: OutputSection { dir: "phd-out".into(), write_table: false },
        },
        "desk-hubbard" => RunConfig {
            preset: Some("desk-hubbard".into()),
            emitter: EmitterConfig::Hubbard(hubbard(6, 32)),
            pulse: hubbard_pulse.clone(),
            grid: GridSection { dt: 0.26, stride: None },
            ensemble: EnsembleSection { n: vec![1e5, 1e6, 1e7], g0: None },
            observables: default_observables(None),
            frequencies: FrequencySection { h_min: 2.0, h_max: 30.0, step: 0.25 },
            output: OutputSection { dir: "phd-out".into(), write_table: false },
        },
        "paper-hubbard" => RunConfig {
            preset: Some("paper-hubbard".into()),
            emitter: EmitterConfig::Hubbard(hubbard(8, 64)),
            pulse: hubbard_pulse,
            grid: GridSection { dt: 0.26, stride: None },
            ensemble: EnsembleSection { n: vec![1e3, 1e4, 1e5], g0: Some(3e-9) },
            observables: default_observables(None),
            frequencies: FrequencySection { h_min: 2.0, h_max: 30.0, step: 0.25 },
            output: OutputSection { dir: "phd-out".into(), write_table: false },
        },
        other => return Err(ConfigError::UnknownPreset(other.to_string())),
    };
    Ok(cfg)
}

fn merge(base: &mut Table, over: Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

fn to_table(cfg: &RunConfig) -> Table {
    Table::try_from(cfg).expect("RunConfig always serializes to a table")
}

fn emitter_kind(t: &Table) -> Option<&str> {
    t.get("emitter")?.as_table()?.get("kind")?.as_str()
}

/// Parse config text, layering it over its preset and validating it.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut user: Table = text.parse()?;
    let preset_name = match user.remove("preset") {
        Some(Value::String(s)) => Some(s),
        Some(_) => return Err(ConfigError::Invalid("`preset` must be a string".into())),
        None => None,
    };
    let user_kind = emitter_kind(&user).map(str::to_owned);
    let base_cfg = match (&preset_name, user_kind.as_deref()) {
        (Some(p), _) => preset(p)?,
        (None, Some("atom")) => preset("desk-atom")?,
        (None, Some("hubbard")) => preset("desk-hubbard")?,
        (None, Some(k)) => return Err(ConfigError::Invalid(format!("unknown emitter kind '{k}'"))),
        (None, None) => return Err(ConfigError::MissingEmitterKind),
    };
    let mut base = to_table(&base_cfg);
    if let Some(kind) = user_kind.as_deref() {
        if emitter_kind(&base) != Some(kind) {
            // Switching kind: start from that kind's desk emitter block.
            let alt = match kind {
                "atom" => preset("desk-atom")?,
                "hubbard" => preset("desk-hubbard")?,
                k => return Err(ConfigError::Invalid(format!("unknown emitter kind '{k}'"))),
            };
            base.insert("emitter".into(), to_table(&alt).remove("emitter").expect("emitter present"));
        }
    }
    merge(&mut base, user);
    let mut cfg: RunConfig = base.try_into()?;
    if let Some(p) = preset_name {
        cfg.preset = Some(if p == "desk" { "desk-atom".into() } else { p });
    } else {
        cfg.preset = None;
    }
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.ensemble.n.is_empty() {
            return bad("ensemble.n must list at least one emitter count".into());
        }
        for &n in &self.ensemble.n {
            if !(n >= 1.0 && n.is_finite() && n.fract() == 0.0) {
                return bad(format!("ensemble.n entries must be integers >= 1, got {n}"));
            }
        }
        if let Some(g0) = self.ensemble.g0 {
            if !(g0 > 0.0 && g0.is_finite()) {
                return bad(format!("ensemble.g0 must be positive, got {g0}"));
            }
        }
        if !(self.grid.dt > 0.0 && self.grid.dt.is_finite()) {
            return bad(format!("grid.dt must be positive, got {}", self.grid.dt));
        }
        if self.grid.stride == Some(0) {
            return bad("grid.stride must be at least 1".into());
        }
        let f = &self.frequencies;
        if !(f.h_min > 0.0 && f.step > 0.0 && f.h_max >= f.h_min) {
            return bad(format!("frequencies need 0 < h_min <= h_max and step > 0, got {f:?}"));
        }
        let states = match &self.emitter {
            EmitterConfig::Atom(a) => {
                if a.n_points < 3 || !(a.x_max > 0.0) {
                    return bad("atom grid needs x_max > 0 and at least 3 points".into());
                }
                if !(0.0..0.5).contains(&a.mask_width) {
                    return bad(format!("mask_width must be in [0, 0.5), got {}", a.mask_width));
                }
                a.states
            }
            EmitterConfig::Hubbard(h) => {
                if h.krylov_dim < 2 {
                    return bad("krylov_dim must be at least 2".into());
                }
                if h.basis == HubbardBasis::Momentum && !h.periodic {
                    return bad("momentum basis needs a periodic chain".into());
                }
                h.states
            }
        };
        if states == 0 {
            return bad("emitter.states must be at least 1".into());
        }
        if self.observables.g2_states == Some(0) {
            return bad("observables.g2_states must be at least 1".into());
        }
        Ok(())
    }

    /// The effective configuration as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("RunConfig always serializes")
    }

    pub fn states(&self) -> usize {
        match &self.emitter {
            EmitterConfig::Atom(a) => a.states,
            EmitterConfig::Hubbard(h) => h.states,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_preset_fills_everything() {
        let cfg = parse_config("preset = \"desk-atom\"").unwrap();
        assert_eq!(cfg, preset("desk-atom").unwrap());
        assert_eq!(parse_config("preset = \"desk\"").unwrap(), cfg);
    }

    #[test]
    fn l8_hubbard_preset_interaction() {
        let cfg = parse_config("preset = \"paper-hubbard\"").unwrap();
        let EmitterConfig::Hubbard(h) = cfg.emitter else { panic!("wrong kind") };
        assert!((h.u - 0.2292).abs() < 1e-12);
        assert!((h.v - 0.0764).abs() < 1e-12);
        assert_eq!(cfg.ensemble.g0, Some(3e-9));
    }

    #[test]
    fn overrides_and_echo_round_trip() {
        let cfg = parse_config("preset = \"desk-atom\"\n[ensemble]\nn = [10.0]\n[emitter]\nstates = 8\n").unwrap();
        assert_eq!(cfg.ensemble.n, vec![10.0]);
        assert_eq!(cfg.states(), 8);
        assert_eq!(parse_config(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn kind_without_preset_uses_desk_defaults() {
        let cfg = parse_config("[emitter]\nkind = \"hubbard\"\nsites = 4\nn_up = 2\nn_dn = 2\n").unwrap();
        let EmitterConfig::Hubbard(h) = cfg.emitter else { panic!("wrong kind") };
        assert_eq!(h.sites, 4);
        assert_eq!(cfg.grid.dt, 0.26);
    }

    #[test]
    fn switching_kind_replaces_emitter_block() {
        let cfg = parse_config("preset = \"desk-atom\"\n[emitter]\nkind = \"hubbard\"\n").unwrap();
        assert!(matches!(cfg.emitter, EmitterConfig::Hubbard(_)));
    }

    #[test]
    fn rejections() {
        assert!(matches!(parse_config("[ensemble]\nn = [1.0]"), Err(ConfigError::MissingEmitterKind)));
        assert!(matches!(parse_config("preset = \"desk\"\n[ensemble]\nn = [0.0]"), Err(ConfigError::Invalid(_))));
        assert!(matches!(parse_config("preset = \"desk\"\n[ensemble]\nn = [2.5]"), Err(ConfigError::Invalid(_))));
        assert!(matches!(parse_config("preset = \"desk\"\n[pulse]\nbogus = 1"), Err(ConfigError::Syntax(_))));
        assert!(matches!(parse_config("preset = \"desk\"\n[grid]\ndt = \"fast\""), Err(ConfigError::Syntax(_))));
        assert!(matches!(parse_config("preset = \"nope\""), Err(ConfigError::UnknownPreset(_))));
        assert!(matches!(parse_config("preset = \"desk\"\nextra = 3"), Err(ConfigError::Syntax(_))));
    }
}
