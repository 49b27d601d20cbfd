//! Shared physical primitives: the laser pulse, time grids, ensemble
//! parameters and the contract implemented by every emitter.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::SPEED_OF_LIGHT;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid pulse: {0}")]
    InvalidPulse(String),
    #[error("degenerate time grid: {0}")]
    DegenerateGrid(String),
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),
    #[error("invalid state selection: {0}")]
    InvalidSelection(String),
}

/// Classical driving pulse with a sin² envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseConfig {
    pub f0: f64,
    pub omega_l: f64,
    pub n_cycles: u32,
    pub cep: f64,
}

impl PulseConfig {
    /// Pulse with the default carrier-envelope phase π/2.
    pub fn new(f0: f64, omega_l: f64, n_cycles: u32) -> Result<Self, ModelError> {
        Self::with_cep(f0, omega_l, n_cycles, PI / 2.0)
    }

    pub fn with_cep(f0: f64, omega_l: f64, n_cycles: u32, cep: f64) -> Result<Self, ModelError> {
        if !(f0 > 0.0 && f0.is_finite()) {
            return Err(ModelError::InvalidPulse(format!("F0 must be positive, got {f0}")));
        }
        if !(omega_l > 0.0 && omega_l.is_finite()) {
            return Err(ModelError::InvalidPulse(format!("omegaL must be positive, got {omega_l}")));
        }
        if n_cycles == 0 {
            return Err(ModelError::InvalidPulse("Nc must be at least 1".into()));
        }
        if !cep.is_finite() {
            return Err(ModelError::InvalidPulse("cep must be finite".into()));
        }
        Ok(Self { f0, omega_l, n_cycles, cep })
    }

    /// Total pulse duration T = 2π·Nc/ωL.
    pub fn duration(&self) -> f64 {
        2.0 * PI * f64::from(self.n_cycles) / self.omega_l
    }

    /// Wavelength of the carrier, 2πc/ωL.
    pub fn wavelength(&self) -> f64 {
        2.0 * PI * SPEED_OF_LIGHT / self.omega_l
    }
}

/// A_cl(t) = (F0/ωL)·sin²(ωL t/(2Nc))·sin(ωL t + cep) on [0, T], zero outside.
pub fn vector_potential(pulse: &PulseConfig, t: f64) -> f64 {
    if !(0.0..=pulse.duration()).contains(&t) {
        return 0.0;
    }
    let env = (pulse.omega_l * t / (2.0 * f64::from(pulse.n_cycles))).sin();
    pulse.f0 / pulse.omega_l * env * env * (pulse.omega_l * t + pulse.cep).sin()
}

/// Default quantization volume V = (10·λ_L)³ and coupling g0 = √(2π/V).
pub fn default_coupling(pulse: &PulseConfig) -> (f64, f64) {
    let v = (10.0 * pulse.wavelength()).powi(3);
    ((2.0 * PI / v).sqrt(), v)
}

/// Fine propagation grid plus the decimated grid on which observables are
/// recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    /// ceil(T/dt): steps needed to reach the end of the pulse.
    pub n_steps: usize,
    pub stride: usize,
    pub obs_times: Vec<f64>,
}

impl TimeGrid {
    /// Number of fine steps actually propagated (up to the last
    /// observation time, which is ≥ T).
    pub fn propagated_steps(&self) -> usize {
        (self.obs_times.len() - 1) * self.stride
    }

    pub fn obs_spacing(&self) -> f64 {
        self.stride as f64 * self.dt
    }

    pub fn final_time(&self) -> f64 {
        *self.obs_times.last().expect("grid has at least two samples")
    }
}

pub fn make_time_grid(pulse: &PulseConfig, dt: f64, stride: usize) -> Result<TimeGrid, ModelError> {
    let t_end = pulse.duration();
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(ModelError::DegenerateGrid(format!("dt must be positive, got {dt}")));
    }
    if stride == 0 {
        return Err(ModelError::DegenerateGrid("stride must be at least 1".into()));
    }
    if dt >= t_end {
        return Err(ModelError::DegenerateGrid(format!("dt = {dt} is not below the pulse duration {t_end}")));
    }
    // Guard against ceil() of a ratio that is integral up to rounding.
    let ratio = t_end / dt;
    let n_steps = if (ratio - ratio.round()).abs() < 1e-9 * ratio { ratio.round() } else { ratio.ceil() } as usize;
    let n_obs = n_steps.div_ceil(stride) + 1;
    let obs_times = (0..n_obs).map(|k| (k * stride) as f64 * dt).collect();
    Ok(TimeGrid { dt, n_steps, stride, obs_times })
}

/// Largest stride keeping at least eight samples per period of `omega_max`.
pub fn default_stride(dt: f64, omega_max: f64) -> usize {
    let spacing = 2.0 * PI / (8.0 * omega_max);
    ((spacing / dt).floor() as usize).max(1)
}

/// Complex samples aligned with a list of times.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSeries {
    pub times: Vec<f64>,
    pub values: Vec<Complex64>,
}

/// Emitter count and light-matter coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleParams {
    /// Emitter count. Stored as f64 because the observables only need the
    /// falling factorials N!/(N−c)! for c ≤ 4, and N reaches 10⁹.
    pub n: f64,
    pub g0: f64,
    pub volume: f64,
}

impl EnsembleParams {
    pub fn new(n: f64, g0: f64) -> Result<Self, ModelError> {
        if !(n >= 1.0 && n.is_finite() && n.fract() == 0.0) {
            return Err(ModelError::InvalidEnsemble(format!("N must be an integer >= 1, got {n}")));
        }
        if !(g0 > 0.0 && g0.is_finite()) {
            return Err(ModelError::InvalidEnsemble(format!("g0 must be positive, got {g0}")));
        }
        Ok(Self { n, g0, volume: 2.0 * PI / (g0 * g0) })
    }

    /// Ensemble with the default coupling of `pulse`.
    pub fn for_pulse(n: f64, pulse: &PulseConfig) -> Result<Self, ModelError> {
        let (g0, volume) = default_coupling(pulse);
        Ok(Self { volume, ..Self::new(n, g0)? })
    }

    /// Perturbative-regime indicator N·g0·max|p̃|; values ≥ 0.1 should be
    /// reported as outside the regime of validity.
    pub fn perturbative_measure(&self, max_dipole_ft: f64) -> f64 {
        self.n * self.g0 * max_dipole_ft
    }
}

/// A driven emitter with a basis of field-free eigenstates.
///
/// Implementors provide propagation of a selection of eigenstates under the
/// classical field and the matrix elements of the emission operator between
/// the propagated states.
pub trait EmitterModel: Sync {
    /// Field-free energies of all available eigenstates, ascending.
    fn energies(&self) -> &[f64];

    /// Prepare propagation of the eigenstates listed in `selection`.
    fn start(
        &self,
        pulse: &PulseConfig,
        dt: f64,
        selection: &[usize],
    ) -> Result<Box<dyn Propagation + '_>, ModelError>;
}

/// Running propagation of a set of eigenstates.
pub trait Propagation {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Advance all states from `t` to `t + dt`.
    fn step(&mut self, t: f64);

    /// out[n] = ⟨φ_row(t)|Ô(t)|φ_n(t)⟩ for all n.
    fn emission_row(&mut self, t: f64, row: usize, out: &mut [Complex64]);

    /// out[m·M + n] = ⟨φ_m(t)|Ô(t)|φ_n(t)⟩.
    fn emission_matrix(&mut self, t: f64, out: &mut [Complex64]);

    /// Squared norms of the propagated states.
    fn norms(&self) -> Vec<f64>;
}

pub(crate) fn check_selection(selection: &[usize], available: usize) -> Result<(), ModelError> {
    if selection.is_empty() {
        return Err(ModelError::InvalidSelection("no states selected".into()));
    }
    if let Some(&bad) = selection.iter().find(|&&s| s >= available) {
        return Err(ModelError::InvalidSelection(format!("state {bad} out of range (have {available})")));
    }
    let mut sorted = selection.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != selection.len() {
        return Err(ModelError::InvalidSelection("duplicate state indices".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn twenty_cycle_pulse() -> PulseConfig {
        PulseConfig::new(0.053, 0.057, 20).unwrap()
    }

    #[test]
    fn vector_potential_endpoints_and_midpoint() {
        let p = twenty_cycle_pulse();
        assert_eq!(vector_potential(&p, 0.0), 0.0);
        assert!(vector_potential(&p, p.duration()).abs() < 1e-15);
        let mid = vector_potential(&p, p.duration() / 2.0);
        assert!((mid - p.f0 / p.omega_l).abs() < 1e-12);
        assert_eq!(vector_potential(&p, -1.0), 0.0);
        assert_eq!(vector_potential(&p, p.duration() + 1.0), 0.0);
    }

    #[test]
    fn time_grid_twenty_cycle_numbers() {
        let p = twenty_cycle_pulse();
        let g = make_time_grid(&p, 0.02, 10).unwrap();
        let expected = (2.0 * PI * 20.0 / 0.057 / 0.02).ceil() as usize;
        assert_eq!(g.n_steps, expected);
        assert!((g.obs_times[1] - 0.2).abs() < 1e-15);
        assert!(g.final_time() >= p.duration());
        assert!(g.final_time() >= p.duration() - g.obs_spacing());
    }

    #[test]
    fn time_grid_stride_one_matches_fine_grid() {
        let p = PulseConfig::new(0.05, 0.5, 2).unwrap();
        let g = make_time_grid(&p, 0.1, 1).unwrap();
        assert_eq!(g.obs_times.len(), g.n_steps + 1);
        for (k, t) in g.obs_times.iter().enumerate() {
            assert_eq!(*t, k as f64 * 0.1);
        }
    }

    #[test]
    fn degenerate_grid_rejected() {
        let p = PulseConfig::new(0.05, 0.057, 1).unwrap();
        assert!(make_time_grid(&p, p.duration(), 1).is_err());
        assert!(make_time_grid(&p, 0.1, 0).is_err());
        assert!(make_time_grid(&p, -0.1, 1).is_err());
    }

    #[test]
    fn coupling_matches_quoted_values() {
        let (g_atom, _) = default_coupling(&twenty_cycle_pulse());
        let (g_hub, _) = default_coupling(&PulseConfig::new(0.0025, 0.00955, 10).unwrap());
        assert_eq!(format!("{g_atom:.0e}"), "4e-8");
        assert_eq!(format!("{g_hub:.0e}"), "3e-9");
    }

    #[test]
    fn coupling_scales_with_frequency() {
        let a = PulseConfig::new(0.05, 0.05, 4).unwrap();
        let b = PulseConfig::new(0.05, 0.10, 4).unwrap();
        let ratio = default_coupling(&b).0 / default_coupling(&a).0;
        assert!((ratio - 2f64.powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn invalid_inputs() {
        assert!(PulseConfig::new(0.0, 0.057, 2).is_err());
        assert!(PulseConfig::new(0.05, -1.0, 2).is_err());
        assert!(PulseConfig::new(0.05, 0.057, 0).is_err());
        assert!(EnsembleParams::new(0.0, 1e-8).is_err());
        assert!(EnsembleParams::new(1.5, 1e-8).is_err());
        assert!(EnsembleParams::new(10.0, 0.0).is_err());
    }
}
