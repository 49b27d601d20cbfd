//! Run orchestration: emitter setup, one table build, observables for every
//! requested N, diagnostics and deterministic output files.
//!
//! N enters only through closed-form prefactors, so a whole N sweep reuses
//! a single transition-dipole table and a single Fourier pass.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use phd_core::atom1d::{AbsorbingMask, Atom1d, SoftCoreParams, SpatialGrid};
use phd_core::dipole::{compute_table, write_table, DipoleError, TableMode, TransitionDipoleTable};
use phd_core::hubbard::{HubbardChain, HubbardParams};
use phd_core::model::{default_coupling, default_stride, make_time_grid, EmitterModel, EnsembleParams, PulseConfig, TimeGrid};
use phd_core::observables::{
    g2_coefficients, row_transforms, select_g2_states, spectrum_point, squeezing_from, FrequencyGrid, G2Coefficients,
    RowTransforms, SqueezingMode,
};
use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{ConfigError, EmitterConfig, HubbardBasis, RunConfig};

/// Per-bin value of N·g0·|P̃| above which the perturbative expansion is
/// flagged as unreliable.
pub const PERTURBATIVE_LIMIT: f64 = 0.1;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// Process exit code: 2 for configuration, 3 for numerics, 1 for IO.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Io(_) => 1,
        }
    }
}

impl From<DipoleError> for RunError {
    fn from(e: DipoleError) -> Self {
        match e {
            DipoleError::Io(io) => RunError::Io(io),
            other => RunError::Numerical(other.to_string()),
        }
    }
}

fn numerical<E: std::fmt::Display>(e: E) -> RunError {
    RunError::Numerical(e.to_string())
}

/// Observables of one frequency bin for one N. Missing values mean the
/// quantity was not requested or is undefined (see `flags`).
#[derive(Debug, Clone, PartialEq)]
pub struct BinResult {
    pub harmonic: f64,
    pub s_coh: f64,
    pub s_inc: f64,
    pub s_tot: f64,
    pub eta_full: Option<f64>,
    pub eta_sc: Option<f64>,
    pub g2: Option<f64>,
    pub mandel_q: Option<f64>,
    pub flags: Vec<&'static str>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NResult {
    pub n: f64,
    pub bins: Vec<BinResult>,
    /// Largest N·g0·|P̃| over the frequency grid.
    pub perturbative_measure: f64,
}

pub enum Emitter {
    Atom(Atom1d),
    Hubbard(HubbardChain),
}

impl Emitter {
    pub fn build(cfg: &EmitterConfig) -> Result<Self, RunError> {
        match cfg {
            EmitterConfig::Atom(a) => {
                let grid = SpatialGrid::new(a.x_max, a.n_points).map_err(|e| ConfigError::Invalid(e.to_string()))?;
                let mask = (a.mask_width > 0.0).then_some(AbsorbingMask { width_fraction: a.mask_width, exponent: a.mask_exponent });
                let atom = Atom1d::new(grid, SoftCoreParams { epsilon: a.epsilon }, mask, a.states).map_err(numerical)?;
                Ok(Emitter::Atom(atom))
            }
            EmitterConfig::Hubbard(h) => {
                let params = HubbardParams {
                    l: h.sites,
                    t0: h.t0,
                    a: h.lattice_spacing,
                    u: h.u,
                    v: h.v,
                    periodic: h.periodic,
                    n_up: h.n_up,
                    n_dn: h.n_dn,
                };
                params.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
                let chain = match h.basis {
                    HubbardBasis::Momentum => HubbardChain::ground_sector(params, h.states, h.krylov_dim),
                    HubbardBasis::Full => HubbardChain::full(params, h.states, h.krylov_dim),
                };
                Ok(Emitter::Hubbard(chain.map_err(numerical)?))
            }
        }
    }

    pub fn model(&self) -> &dyn EmitterModel {
        match self {
            Emitter::Atom(a) => a,
            Emitter::Hubbard(h) => h,
        }
    }
}

/// Everything a run computes, before anything is written to disk.
pub struct RunResults {
    pub config: RunConfig,
    pub g0: f64,
    pub grid: TimeGrid,
    pub energies: Vec<f64>,
    /// Table over all states; row-only unless g² was computed from it.
    pub table: TransitionDipoleTable,
    /// Full table used for g², when requested.
    pub g2_table: Option<TransitionDipoleTable>,
    pub per_n: Vec<NResult>,
    pub metadata: Value,
}

/// Largest deviation between two curves relative to the peak of the first.
fn peak_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let peak = a.iter().map(|x| x.abs()).filter(|x| x.is_finite()).fold(0.0, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).filter(|d| d.is_finite()).fold(0.0, f64::max) / peak
}

/// Total spectrum and full squeezing at the largest N from a table.
fn reference_curves(table: &TransitionDipoleTable, omegas: &[f64], ens: &EnsembleParams) -> (Vec<f64>, Vec<f64>) {
    omegas
        .par_iter()
        .map(|&w| {
            let rt = row_transforms(table, w);
            let s = spectrum_point(&rt, table.initial, ens).s_total;
            let v = squeezing_from(&rt, table.initial, table.final_time(), ens, SqueezingMode::Full).map(|p| p.min_variance - 0.25).unwrap_or(f64::NAN);
            (s, v)
        })
        .unzip()
}

fn bin_result(
    rt: &RowTransforms,
    g2c: Option<&G2Coefficients>,
    table: &TransitionDipoleTable,
    omega_l: f64,
    ens: &EnsembleParams,
    cfg: &RunConfig,
) -> (BinResult, f64) {
    let i = table.initial;
    let sp = spectrum_point(rt, i, ens);
    let mut flags = Vec::new();
    let mut eta = |mode| {
        if !cfg.observables.squeezing {
            return None;
        }
        match squeezing_from(rt, i, table.final_time(), ens, mode) {
            Ok(p) => Some(p.eta_db),
            Err(_) => {
                if !flags.contains(&"nonpositive_variance") {
                    flags.push("nonpositive_variance");
                }
                None
            }
        }
    };
    let eta_full = eta(SqueezingMode::Full);
    let eta_sc = eta(SqueezingMode::SemiclassicalOnly);
    let (mut g2, mut mandel_q) = (None, None);
    if let Some(c) = g2c {
        let p = c.evaluate(ens.n);
        if p.g2.is_none() {
            flags.push("g2_undefined");
        }
        g2 = p.g2;
        if cfg.observables.mandel_q {
            mandel_q = p.mandel_q;
        }
    }
    let amp = rt.p_tilde.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let measure = ens.perturbative_measure(amp);
    if measure >= PERTURBATIVE_LIMIT {
        flags.push("nonperturbative");
    }
    let (s_coh, s_inc, s_tot) = if cfg.observables.spectrum { (sp.s_coh, sp.s_inc, sp.s_total) } else { (f64::NAN, f64::NAN, f64::NAN) };
    (
        BinResult { harmonic: rt.omega / omega_l, s_coh, s_inc, s_tot, eta_full, eta_sc, g2, mandel_q, flags },
        measure,
    )
}

/// Run the configured computation without touching the filesystem.
pub fn execute(cfg: &RunConfig) -> Result<RunResults, RunError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut warnings: Vec<String> = Vec::new();
    let p = &cfg.pulse;
    let pulse = PulseConfig::with_cep(p.f0, p.omega_l, p.n_cycles, p.cep).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let (default_g0, _) = default_coupling(&pulse);
    let g0 = cfg.ensemble.g0.unwrap_or(default_g0);
    let freqs = FrequencyGrid::harmonics(p.omega_l, cfg.frequencies.h_min, cfg.frequencies.h_max, cfg.frequencies.step)
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let omega_max = freqs.omegas.iter().copied().fold(0.0, f64::max);
    let stride = cfg.grid.stride.unwrap_or_else(|| default_stride(cfg.grid.dt, omega_max));
    let grid = make_time_grid(&pulse, cfg.grid.dt, stride).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    if grid.obs_spacing() > std::f64::consts::PI / omega_max {
        warnings.push(format!("observation spacing {} undersamples the highest frequency", grid.obs_spacing()));
    }

    let emitter = Emitter::build(&cfg.emitter)?;
    let model = emitter.model();
    let available = model.energies().len();
    let m = cfg.states().min(available);
    if m < cfg.states() {
        warnings.push(format!("only {available} eigenstates available, using {m}"));
    }
    let energies = model.energies()[..m].to_vec();
    let t_setup = start.elapsed().as_secs_f64();
    info!("emitter ready: {m} states, E0 = {:.10}, {} obs samples", energies[0], grid.obs_times.len());

    let selection: Vec<usize> = (0..m).collect();
    let g2_count = cfg.observables.g2_states.unwrap_or(m).min(m);
    let single_full = cfg.observables.g2 && g2_count == m;
    let mode = if single_full { TableMode::Full } else { TableMode::RowOnly };
    let t0 = Instant::now();
    let table = compute_table(model, &pulse, &grid, &selection, 0, mode)?;
    let t_table = t0.elapsed().as_secs_f64();
    info!("table built in {t_table:.1} s");

    let t0 = Instant::now();
    let g2_table = if !cfg.observables.g2 {
        None
    } else if single_full {
        Some(table.clone())
    } else {
        // Second propagation restricted to the states that dominate emission.
        let keep = select_g2_states(&table, g2_count);
        Some(compute_table(model, &pulse, &grid, &keep, 0, TableMode::Full)?)
    };
    let t_g2_table = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let transforms: Vec<RowTransforms> = freqs.omegas.par_iter().map(|&w| row_transforms(&table, w)).collect();
    let g2_coeffs: Option<Vec<G2Coefficients>> = match &g2_table {
        Some(gt) => Some(freqs.omegas.par_iter().map(|&w| g2_coefficients(gt, w, g0)).collect::<Result<_, _>>().map_err(numerical)?),
        None => None,
    };
    let mut per_n = Vec::with_capacity(cfg.ensemble.n.len());
    for &n in &cfg.ensemble.n {
        let ens = EnsembleParams::new(n, g0).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let (bins, measures): (Vec<BinResult>, Vec<f64>) = transforms
            .iter()
            .enumerate()
            .map(|(j, rt)| bin_result(rt, g2_coeffs.as_ref().map(|c| &c[j]), &table, p.omega_l, &ens, cfg))
            .unzip();
        let perturbative_measure = measures.iter().copied().fold(0.0, f64::max);
        if perturbative_measure >= PERTURBATIVE_LIMIT {
            warnings.push(format!("N = {n:e}: N*g0*|P| reaches {perturbative_measure:.3e}, outside the perturbative regime"));
        }
        if bins.iter().any(|b| b.flags.contains(&"nonpositive_variance")) {
            warnings.push(format!("N = {n:e}: non-positive quadrature variance in some bins"));
        }
        per_n.push(NResult { n, bins, perturbative_measure });
    }
    let t_obs = t0.elapsed().as_secs_f64();

    let mut convergence = json!(null);
    if cfg.observables.convergence {
        let t0 = Instant::now();
        let n_ref = cfg.ensemble.n.iter().copied().fold(1.0, f64::max);
        let ens = EnsembleParams::new(n_ref, g0).map_err(numerical)?;
        let (s_ref, v_ref) = reference_curves(&table, &freqs.omegas, &ens);
        let mut conv = serde_json::Map::new();
        conv.insert("reference_n".into(), json!(n_ref));
        if m >= 2 {
            let half = table.subset(&(0..m.div_ceil(2)).collect::<Vec<_>>())?;
            let (s, v) = reference_curves(&half, &freqs.omegas, &ens);
            conv.insert(
                "state_truncation".into(),
                json!({"states": half.m(), "peak_rel_diff_s_tot": peak_rel_diff(&s_ref, &s), "peak_rel_diff_var_excess": peak_rel_diff(&v_ref, &v)}),
            );
        }
        if table.k() >= 5 {
            let coarse = table.decimated(2);
            let (s, v) = reference_curves(&coarse, &freqs.omegas, &ens);
            conv.insert(
                "time_step".into(),
                json!({"obs_spacing": 2.0 * grid.obs_spacing(), "peak_rel_diff_s_tot": peak_rel_diff(&s_ref, &s), "peak_rel_diff_var_excess": peak_rel_diff(&v_ref, &v)}),
            );
        }
        if let (Some(gt), Some(coeffs)) = (&g2_table, &g2_coeffs) {
            if gt.m() >= 4 {
                let half = gt.subset(&select_g2_states(gt, gt.m() / 2))?;
                let g_half: Vec<f64> = freqs
                    .omegas
                    .par_iter()
                    .map(|&w| g2_coefficients(&half, w, g0).map(|c| c.evaluate(n_ref).g2.unwrap_or(f64::NAN)))
                    .collect::<Result<_, _>>()
                    .map_err(numerical)?;
                let g_ref: Vec<f64> = coeffs.iter().map(|c| c.evaluate(n_ref).g2.unwrap_or(f64::NAN)).collect();
                let dev = g_ref.iter().zip(&g_half).map(|(a, b)| (a - b).abs()).filter(|d| d.is_finite()).fold(0.0, f64::max);
                conv.insert("g2_truncation".into(), json!({"states": gt.m(), "compared_with": half.m(), "max_abs_diff_g2": dev}));
            }
        }
        conv.insert("seconds".into(), json!(t0.elapsed().as_secs_f64()));
        convergence = Value::Object(conv);
    }

    for w in &warnings {
        warn!("{w}");
    }
    let hermiticity = g2_table.as_ref().map(|t| t.hermiticity_residual());
    let metadata = json!({
        "program": "phd-hhg",
        "version": env!("CARGO_PKG_VERSION"),
        "preset": cfg.preset,
        "threads": rayon::current_num_threads(),
        "emitter": {
            "kind": match cfg.emitter { EmitterConfig::Atom(_) => "atom", EmitterConfig::Hubbard(_) => "hubbard" },
            "states": m,
            "energies": energies,
            "ground_energy": energies[0],
        },
        "pulse": {"f0": p.f0, "omega_l": p.omega_l, "n_cycles": p.n_cycles, "cep": p.cep, "duration": pulse.duration()},
        "coupling": {"g0": g0, "volume": 2.0 * std::f64::consts::PI / (g0 * g0), "default_g0": default_g0},
        "time_grid": {
            "dt": grid.dt,
            "n_steps": grid.n_steps,
            "stride": grid.stride,
            "obs_samples": grid.obs_times.len(),
            "final_time": grid.final_time(),
        },
        "theta_convention": "theta_star = (arg B - 2 omega T)/2 mod pi, T = time_grid.final_time",
        "frequencies": {"count": freqs.omegas.len(), "h_min": cfg.frequencies.h_min, "h_max": cfg.frequencies.h_max, "step": cfg.frequencies.step},
        "g2_states": g2_table.as_ref().map(|t| t.states.clone()),
        "diagnostics": {
            "hermiticity_residual": hermiticity,
            "max_absorbed_norm": table.absorbed_norm.iter().copied().fold(0.0, f64::max),
            "perturbative_limit": PERTURBATIVE_LIMIT,
            "perturbative_measure": per_n.iter().map(|r| json!({"n": r.n, "max": r.perturbative_measure})).collect::<Vec<_>>(),
            "convergence": convergence,
        },
        "timings_seconds": {"setup": t_setup, "table": t_table, "g2_table": t_g2_table, "observables": t_obs, "total": start.elapsed().as_secs_f64()},
        "warnings": warnings,
    });
    Ok(RunResults { config: cfg.clone(), g0, grid, energies, table, g2_table, per_n, metadata })
}

/// File name of the observables of one ensemble size, e.g. `observables_N1e5.csv`.
pub fn observables_file_name(n: f64) -> String {
    format!("observables_N{n:e}.csv")
}

pub const CSV_HEADER: &str = "omega_over_omegaL,S_coh,S_inc,S_tot,eta_dB_full,eta_dB_sc,g2,mandelQ,flags";

fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.12e}"),
        _ => String::new(),
    }
}

pub fn write_observables<W: Write>(bins: &[BinResult], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for b in bins {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            cell(Some(b.harmonic)),
            cell(Some(b.s_coh)),
            cell(Some(b.s_inc)),
            cell(Some(b.s_tot)),
            cell(b.eta_full),
            cell(b.eta_sc),
            cell(b.g2),
            cell(b.mandel_q),
            b.flags.join(";")
        )?;
    }
    w.flush()
}

/// Write all artifacts of a finished run into `dir`; returns the paths.
pub fn write_outputs(results: &RunResults, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let config_path = dir.join("config.toml");
    fs::write(&config_path, results.config.to_toml())?;
    written.push(config_path);
    for r in &results.per_n {
        let path = dir.join(observables_file_name(r.n));
        write_observables(&r.bins, BufWriter::new(fs::File::create(&path)?))?;
        written.push(path);
    }
    if results.config.output.write_table {
        let path = dir.join("table.bin");
        let t = results.g2_table.as_ref().filter(|t| t.m() == results.table.m()).unwrap_or(&results.table);
        write_table(t, BufWriter::new(fs::File::create(&path)?))?;
        written.push(path);
    }
    let meta_path = dir.join("metadata.json");
    let text = serde_json::to_string_pretty(&results.metadata).map_err(|e| RunError::Numerical(e.to_string()))?;
    fs::write(&meta_path, text + "\n")?;
    written.push(meta_path);
    Ok(written)
}

/// Execute and write. `out` overrides the configured output directory.
pub fn run(cfg: &RunConfig, out: Option<&Path>) -> Result<(RunResults, Vec<PathBuf>), RunError> {
    let results = execute(cfg)?;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let files = write_outputs(&results, &dir)?;
    Ok((results, files))
}
