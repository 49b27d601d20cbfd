//! Self-check commands that need no configuration file.

use std::io::Write;

use num_complex::Complex64;
use phd_core::dipole::{read_table, write_row_csv, DipoleError};
use phd_core::nscaling::{brute_force_moment, evaluate_moment, expand_moment, required_tuples, MomentTable};
use phd_core::toy::{loglog_slope, toy_scaling, write_scaling_csv, ScalingRow, ToyConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::run::RunError;

/// Smallest acceptable log-log slope of the toy-model error against g0.
pub const MIN_TOY_SLOPE: f64 = 1.8;

pub const DEFAULT_TOY_G0: [f64; 4] = [0.001, 0.002, 0.005, 0.01];

pub struct ToyReport {
    pub rows: Vec<ScalingRow>,
    pub slope: f64,
}

/// Exact vs perturbative photon number of the two-level toy model; the
/// report is written to `out` as CSV.
pub fn toy_verify<W: Write>(g0s: &[f64], mut out: W) -> Result<ToyReport, RunError> {
    if g0s.len() < 2 || g0s.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
        return Err(crate::config::ConfigError::Invalid("need at least two positive g0 values".into()).into());
    }
    let rows = toy_scaling(&ToyConfig::default(), g0s).map_err(|e| RunError::Numerical(e.to_string()))?;
    let slope = loglog_slope(&rows);
    write_scaling_csv(&rows, &mut out)?;
    writeln!(out, "# slope {slope:.4}")?;
    if !(slope >= MIN_TOY_SLOPE) {
        return Err(RunError::Numerical(format!("toy error slope {slope:.3} below {MIN_TOY_SLOPE}")));
    }
    Ok(ToyReport { rows, slope })
}

pub struct NScaleReport {
    pub cases: usize,
    pub max_rel_error: f64,
}

pub const NSCALE_TOLERANCE: f64 = 1e-12;

fn random_moments(k: usize, rng: &mut ChaCha8Rng) -> MomentTable {
    required_tuples(k)
        .into_iter()
        .map(|t| (t, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
        .collect()
}

/// Compare the partition expansion with brute-force enumeration for
/// k = 2..4, N = 2..5 over `draws` random single-emitter moment sets.
pub fn nscale_test(draws: usize, seed: u64) -> Result<NScaleReport, RunError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for _ in 0..draws {
        for k in 2..=4 {
            let moments = random_moments(k, &mut rng);
            for n in 2..=5usize {
                let num = |e: phd_core::nscaling::NScalingError| RunError::Numerical(e.to_string());
                let terms = expand_moment(k, n as u64).map_err(num)?;
                let fast = evaluate_moment(&terms, &moments).map_err(num)?;
                let slow = brute_force_moment(k, n, &moments).map_err(num)?;
                let rel = (fast - slow).norm() / slow.norm().max(f64::MIN_POSITIVE);
                worst = worst.max(rel);
                cases += 1;
            }
        }
    }
    if !(worst <= NSCALE_TOLERANCE) {
        return Err(RunError::Numerical(format!("expansion deviates from enumeration by {worst:e}")));
    }
    Ok(NScaleReport { cases, max_rel_error: worst })
}

/// Dump t, Re p_{m,n}, Im p_{m,n} of a stored table as CSV.
pub fn export_table<W: Write>(path: &std::path::Path, m: usize, n: usize, out: W) -> Result<(), RunError> {
    let file = std::fs::File::open(path)?;
    let table = read_table(std::io::BufReader::new(file))?;
    match write_row_csv(&table, m, n, out) {
        Err(DipoleError::Malformed(msg)) => Err(crate::config::ConfigError::Invalid(msg).into()),
        other => Ok(other?),
    }
}
