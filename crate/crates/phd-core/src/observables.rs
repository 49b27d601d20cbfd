//! Photonic observables of an N-emitter ensemble from a transition-dipole
//! table: harmonic spectrum, θ-minimized quadrature variance, g²(0) and the
//! photon number.
//!
//! Conventions. i is the initial state, t ranges over the recorded window
//! [0, T], and
//!
//! * P̃_m = ∫e^{−iωt} p_{i,m} dt,  v_m = ∫e^{iωt} p_{i,m} dt,
//!   u_m = ∫e^{iωt} p_{m,i} dt,
//! * ordered integrals follow [`crate::quad::ordered_prefix`].
//!
//! All integrals at one frequency depend only on the table and that
//! frequency; frequencies are evaluated independently and in parallel.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::dipole::{TableMode, TransitionDipoleTable};
use crate::model::EnsembleParams;
use crate::nscaling::falling_factorial;
use crate::quad::trapezoid_weights;
use crate::SPEED_OF_LIGHT;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservableError {
    #[error("empty frequency grid")]
    EmptyFrequencyGrid,
    #[error("frequency must be positive, got {0}")]
    NonPositiveFrequency(f64),
    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),
    #[error("g2 needs a full transition-dipole table")]
    RequiresFullTable,
    #[error("not implemented: {0}")]
    NotImplemented(&'static str),
}

/// Mode frequencies at which observables are evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    pub omegas: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(omegas: Vec<f64>) -> Result<Self, ObservableError> {
        if omegas.is_empty() {
            return Err(ObservableError::EmptyFrequencyGrid);
        }
        if let Some(&w) = omegas.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(ObservableError::NonPositiveFrequency(w));
        }
        Ok(Self { omegas })
    }

    /// h·ωL for h = h_min, h_min + step, … ≤ h_max, skipping the fundamental.
    pub fn harmonics(omega_l: f64, h_min: f64, h_max: f64, step: f64) -> Result<Self, ObservableError> {
        if !(step > 0.0) || h_max < h_min {
            return Err(ObservableError::EmptyFrequencyGrid);
        }
        let count = ((h_max - h_min) / step + 1e-9).floor() as usize + 1;
        let omegas = (0..count)
            .map(|j| h_min + j as f64 * step)
            .filter(|h| (h - 1.0).abs() > 1e-9)
            .map(|h| h * omega_l)
            .collect();
        Self::new(omegas)
    }
}

/// Single-row Fourier data at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct RowTransforms {
    pub omega: f64,
    pub p_tilde: Vec<Complex64>,
    pub u: Vec<Complex64>,
    pub v: Vec<Complex64>,
    /// Σ_{m≠i} ∫dt₁ e^{iωt₁}p_{i,m}(t₁) ∫_0^{t₁}dt₂ e^{iωt₂}p_{m,i}(t₂)
    pub ordered_forward: Complex64,
    /// The same with p_{i,m} and p_{m,i} exchanged.
    pub ordered_reverse: Complex64,
}

pub fn row_transforms(table: &TransitionDipoleTable, omega: f64) -> RowTransforms {
    let m = table.m();
    let i = table.initial;
    let w = trapezoid_weights(&table.times);
    let zero = Complex64::new(0.0, 0.0);
    let mut p_tilde = vec![zero; m];
    let mut u = vec![zero; m];
    let mut v = vec![zero; m];
    let mut fwd = vec![zero; m];
    let mut rev = vec![zero; m];
    for k in 0..table.k() {
        let ph = Complex64::from_polar(w[k], omega * table.times[k]);
        let row = table.row(k);
        let full = table.matrix(k);
        for n in 0..m {
            let x = row[n];
            let y = match full {
                Some(a) => a[n * m + i],
                None => x.conj(),
            };
            let phx = ph * x;
            let phy = ph * y;
            fwd[n] += phx * (u[n] + phy * 0.5);
            rev[n] += phy * (v[n] + phx * 0.5);
            p_tilde[n] += ph.conj() * x;
            u[n] += phy;
            v[n] += phx;
        }
    }
    let sum_excl = |a: &[Complex64]| -> Complex64 { a.iter().enumerate().filter(|(n, _)| *n != i).map(|(_, z)| z).sum() };
    RowTransforms { omega, ordered_forward: sum_excl(&fwd), ordered_reverse: sum_excl(&rev), p_tilde, u, v }
}

fn check_omega(omega: f64) -> Result<(), ObservableError> {
    if omega > 0.0 && omega.is_finite() {
        Ok(())
    } else {
        Err(ObservableError::NonPositiveFrequency(omega))
    }
}

fn spectral_prefactor(omega: f64) -> f64 {
    omega * omega / ((2.0 * PI).powi(2) * SPEED_OF_LIGHT.powi(3))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumPoint {
    pub omega: f64,
    pub s_coh: f64,
    pub s_inc: f64,
    pub s_total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    pub n: f64,
    pub points: Vec<SpectrumPoint>,
}

/// Spectrum at one bin from precomputed transforms.
pub fn spectrum_point(rt: &RowTransforms, i: usize, ens: &EnsembleParams) -> SpectrumPoint {
    let pref = spectral_prefactor(rt.omega);
    let n = ens.n;
    let s_coh = pref * n * (n - 1.0) * rt.p_tilde[i].norm_sqr();
    let s_inc = pref * n * rt.p_tilde.iter().map(|z| z.norm_sqr()).sum::<f64>();
    SpectrumPoint { omega: rt.omega, s_coh, s_inc, s_total: s_coh + s_inc }
}

/// Coherent (∝ N(N−1)) and incoherent (∝ N) emission spectrum.
pub fn spectrum(table: &TransitionDipoleTable, freqs: &FrequencyGrid, ens: &EnsembleParams) -> Result<SpectrumResult, ObservableError> {
    if freqs.omegas.is_empty() {
        return Err(ObservableError::EmptyFrequencyGrid);
    }
    let points = freqs
        .omegas
        .par_iter()
        .map(|&w| {
            check_omega(w)?;
            Ok(spectrum_point(&row_transforms(table, w), table.initial, ens))
        })
        .collect::<Result<Vec<_>, ObservableError>>()?;
    Ok(SpectrumResult { n: ens.n, points })
}

/// ⟨a†a⟩ = (g0²/ω)·[N·Σ_m|P̃_m|² + N(N−1)·|P̃_i|²].
pub fn counting_expectation(table: &TransitionDipoleTable, omega: f64, ens: &EnsembleParams) -> Result<f64, ObservableError> {
    check_omega(omega)?;
    let rt = row_transforms(table, omega);
    Ok(counting_from(&rt, table.initial, ens))
}

pub fn counting_from(rt: &RowTransforms, i: usize, ens: &EnsembleParams) -> f64 {
    let n = ens.n;
    let b: f64 = rt.p_tilde.iter().map(|z| z.norm_sqr()).sum();
    ens.g0 * ens.g0 / rt.omega * (n * b + n * (n - 1.0) * rt.p_tilde[i].norm_sqr())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqueezingMode {
    /// Semiclassical correlations plus the first-order quantum correction.
    Full,
    /// Semiclassical correlations only.
    SemiclassicalOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezingPoint {
    pub omega: f64,
    pub mode: SqueezingMode,
    /// ∫∫ e^{−iω(t′−t″)}⟨Δp(t′)Δp(t″)⟩ over the square; real and ≥ 0.
    pub a: f64,
    pub b: Complex64,
    /// Minimizing quadrature angle in [0, π), for the final time `t_final`.
    pub theta_star: f64,
    pub t_final: f64,
    /// min_variance − 1/4, computed without the cancellation.
    pub excess: f64,
    pub min_variance: f64,
    pub eta_db: f64,
}

/// θ-minimized quadrature variance
/// 1/4 + (g0²N/(2ω))·(A − |B|), attained at θ* = (arg B − 2ωT)/2 mod π.
pub fn quadrature_min_variance(
    table: &TransitionDipoleTable,
    omega: f64,
    ens: &EnsembleParams,
    include_quantum_correction: bool,
) -> Result<SqueezingPoint, ObservableError> {
    check_omega(omega)?;
    let rt = row_transforms(table, omega);
    let mode = if include_quantum_correction { SqueezingMode::Full } else { SqueezingMode::SemiclassicalOnly };
    squeezing_from(&rt, table.initial, table.final_time(), ens, mode)
}

/// Squeezing at one bin from precomputed transforms.
pub fn squeezing_from(
    rt: &RowTransforms,
    i: usize,
    t_final: f64,
    ens: &EnsembleParams,
    mode: SqueezingMode,
) -> Result<SqueezingPoint, ObservableError> {
    let omega = rt.omega;
    let a: f64 = rt.p_tilde.iter().enumerate().filter(|(m, _)| *m != i).map(|(_, z)| z.norm_sqr()).sum();
    let b_sym: Complex64 = (0..rt.u.len()).filter(|&m| m != i).map(|m| rt.v[m] * rt.u[m]).sum();
    let b = match mode {
        SqueezingMode::Full => b_sym + rt.ordered_forward - rt.ordered_reverse,
        SqueezingMode::SemiclassicalOnly => b_sym,
    };
    let scale = ens.g0 * ens.g0 * ens.n / (2.0 * omega);
    let excess = scale * (a - b.norm());
    let min_variance = 0.25 + excess;
    let theta_star = (0.5 * (b.arg() - 2.0 * omega * t_final)).rem_euclid(PI);
    Ok(SqueezingPoint { omega, mode, a, b, theta_star, t_final, excess, min_variance, eta_db: squeezing_db(min_variance)? })
}

/// Quadrature variance at angle θ for the coefficients of `point`.
pub fn quadrature_variance(point: &SqueezingPoint, theta: f64, ens: &EnsembleParams) -> f64 {
    let phase = Complex64::from_polar(1.0, -2.0 * theta - 2.0 * point.omega * point.t_final);
    0.25 + ens.g0 * ens.g0 * ens.n / (2.0 * point.omega) * (point.a - (phase * point.b).re)
}

/// η = −10·log10(4·Var); positive values are squeezed below vacuum.
pub fn squeezing_db(min_variance: f64) -> Result<f64, ObservableError> {
    if min_variance > 0.0 {
        Ok(-10.0 * (4.0 * min_variance).log10())
    } else {
        Err(ObservableError::NonPositiveVariance(min_variance))
    }
}

/// Q = ⟨a†a⟩·(g² − 1).
pub fn mandel_q(g2: f64, n_mean: f64) -> f64 {
    n_mean * (g2 - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G2Point {
    pub omega: f64,
    pub d0: f64,
    pub d2: f64,
    /// Combined two-emitter block (pair-pair and pair-triple terms).
    pub d3: f64,
    pub d4: f64,
    pub d2_tilde: f64,
    pub numerator: f64,
    pub denominator: f64,
    /// None when the mode receives no emission (zero denominator).
    pub g2: Option<f64>,
    pub n_mean: f64,
    pub mandel_q: Option<f64>,
}

/// Single-emitter two-photon amplitudes at one frequency.
#[derive(Debug, Clone, PartialEq)]
struct PairAmplitudes {
    u: Vec<Complex64>,
    /// x_m = Σ_n ∫dt₁ e^{iωt₁} p_{m,n}(t₁) ∫_0^{t₁}dt₂ e^{iωt₂} p_{n,i}(t₂)
    x: Vec<Complex64>,
}

fn pair_amplitudes(table: &TransitionDipoleTable, omega: f64) -> PairAmplitudes {
    let m = table.m();
    let i = table.initial;
    let w = trapezoid_weights(&table.times);
    let zero = Complex64::new(0.0, 0.0);
    let mut u = vec![zero; m];
    let mut x = vec![zero; m];
    let mut prefix = vec![zero; m];
    for k in 0..table.k() {
        let a = table.matrix(k).expect("full table");
        let ph = Complex64::from_polar(w[k], omega * table.times[k]);
        for n in 0..m {
            prefix[n] = u[n] + ph * a[n * m + i] * 0.5;
        }
        for r in 0..m {
            let row = &a[r * m..(r + 1) * m];
            let s: Complex64 = row.iter().zip(&prefix).map(|(p, c)| p * c).sum();
            x[r] += ph * s;
        }
        for n in 0..m {
            u[n] += ph * a[n * m + i];
        }
    }
    PairAmplitudes { u, x }
}

/// N-independent ingredients of g²(0) at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G2Coefficients {
    pub omega: f64,
    pub d0: f64,
    pub d2: f64,
    /// Combined two-emitter block (pair-pair and pair-triple terms).
    pub d3: f64,
    pub d4: f64,
    pub d2_tilde: f64,
}

pub fn g2_coefficients(table: &TransitionDipoleTable, omega: f64, g0: f64) -> Result<G2Coefficients, ObservableError> {
    check_omega(omega)?;
    if table.mode != TableMode::Full {
        return Err(ObservableError::RequiresFullTable);
    }
    let i = table.initial;
    let PairAmplitudes { u, x } = pair_amplitudes(table, omega);
    let a = u[i];
    let b: f64 = u.iter().map(|z| z.norm_sqr()).sum();
    let c = x[i];
    let d: f64 = x.iter().map(|z| z.norm_sqr()).sum();
    let e: Complex64 = u.iter().zip(&x).map(|(p, q)| p.conj() * q).sum();
    let gg = (g0 * g0 / omega).powi(2);
    let a2 = a.norm_sqr();
    Ok(G2Coefficients {
        omega,
        d0: gg * a2 * a2,
        d2: 4.0 * gg * (b * a2 + (c.conj() * a * a).re),
        d3: 4.0 * gg * (0.5 * b * b + c.norm_sqr() + 2.0 * (e.conj() * a).re),
        d4: 4.0 * gg * d,
        d2_tilde: gg * b * b,
    })
}

impl G2Coefficients {
    /// [N!/(N−4)!·D0 + N!/(N−3)!·D2 + N!/(N−2)!·D3 + N·D4] / (N(N−1)√D0 + N√D̃2)².
    pub fn evaluate(&self, n: f64) -> G2Point {
        // The numerator is a squared norm; clamp roundoff below zero.
        let numerator = (falling_factorial(n, 4) * self.d0
            + falling_factorial(n, 3) * self.d2
            + falling_factorial(n, 2) * self.d3
            + n * self.d4)
            .max(0.0);
        let n_mean = n * (n - 1.0) * self.d0.sqrt() + n * self.d2_tilde.sqrt();
        let denominator = n_mean * n_mean;
        let g2 = (denominator > 0.0 && denominator.is_finite()).then(|| numerator / denominator);
        G2Point {
            omega: self.omega,
            d0: self.d0,
            d2: self.d2,
            d3: self.d3,
            d4: self.d4,
            d2_tilde: self.d2_tilde,
            numerator,
            denominator,
            g2,
            n_mean,
            mandel_q: g2.map(|g| mandel_q(g, n_mean)),
        }
    }
}

/// g²(0) with exact N-dependence; see [`G2Coefficients::evaluate`].
pub fn g2(table: &TransitionDipoleTable, omega: f64, ens: &EnsembleParams) -> Result<G2Point, ObservableError> {
    Ok(g2_coefficients(table, omega, ens.g0)?.evaluate(ens.n))
}

/// Local indices of the `count` states with the largest ∫|p_{i,m}|²dt,
/// always including the initial state, in ascending index order.
pub fn select_g2_states(table: &TransitionDipoleTable, count: usize) -> Vec<usize> {
    let w = trapezoid_weights(&table.times);
    let mut weight = vec![0.0f64; table.m()];
    for k in 0..table.k() {
        for (acc, z) in weight.iter_mut().zip(table.row(k)) {
            *acc += w[k] * z.norm_sqr();
        }
    }
    let mut order: Vec<usize> = (0..table.m()).filter(|&m| m != table.initial).collect();
    order.sort_by(|&p, &q| weight[q].total_cmp(&weight[p]).then(p.cmp(&q)));
    let mut keep = vec![table.initial];
    keep.extend(order.into_iter().take(count.saturating_sub(1)));
    keep.sort_unstable();
    keep
}

/// Observables of one frequency bin.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyRecord {
    pub spectrum: SpectrumPoint,
    pub squeezing_full: SqueezingPoint,
    pub squeezing_sc: SqueezingPoint,
    /// Raw row transforms allow cheap re-evaluation for other N.
    pub transforms: RowTransforms,
}

/// Spectrum and both squeezing variants over a frequency grid, sharing the
/// Fourier pass.
pub fn evaluate_row_observables(
    table: &TransitionDipoleTable,
    freqs: &FrequencyGrid,
    ens: &EnsembleParams,
) -> Result<Vec<FrequencyRecord>, ObservableError> {
    freqs
        .omegas
        .par_iter()
        .map(|&w| {
            check_omega(w)?;
            let rt = row_transforms(table, w);
            rescale_record(&rt, table.initial, table.final_time(), ens)
        })
        .collect()
}

/// Evaluate one bin for an ensemble from precomputed transforms.
pub fn rescale_record(rt: &RowTransforms, i: usize, t_final: f64, ens: &EnsembleParams) -> Result<FrequencyRecord, ObservableError> {
    Ok(FrequencyRecord {
        spectrum: spectrum_point(rt, i, ens),
        squeezing_full: squeezing_from(rt, i, t_final, ens, SqueezingMode::Full)?,
        squeezing_sc: squeezing_from(rt, i, t_final, ens, SqueezingMode::SemiclassicalOnly)?,
        transforms: rt.clone(),
    })
}

/// The O(g0²N³) spectrum correction from higher-order counting terms.
///
/// Its numerical evaluation is an open problem; this entry point exists so
/// callers can detect that it is unavailable.
pub fn spectrum_higher_order_correction(_table: &TransitionDipoleTable, _omega: f64, _ens: &EnsembleParams) -> Result<f64, ObservableError> {
    Err(ObservableError::NotImplemented("O(g0^2 N^3) spectrum correction"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squeezing_db_values() {
        assert_eq!(squeezing_db(0.25).unwrap(), 0.0);
        assert!((squeezing_db(0.025).unwrap() - 10.0).abs() < 1e-12);
        assert!((squeezing_db(0.5).unwrap() + 10.0 * 2f64.log10()).abs() < 1e-12);
        assert!(squeezing_db(0.0).is_err());
        assert!(squeezing_db(-1.0).is_err());
    }

    #[test]
    fn mandel_values() {
        assert_eq!(mandel_q(1.0, 3.0), 0.0);
        assert_eq!(mandel_q(0.5, 2.0), -1.0);
    }

    #[test]
    fn harmonic_grid_skips_fundamental() {
        let g = FrequencyGrid::harmonics(0.1, 0.5, 3.0, 0.5).unwrap();
        let h: Vec<f64> = g.omegas.iter().map(|w| (w / 0.1 * 10.0).round() / 10.0).collect();
        assert_eq!(h, vec![0.5, 1.5, 2.0, 2.5, 3.0]);
        assert!(FrequencyGrid::new(vec![]).is_err());
        assert!(FrequencyGrid::new(vec![0.1, -0.2]).is_err());
    }
}
