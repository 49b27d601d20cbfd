//! Exact few-mode QED reference for a driven two-level emitter.
//!
//! In the frame where the emitter follows its semiclassical evolution and
//! the photons rotate freely, the joint state obeys i∂ₜΨ = V(t)Ψ with
//! V(t) = Σ_modes (g0/√ω)(a·e^{−iωt} + a†·e^{iωt}) ⊗ Q(t) and Q(t) the
//! Heisenberg-picture emission operator of the bare emitter. Propagating
//! this exactly on a truncated Fock space gives reference photon
//! observables for the perturbative formulas.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::dipole::{compute_table, DipoleError, TableMode};
use crate::linalg::dense::hermitian_expm;
use crate::model::{check_selection, make_time_grid, EmitterModel, EnsembleParams, ModelError, Propagation, PulseConfig};
use crate::observables::{counting_expectation, ObservableError};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Error)]
pub enum ToyError {
    #[error("invalid mode: {0}")]
    InvalidMode(String),
    #[error("joint dimension {0} exceeds 10^4")]
    TooLarge(usize),
    #[error("state dimension {got} does not match the joint space ({expected})")]
    DimensionMismatch { got: usize, expected: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Table(#[from] DipoleError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
}

/// One quantized field mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeConfig {
    pub omega: f64,
    pub n_max: usize,
    pub g0: f64,
}

impl ModeConfig {
    pub fn validate(&self) -> Result<(), ToyError> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(ToyError::InvalidMode(format!("frequency must be positive, got {}", self.omega)));
        }
        if self.n_max < 2 {
            return Err(ToyError::InvalidMode(format!("Fock cutoff must be at least 2, got {}", self.n_max)));
        }
        if !self.g0.is_finite() {
            return Err(ToyError::InvalidMode("coupling must be finite".into()));
        }
        Ok(())
    }
}

/// Two-level emitter with energies ∓ω0/2 under a resonant drive of Rabi
/// frequency Ω = F0·d, treated in the rotating-wave approximation so that
/// U(t) = e^{−iH0t}·e^{−iΩtσx/2} exactly. The emission operator is d·σx.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLevelRabi {
    pub omega0: f64,
    pub dipole: f64,
    energies: Vec<f64>,
}

impl TwoLevelRabi {
    pub fn new(omega0: f64, dipole: f64) -> Self {
        Self { omega0, dipole, energies: vec![-0.5 * omega0, 0.5 * omega0] }
    }

    /// Evolution operator U(t) in the field-free eigenbasis.
    pub fn evolution(&self, rabi: f64, t: f64) -> DMatrix<Complex64> {
        let (s, c) = (0.5 * rabi * t).sin_cos();
        let rot = DMatrix::from_row_slice(2, 2, &[Complex64::new(c, 0.0), Complex64::new(0.0, -s), Complex64::new(0.0, -s), Complex64::new(c, 0.0)]);
        let free = DMatrix::from_diagonal(&DVector::from_iterator(2, self.energies.iter().map(|&e| Complex64::from_polar(1.0, -e * t))));
        free * rot
    }

    /// Q(t) = U(t)†·d·σx·U(t).
    pub fn emission(&self, rabi: f64, t: f64) -> DMatrix<Complex64> {
        let u = self.evolution(rabi, t);
        let d = Complex64::new(self.dipole, 0.0);
        let p = DMatrix::from_row_slice(2, 2, &[ZERO, d, d, ZERO]);
        u.adjoint() * p * u
    }
}

struct RabiPropagation<'a> {
    model: &'a TwoLevelRabi,
    rabi: f64,
    selection: Vec<usize>,
}

impl Propagation for RabiPropagation<'_> {
    fn len(&self) -> usize {
        self.selection.len()
    }

    fn step(&mut self, _t: f64) {}

    fn emission_row(&mut self, t: f64, row: usize, out: &mut [Complex64]) {
        let q = self.model.emission(self.rabi, t);
        for (o, &n) in out.iter_mut().zip(&self.selection) {
            *o = q[(self.selection[row], n)];
        }
    }

    fn emission_matrix(&mut self, t: f64, out: &mut [Complex64]) {
        let q = self.model.emission(self.rabi, t);
        let m = self.selection.len();
        for (a, &sa) in self.selection.iter().enumerate() {
            for (b, &sb) in self.selection.iter().enumerate() {
                out[a * m + b] = q[(sa, sb)];
            }
        }
    }

    fn norms(&self) -> Vec<f64> {
        vec![1.0; self.selection.len()]
    }
}

impl EmitterModel for TwoLevelRabi {
    fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Uses only the peak field of `pulse`; the drive is always resonant.
    fn start(&self, pulse: &PulseConfig, _dt: f64, selection: &[usize]) -> Result<Box<dyn Propagation + '_>, ModelError> {
        check_selection(selection, 2)?;
        Ok(Box::new(RabiPropagation { model: self, rabi: pulse.f0 * self.dipole, selection: selection.to_vec() }))
    }
}

/// Emitter ⊗ Fock(mode 0) ⊗ Fock(mode 1) ⊗ …, emitter index outermost.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSpace {
    pub levels: usize,
    pub modes: Vec<ModeConfig>,
}

impl JointSpace {
    pub fn new(levels: usize, modes: Vec<ModeConfig>) -> Result<Self, ToyError> {
        for m in &modes {
            m.validate()?;
        }
        let space = Self { levels, modes };
        if space.dim() > 10_000 {
            return Err(ToyError::TooLarge(space.dim()));
        }
        Ok(space)
    }

    pub fn fock_dim(&self) -> usize {
        self.modes.iter().map(|m| m.n_max + 1).product()
    }

    pub fn dim(&self) -> usize {
        self.levels * self.fock_dim()
    }

    fn stride(&self, mode: usize) -> usize {
        self.modes[mode + 1..].iter().map(|m| m.n_max + 1).product()
    }

    /// Occupation of `mode` in Fock index `f`.
    fn occupation(&self, f: usize, mode: usize) -> usize {
        (f / self.stride(mode)) % (self.modes[mode].n_max + 1)
    }

    /// Matrix of the annihilation operator of `mode` on the Fock factor.
    fn annihilation(&self, mode: usize) -> DMatrix<Complex64> {
        let d = self.fock_dim();
        let stride = self.stride(mode);
        let mut a = DMatrix::zeros(d, d);
        for f in 0..d {
            let n = self.occupation(f, mode);
            if n > 0 {
                a[(f - stride, f)] = Complex64::new((n as f64).sqrt(), 0.0);
            }
        }
        a
    }
}

/// Joint state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub amplitudes: DVector<Complex64>,
}

impl JointState {
    /// |level⟩ ⊗ vacuum.
    pub fn vacuum(space: &JointSpace, level: usize) -> Self {
        let mut amplitudes = DVector::zeros(space.dim());
        amplitudes[level * space.fock_dim()] = Complex64::new(1.0, 0.0);
        Self { amplitudes }
    }

    /// |level⟩ ⊗ coherent state of amplitude `alpha` in `mode`, others empty.
    pub fn coherent(space: &JointSpace, level: usize, mode: usize, alpha: Complex64) -> Self {
        let mut amplitudes = DVector::zeros(space.dim());
        let stride = space.stride(mode);
        let mut c = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
        for n in 0..=space.modes[mode].n_max {
            amplitudes[level * space.fock_dim() + n * stride] = c;
            c *= alpha / ((n + 1) as f64).sqrt();
        }
        Self { amplitudes }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }
}

/// V(t) on the joint space for a given emitter operator Q(t).
pub fn build_interaction(q: &DMatrix<Complex64>, space: &JointSpace, t: f64) -> DMatrix<Complex64> {
    let mut field = DMatrix::zeros(space.fock_dim(), space.fock_dim());
    for (k, m) in space.modes.iter().enumerate() {
        let a = space.annihilation(k);
        let ph = Complex64::from_polar(m.g0 / m.omega.sqrt(), -m.omega * t);
        field += &a * ph + a.adjoint() * ph.conj();
    }
    q.kronecker(&field)
}

/// States along the output grid plus diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<JointState>,
    pub max_norm_drift: f64,
    /// Largest population found in the top Fock level of any mode.
    pub top_population: f64,
}

impl Trajectory {
    pub fn last(&self) -> &JointState {
        self.states.last().expect("trajectory is never empty")
    }
}

/// Population in the highest Fock level of any mode.
pub fn top_fock_population(state: &JointState, space: &JointSpace) -> f64 {
    let fd = space.fock_dim();
    (0..space.modes.len())
        .map(|mode| {
            (0..state.amplitudes.len())
                .filter(|&j| space.occupation(j % fd, mode) == space.modes[mode].n_max)
                .map(|j| state.amplitudes[j].norm_sqr())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// Fourth-order Magnus integration of i∂ₜΨ = V(t)Ψ, one step per interval
/// of `times`.
pub fn propagate_exact<F>(state: &JointState, q: F, space: &JointSpace, times: &[f64]) -> Result<Trajectory, ToyError>
where
    F: Fn(f64) -> DMatrix<Complex64>,
{
    if state.amplitudes.len() != space.dim() {
        return Err(ToyError::DimensionMismatch { got: state.amplitudes.len(), expected: space.dim() });
    }
    let c = 3f64.sqrt() / 6.0;
    let mut psi = state.amplitudes.clone();
    let mut states = vec![state.clone()];
    let mut drift = 0.0f64;
    let mut top = top_fock_population(state, space);
    let norm0 = psi.norm();
    for w in times.windows(2) {
        let h = w[1] - w[0];
        let (t1, t2) = (w[0] + (0.5 - c) * h, w[0] + (0.5 + c) * h);
        let v1 = build_interaction(&q(t1), space, t1);
        let v2 = build_interaction(&q(t2), space, t2);
        let comm = &v2 * &v1 - &v1 * &v2;
        let heff = (&v1 + &v2) * Complex64::new(0.5 * h, 0.0) + comm * Complex64::new(0.0, -3f64.sqrt() * h * h / 12.0);
        psi = hermitian_expm(&heff, 1.0) * psi;
        let next = JointState { amplitudes: psi.clone() };
        drift = drift.max((psi.norm() - norm0).abs());
        top = top.max(top_fock_population(&next, space));
        states.push(next);
    }
    if top > 1e-8 {
        log::warn!("Fock cutoff not converged: top-level population {top:e}");
    }
    Ok(Trajectory { times: times.to_vec(), states, max_norm_drift: drift, top_population: top })
}

/// Direct photon expectations of one mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactObservables {
    pub n_mean: f64,
    pub a: Complex64,
    pub a2: Complex64,
    /// ⟨a†a†aa⟩
    pub a2_dag_a2: f64,
    pub g2: Option<f64>,
    pub min_variance: f64,
}

impl ExactObservables {
    /// Var(X_θ) with X_θ = (a·e^{−iθ} + a†·e^{iθ})/2.
    pub fn variance(&self, theta: f64) -> f64 {
        let cov = self.a2 - self.a * self.a;
        0.25 + 0.5 * (self.n_mean - self.a.norm_sqr()) + 0.5 * (Complex64::from_polar(1.0, -2.0 * theta) * cov).re
    }
}

pub fn exact_observables(state: &JointState, space: &JointSpace, mode: usize) -> ExactObservables {
    let a_f = space.annihilation(mode);
    let eye = DMatrix::<Complex64>::identity(space.levels, space.levels);
    let a = eye.kronecker(&a_f);
    let psi = &state.amplitudes;
    let a_psi = &a * psi;
    let aa_psi = &a * &a_psi;
    let n_mean = a_psi.norm_squared();
    let a2_dag_a2 = aa_psi.norm_squared();
    let amp = psi.dotc(&a_psi);
    let a2 = psi.dotc(&aa_psi);
    let cov = a2 - amp * amp;
    let g2 = (n_mean > 1e-300).then(|| a2_dag_a2 / (n_mean * n_mean));
    ExactObservables {
        n_mean,
        a: amp,
        a2,
        a2_dag_a2,
        g2,
        min_variance: 0.25 + 0.5 * (n_mean - amp.norm_sqr()) - 0.5 * cov.norm(),
    }
}

/// Parameters of the two-level, one-mode comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyConfig {
    pub omega0: f64,
    pub dipole: f64,
    pub f0: f64,
    pub n_cycles: u32,
    pub mode_omega: f64,
    pub n_max: usize,
    pub dt: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self { omega0: 0.5, dipole: 1.0, f0: 0.2, n_cycles: 2, mode_omega: 0.5, n_max: 10, dt: 0.005 }
    }
}

/// One line of the g0 scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRow {
    pub g0: f64,
    pub exact: f64,
    pub phd: f64,
    pub rel_error: f64,
    pub top_population: f64,
}

/// Exact vs perturbative ⟨a†a⟩ for each coupling in `g0s`.
pub fn toy_scaling(cfg: &ToyConfig, g0s: &[f64]) -> Result<Vec<ScalingRow>, ToyError> {
    let model = TwoLevelRabi::new(cfg.omega0, cfg.dipole);
    let pulse = PulseConfig::new(cfg.f0, cfg.omega0, cfg.n_cycles)?;
    let grid = make_time_grid(&pulse, cfg.dt, 1)?;
    let table = compute_table(&model, &pulse, &grid, &[0, 1], 0, TableMode::Full)?;
    let rabi = cfg.f0 * cfg.dipole;
    g0s.par_iter()
        .map(|&g0| {
            let mode = ModeConfig { omega: cfg.mode_omega, n_max: cfg.n_max, g0 };
            let space = JointSpace::new(2, vec![mode])?;
            let traj = propagate_exact(&JointState::vacuum(&space, 0), |t| model.emission(rabi, t), &space, &grid.obs_times)?;
            let exact = exact_observables(traj.last(), &space, 0).n_mean;
            let ens = EnsembleParams::new(1.0, g0)?;
            let phd = counting_expectation(&table, cfg.mode_omega, &ens)?;
            Ok(ScalingRow { g0, exact, phd, rel_error: ((phd - exact) / exact).abs(), top_population: traj.top_population })
        })
        .collect()
}

/// Least-squares slope of log(rel_error) against log(g0).
pub fn loglog_slope(rows: &[ScalingRow]) -> f64 {
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.g0.ln(), r.rel_error.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Scaling table as CSV with header `g0,exact,phd,relError`.
pub fn write_scaling_csv<W: std::io::Write>(rows: &[ScalingRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "g0,exact,phd,relError")?;
    for r in rows {
        writeln!(w, "{:e},{:e},{:e},{:e}", r.g0, r.exact, r.phd, r.rel_error)?;
    }
    Ok(())
}
