//! One-dimensional soft-core atom in the velocity gauge.
//!
//! H(t) = p²/2 + A(t)·p + U(x) with U(x) = −1/√(x² + ε²) on a uniform grid
//! with Dirichlet ends. The kinetic term uses the 3-point Laplacian and p̂
//! the central difference −i(ψ_{j+1} − ψ_{j−1})/(2dx); both are exactly
//! Hermitian on the grid, so Crank–Nicolson steps are exactly unitary in the
//! absence of the absorbing mask. Inner products carry the factor dx.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::tridiag::{SymTridiagonal, TridiagError};
use crate::model::{check_selection, vector_potential, EmitterModel, ModelError, Propagation, PulseConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AtomError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Eigensolver(#[from] TridiagError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    pub x_max: f64,
    pub n_points: usize,
}

impl SpatialGrid {
    pub fn new(x_max: f64, n_points: usize) -> Result<Self, AtomError> {
        if !(x_max > 0.0 && x_max.is_finite()) {
            return Err(AtomError::InvalidGrid(format!("xMax must be positive, got {x_max}")));
        }
        if n_points < 3 {
            return Err(AtomError::InvalidGrid(format!("need at least 3 points, got {n_points}")));
        }
        Ok(Self { x_max, n_points })
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.x_max / (self.n_points - 1) as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.x_max + j as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.x(j)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftCoreParams {
    pub epsilon: f64,
}

impl Default for SoftCoreParams {
    fn default() -> Self {
        Self { epsilon: 0.816 }
    }
}

impl SoftCoreParams {
    pub fn potential(&self, x: f64) -> f64 {
        -1.0 / (x * x + self.epsilon * self.epsilon).sqrt()
    }
}

/// cos^α absorber over an outer fraction of the grid at each edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsorbingMask {
    pub width_fraction: f64,
    pub exponent: f64,
}

impl Default for AbsorbingMask {
    fn default() -> Self {
        Self { width_fraction: 0.1, exponent: 0.125 }
    }
}

impl AbsorbingMask {
    /// Mask samples on `grid`; strictly positive, equal to 1 in the interior.
    pub fn values(&self, grid: &SpatialGrid) -> Vec<f64> {
        let width = self.width_fraction * 2.0 * grid.x_max;
        let inner = grid.x_max - width;
        // Offsetting by dx keeps the outermost point strictly above zero.
        let span = width + grid.dx();
        (0..grid.n_points)
            .map(|j| {
                let d = grid.x(j).abs() - inner;
                if d <= 0.0 || width <= 0.0 {
                    1.0
                } else {
                    (0.5 * std::f64::consts::PI * d / span).cos().powf(self.exponent)
                }
            })
            .collect()
    }
}

/// Complex wavefunction samples on a [`SpatialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub psi: Vec<Complex64>,
}

impl GridState {
    pub fn from_real(values: &[f64]) -> Self {
        Self { psi: values.iter().map(|&v| Complex64::new(v, 0.0)).collect() }
    }

    pub fn norm_sq(&self, dx: f64) -> f64 {
        self.psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &GridState, dx: f64) -> Complex64 {
        self.psi.iter().zip(&other.psi).map(|(a, b)| a.conj() * b).sum::<Complex64>() * dx
    }
}

fn field_free_tridiagonal(grid: &SpatialGrid, pot: &SoftCoreParams) -> SymTridiagonal {
    let dx = grid.dx();
    let diag = (0..grid.n_points).map(|j| 1.0 / (dx * dx) + pot.potential(grid.x(j))).collect();
    let off = vec![-0.5 / (dx * dx); grid.n_points - 1];
    SymTridiagonal::new(diag, off)
}

/// The `m` lowest eigenpairs of H₀ = −½∂² + U, normalized with Σψ²dx = 1,
/// real, with the first significant local maximum of |ψ| positive.
pub fn field_free_eigenstates(
    grid: &SpatialGrid,
    pot: &SoftCoreParams,
    m: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>), AtomError> {
    if !(pot.epsilon > 0.0) {
        return Err(AtomError::InvalidParameter(format!("epsilon must be positive, got {}", pot.epsilon)));
    }
    let (energies, mut states) = field_free_tridiagonal(grid, pot).lowest_eigenpairs(m)?;
    let scale = 1.0 / grid.dx().sqrt();
    for s in &mut states {
        let peak = s.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let n = s.len();
        let antinode = (0..n)
            .find(|&j| {
                let a = s[j].abs();
                a > 1e-3 * peak && (j == 0 || a >= s[j - 1].abs()) && (j + 1 == n || a >= s[j + 1].abs())
            })
            .unwrap_or(0);
        let sign = if s[antinode] < 0.0 { -scale } else { scale };
        s.iter_mut().for_each(|v| *v *= sign);
    }
    Ok((energies, states))
}

/// (p̂ψ)_j = −i(ψ_{j+1} − ψ_{j−1})/(2dx) with zero boundary values.
pub fn momentum_apply(state: &GridState, grid: &SpatialGrid) -> GridState {
    let n = state.psi.len();
    let f = Complex64::new(0.0, -0.5 / grid.dx());
    let at = |j: isize| if j < 0 || j as usize >= n { Complex64::new(0.0, 0.0) } else { state.psi[j as usize] };
    GridState { psi: (0..n as isize).map(|j| f * (at(j + 1) - at(j - 1))).collect() }
}

pub fn apply_mask(state: &mut GridState, mask: &[f64]) {
    for (z, m) in state.psi.iter_mut().zip(mask) {
        *z *= *m;
    }
}

/// LU factors of (1 + i·dt/2·H) together with the explicit (1 − i·dt/2·H)
/// coefficients, for one time step and a given vector potential.
///
/// The Hermitian part of 1 + iτH is the identity, so elimination without
/// pivoting is stable.
#[derive(Debug, Clone)]
struct CnFactor {
    rhs_diag_im: Vec<f64>,
    rhs_up: Complex64,
    rhs_low: Complex64,
    low: Complex64,
    inv_re: Vec<f64>,
    inv_im: Vec<f64>,
    cp_re: Vec<f64>,
    cp_im: Vec<f64>,
}

impl CnFactor {
    fn new(h_diag: &[f64], dx: f64, a: f64, dt: f64) -> Self {
        let n = h_diag.len();
        let tau = 0.5 * dt;
        let s = -0.5 / (dx * dx);
        let beta = a / (2.0 * dx);
        let up = Complex64::new(tau * beta, tau * s);
        let low = Complex64::new(-tau * beta, tau * s);
        let mut inv_re = vec![0.0; n];
        let mut inv_im = vec![0.0; n];
        let mut cp_re = vec![0.0; n];
        let mut cp_im = vec![0.0; n];
        let mut cp_prev = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let den = Complex64::new(1.0, tau * h_diag[j]) - low * cp_prev;
            let inv = den.inv();
            let cp = up * inv;
            inv_re[j] = inv.re;
            inv_im[j] = inv.im;
            cp_re[j] = cp.re;
            cp_im[j] = cp.im;
            cp_prev = cp;
        }
        Self {
            rhs_diag_im: h_diag.iter().map(|h| -tau * h).collect(),
            rhs_up: -up,
            rhs_low: -low,
            low,
            inv_re,
            inv_im,
            cp_re,
            cp_im,
        }
    }

    fn solve(&self, psi: &mut [Complex64]) {
        let n = psi.len();
        let mut prev_old = Complex64::new(0.0, 0.0);
        let mut prev_y = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let cur = psi[j];
            let next = if j + 1 < n { psi[j + 1] } else { Complex64::new(0.0, 0.0) };
            let r = Complex64::new(1.0, self.rhs_diag_im[j]) * cur + self.rhs_up * next + self.rhs_low * prev_old;
            let y = (r - self.low * prev_y) * Complex64::new(self.inv_re[j], self.inv_im[j]);
            prev_old = cur;
            psi[j] = y;
            prev_y = y;
        }
        for j in (0..n - 1).rev() {
            let x1 = psi[j + 1];
            psi[j] -= Complex64::new(self.cp_re[j], self.cp_im[j]) * x1;
        }
    }
}

fn hamiltonian_diagonal(grid: &SpatialGrid, pot: &SoftCoreParams) -> Vec<f64> {
    let dx = grid.dx();
    (0..grid.n_points).map(|j| 1.0 / (dx * dx) + pot.potential(grid.x(j))).collect()
}

/// One Crank–Nicolson step from t to t + dt with A evaluated at t + dt/2.
/// No mask is applied.
pub fn cn_step(state: &mut GridState, grid: &SpatialGrid, pot: &SoftCoreParams, t: f64, dt: f64, pulse: &PulseConfig) {
    let a = vector_potential(pulse, t + 0.5 * dt);
    CnFactor::new(&hamiltonian_diagonal(grid, pot), grid.dx(), a, dt).solve(&mut state.psi);
}

/// Crank–Nicolson eigenphase per step for an eigenvalue E: the propagated
/// eigenstate acquires exp(−i·cn_energy(E, dt)·t).
pub fn cn_energy(e: f64, dt: f64) -> f64 {
    2.0 / dt * (0.5 * e * dt).atan()
}

/// Field-free eigenbasis of the soft-core atom.
#[derive(Debug, Clone)]
pub struct Atom1d {
    pub grid: SpatialGrid,
    pub soft_core: SoftCoreParams,
    pub mask: Option<AbsorbingMask>,
    pub energies: Vec<f64>,
    /// Real eigenfunctions with Σψ²dx = 1.
    pub states: Vec<Vec<f64>>,
}

impl Atom1d {
    pub fn new(grid: SpatialGrid, soft_core: SoftCoreParams, mask: Option<AbsorbingMask>, m: usize) -> Result<Self, AtomError> {
        let (energies, states) = field_free_eigenstates(&grid, &soft_core, m)?;
        Ok(Self { grid, soft_core, mask, energies, states })
    }
}

const LANES: usize = 8;
type Lane = [f64; LANES];

/// A group of LANES states stored point-major so the tridiagonal sweeps
/// vectorize across states.
#[derive(Clone)]
struct Chunk {
    re: Vec<Lane>,
    im: Vec<Lane>,
    used: usize,
}

#[inline(always)]
fn sweep_kernel(f: &CnFactor, mask: Option<&[f64]>, re: &mut [Lane], im: &mut [Lane]) {
    let n = re.len();
    let (ur, ui) = (f.rhs_up.re, f.rhs_up.im);
    let (lr, li) = (f.rhs_low.re, f.rhs_low.im);
    let (kr, ki) = (f.low.re, f.low.im);
    let mut po_r = [0.0; LANES];
    let mut po_i = [0.0; LANES];
    let mut py_r = [0.0; LANES];
    let mut py_i = [0.0; LANES];
    for j in 0..n {
        let cr = re[j];
        let ci = im[j];
        let (nr, ni) = if j + 1 < n { (re[j + 1], im[j + 1]) } else { ([0.0; LANES], [0.0; LANES]) };
        let dim = f.rhs_diag_im[j];
        let (vr, vi) = (f.inv_re[j], f.inv_im[j]);
        let mut yr = [0.0; LANES];
        let mut yi = [0.0; LANES];
        for l in 0..LANES {
            let rr = cr[l] - dim * ci[l] + ur * nr[l] - ui * ni[l] + lr * po_r[l] - li * po_i[l] - (kr * py_r[l] - ki * py_i[l]);
            let ri = ci[l] + dim * cr[l] + ur * ni[l] + ui * nr[l] + lr * po_i[l] + li * po_r[l] - (kr * py_i[l] + ki * py_r[l]);
            yr[l] = rr * vr - ri * vi;
            yi[l] = rr * vi + ri * vr;
        }
        po_r = cr;
        po_i = ci;
        re[j] = yr;
        im[j] = yi;
        py_r = yr;
        py_i = yi;
    }
    // Back substitution; the mask is applied on store while the recurrence
    // runs on unmasked values.
    let mut xr = re[n - 1];
    let mut xi = im[n - 1];
    if let Some(m) = mask {
        for l in 0..LANES {
            re[n - 1][l] *= m[n - 1];
            im[n - 1][l] *= m[n - 1];
        }
    }
    for j in (0..n - 1).rev() {
        let (cr, ci) = (f.cp_re[j], f.cp_im[j]);
        let mut nr = re[j];
        let mut ni = im[j];
        for l in 0..LANES {
            nr[l] -= cr * xr[l] - ci * xi[l];
            ni[l] -= cr * xi[l] + ci * xr[l];
        }
        xr = nr;
        xi = ni;
        match mask {
            Some(m) => {
                let w = m[j];
                for l in 0..LANES {
                    re[j][l] = nr[l] * w;
                    im[j][l] = ni[l] * w;
                }
            }
            None => {
                re[j] = nr;
                im[j] = ni;
            }
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn sweep_avx2(f: &CnFactor, mask: Option<&[f64]>, re: &mut [Lane], im: &mut [Lane]) {
    sweep_kernel(f, mask, re, im)
}

fn sweep(f: &CnFactor, mask: Option<&[f64]>, re: &mut [Lane], im: &mut [Lane]) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the required CPU feature was detected at runtime.
            return unsafe { sweep_avx2(f, mask, re, im) };
        }
    }
    sweep_kernel(f, mask, re, im)
}

/// Batched Crank–Nicolson propagation of selected atomic eigenstates.
pub struct AtomPropagation<'a> {
    atom: &'a Atom1d,
    pulse: PulseConfig,
    dt: f64,
    h_diag: Vec<f64>,
    mask: Option<Vec<f64>>,
    chunks: Vec<Chunk>,
    count: usize,
    // Scratch buffers for the emission matrix, n × 2M row-major.
    g: Vec<f64>,
    h: Vec<f64>,
    c: Vec<f64>,
}

impl<'a> AtomPropagation<'a> {
    fn new(atom: &'a Atom1d, pulse: &PulseConfig, dt: f64, selection: &[usize]) -> Self {
        let n = atom.grid.n_points;
        let chunks = selection
            .chunks(LANES)
            .map(|sel| {
                let mut re = vec![[0.0; LANES]; n];
                for (l, &s) in sel.iter().enumerate() {
                    for j in 0..n {
                        re[j][l] = atom.states[s][j];
                    }
                }
                Chunk { re, im: vec![[0.0; LANES]; n], used: sel.len() }
            })
            .collect();
        Self {
            atom,
            pulse: *pulse,
            dt,
            h_diag: hamiltonian_diagonal(&atom.grid, &atom.soft_core),
            mask: atom.mask.map(|m| m.values(&atom.grid)),
            chunks,
            count: selection.len(),
            g: Vec::new(),
            h: Vec::new(),
            c: Vec::new(),
        }
    }

    fn get(&self, m: usize, j: usize) -> Complex64 {
        let ch = &self.chunks[m / LANES];
        Complex64::new(ch.re[j][m % LANES], ch.im[j][m % LANES])
    }

    /// Current state `m` as a [`GridState`].
    pub fn state(&self, m: usize) -> GridState {
        GridState { psi: (0..self.atom.grid.n_points).map(|j| self.get(m, j)).collect() }
    }
}

impl Propagation for AtomPropagation<'_> {
    fn len(&self) -> usize {
        self.count
    }

    fn step(&mut self, t: f64) {
        let a = vector_potential(&self.pulse, t + 0.5 * self.dt);
        let f = CnFactor::new(&self.h_diag, self.atom.grid.dx(), a, self.dt);
        let mask = self.mask.as_deref();
        self.chunks.par_iter_mut().for_each(|ch| sweep(&f, mask, &mut ch.re, &mut ch.im));
    }

    fn emission_row(&mut self, _t: f64, row: usize, out: &mut [Complex64]) {
        // p_{row,n} = conj(⟨φ_n|p̂|φ_row⟩), so p̂ is applied once.
        let n = self.atom.grid.n_points;
        let dx = self.atom.grid.dx();
        let p_row = momentum_apply(&self.state(row), &self.atom.grid);
        for (m, o) in out.iter_mut().enumerate().take(self.count) {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                acc += self.get(m, j).conj() * p_row.psi[j];
            }
            *o = (acc * dx).conj();
        }
    }

    fn emission_matrix(&mut self, _t: f64, out: &mut [Complex64]) {
        // With Φ = R + iI and X = DΦ (real central difference, p̂ = −iD):
        // ⟨φ_m|p̂|φ_n⟩/dx = (RᵀXi − IᵀXr)_{mn} − i(RᵀXr + IᵀXi)_{mn}.
        let n = self.atom.grid.n_points;
        let m = self.count;
        let w = 2 * m;
        let inv2dx = 0.5 / self.atom.grid.dx();
        self.g.resize(n * w, 0.0);
        self.h.resize(n * w, 0.0);
        self.c.resize(w * w, 0.0);
        for (ci, ch) in self.chunks.iter().enumerate() {
            for l in 0..ch.used {
                let col = ci * LANES + l;
                for j in 0..n {
                    self.g[j * w + col] = ch.re[j][l];
                    self.g[j * w + m + col] = ch.im[j][l];
                    let (pr, pi) = if j > 0 { (ch.re[j - 1][l], ch.im[j - 1][l]) } else { (0.0, 0.0) };
                    let (nr, ni) = if j + 1 < n { (ch.re[j + 1][l], ch.im[j + 1][l]) } else { (0.0, 0.0) };
                    self.h[j * w + col] = (nr - pr) * inv2dx;
                    self.h[j * w + m + col] = (ni - pi) * inv2dx;
                }
            }
        }
        // SAFETY: g and h are n × w row-major, c is w × w row-major; all
        // buffers were sized above.
        unsafe {
            matrixmultiply::dgemm(
                w, n, w, 1.0,
                self.g.as_ptr(), 1, w as isize,
                self.h.as_ptr(), w as isize, 1,
                0.0, self.c.as_mut_ptr(), w as isize, 1,
            );
        }
        let dx = self.atom.grid.dx();
        let c = &self.c;
        for a in 0..m {
            for b in 0..m {
                let rr = c[a * w + b];
                let ri = c[a * w + m + b];
                let ir = c[(m + a) * w + b];
                let ii = c[(m + a) * w + m + b];
                out[a * m + b] = Complex64::new(ri - ir, -(rr + ii)) * dx;
            }
        }
    }

    fn norms(&self) -> Vec<f64> {
        let dx = self.atom.grid.dx();
        (0..self.count)
            .map(|m| {
                let ch = &self.chunks[m / LANES];
                let l = m % LANES;
                ch.re.iter().zip(&ch.im).map(|(r, i)| r[l] * r[l] + i[l] * i[l]).sum::<f64>() * dx
            })
            .collect()
    }
}

impl EmitterModel for Atom1d {
    fn energies(&self) -> &[f64] {
        &self.energies
    }

    fn start(&self, pulse: &PulseConfig, dt: f64, selection: &[usize]) -> Result<Box<dyn Propagation + '_>, ModelError> {
        check_selection(selection, self.energies.len())?;
        Ok(Box::new(AtomPropagation::new(self, pulse, dt, selection)))
    }
}
