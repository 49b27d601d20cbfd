//! Extended U–V Fermi–Hubbard chain driven through a Peierls phase.
//!
//! H(A) = −t0·Σ_{i,σ}(e^{iaA}c†_{i,σ}c_{i+1,σ} + h.c.) + U·Σ_i n_{i↑}n_{i↓}
//!        + V·Σ_i n_i n_{i+1}
//!
//! and the emission operator is the Peierls current J(A) = ∂H/∂A
//! = −i·a·t0·Σ(e^{iaA}c†_i c_{i+1} − h.c.).
//!
//! Basis states are pairs of occupation bitmasks (up, down), site i ↔ bit i.
//! Fermionic operators are ordered with all up modes before all down modes
//! and sites ascending within a species, so a hop c†_i c_j within one
//! species picks up (−1) per occupied site strictly between i and j.
//!
//! On a periodic ring H, J and the drive conserve lattice momentum; a
//! [`MomentumSector`] restricts everything to one momentum block.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::dense::{hermitian_eigh, symmetric_eigh};
use crate::linalg::krylov::{lanczos_expm, KrylovInfo};
use crate::linalg::sparse::CsrMatrix;
use crate::model::{check_selection, vector_potential, EmitterModel, ModelError, Propagation, PulseConfig};

const MAX_DIMENSION: usize = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HubbardError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("basis dimension {0} exceeds the limit of 10^7")]
    TooLarge(usize),
    #[error("requested {requested} eigenstates of a {dim}-dimensional space")]
    TooManyStates { requested: usize, dim: usize },
    #[error("momentum sectors need a periodic chain")]
    NotPeriodic,
    #[error("momentum sector {0} is empty")]
    EmptySector(usize),
    #[error("eigenvectors not orthonormal (max deviation {0:e})")]
    NotOrthonormal(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HubbardParams {
    pub l: usize,
    pub t0: f64,
    pub a: f64,
    pub u: f64,
    pub v: f64,
    pub periodic: bool,
    pub n_up: usize,
    pub n_dn: usize,
}

impl Default for HubbardParams {
    /// Half-filled eight-site ring with U = 12·t0 and V = 4·t0.
    fn default() -> Self {
        let t0 = 0.0191;
        Self { l: 8, t0, a: 7.5589, u: 12.0 * t0, v: 4.0 * t0, periodic: true, n_up: 4, n_dn: 4 }
    }
}

impl HubbardParams {
    pub fn validate(&self) -> Result<(), HubbardError> {
        if self.l < 2 || self.l > 30 {
            return Err(HubbardError::InvalidParams(format!("L must be in 2..=30, got {}", self.l)));
        }
        if self.n_up > self.l || self.n_dn > self.l {
            return Err(HubbardError::InvalidParams(format!(
                "electron counts ({}, {}) exceed L = {}",
                self.n_up, self.n_dn, self.l
            )));
        }
        for (name, v) in [("t0", self.t0), ("a", self.a), ("U", self.u), ("V", self.v)] {
            if !v.is_finite() {
                return Err(HubbardError::InvalidParams(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    /// Bonds (i, i+1) including the wrap-around bond on a ring.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let n = if self.periodic { self.l } else { self.l - 1 };
        (0..n).map(|i| (i, (i + 1) % self.l)).collect()
    }
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, j| acc * (n - j) / (j + 1))
}

/// Occupation-number basis of one (n_up, n_dn) sector.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationBasis {
    pub l: usize,
    pub up_masks: Vec<u32>,
    pub dn_masks: Vec<u32>,
    up_rank: Vec<u32>,
    dn_rank: Vec<u32>,
}

impl OccupationBasis {
    pub fn dim(&self) -> usize {
        self.up_masks.len() * self.dn_masks.len()
    }

    /// (up, dn) masks of basis state `idx`.
    pub fn state(&self, idx: usize) -> (u32, u32) {
        let nd = self.dn_masks.len();
        (self.up_masks[idx / nd], self.dn_masks[idx % nd])
    }

    pub fn index(&self, up: u32, dn: u32) -> usize {
        self.up_rank[up as usize] as usize * self.dn_masks.len() + self.dn_rank[dn as usize] as usize
    }
}

fn masks_with(l: usize, n: usize) -> (Vec<u32>, Vec<u32>) {
    let masks: Vec<u32> = (0u32..(1 << l)).filter(|m| m.count_ones() as usize == n).collect();
    let mut rank = vec![u32::MAX; 1 << l];
    for (r, &m) in masks.iter().enumerate() {
        rank[m as usize] = r as u32;
    }
    (masks, rank)
}

/// Basis ordered lexicographically by (up mask, down mask).
pub fn build_basis(params: &HubbardParams) -> Result<OccupationBasis, HubbardError> {
    params.validate()?;
    let dim = binomial(params.l, params.n_up) * binomial(params.l, params.n_dn);
    if dim > MAX_DIMENSION {
        return Err(HubbardError::TooLarge(dim));
    }
    let (up_masks, up_rank) = masks_with(params.l, params.n_up);
    let (dn_masks, dn_rank) = masks_with(params.l, params.n_dn);
    Ok(OccupationBasis { l: params.l, up_masks, dn_masks, up_rank, dn_rank })
}

fn between_mask(i: usize, j: usize) -> u32 {
    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
    ((1u32 << hi) - 1) & !((1u32 << (lo + 1)) - 1)
}

/// c†_i c_j on one species' mask: new mask and sign, or None.
fn hop(mask: u32, i: usize, j: usize) -> Option<(u32, f64)> {
    if mask & (1 << j) == 0 || mask & (1 << i) != 0 {
        return None;
    }
    let sign = if (mask & between_mask(i, j)).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
    Some((mask ^ (1 << i) ^ (1 << j), sign))
}

fn interaction_energy(params: &HubbardParams, up: u32, dn: u32) -> f64 {
    let occ = |m: u32, i: usize| f64::from((m >> i) & 1);
    let onsite: f64 = (0..params.l).map(|i| occ(up, i) * occ(dn, i)).sum();
    let neighbor: f64 = params
        .bonds()
        .iter()
        .map(|&(i, j)| (occ(up, i) + occ(dn, i)) * (occ(up, j) + occ(dn, j)))
        .sum();
    params.u * onsite + params.v * neighbor
}

/// H and J assembled from three pieces that share one sparsity pattern:
/// the diagonal interaction D, the forward hop T = Σ c†_i c_{i+1}, and T†.
#[derive(Debug, Clone, PartialEq)]
pub struct HubbardOperators {
    pub params: HubbardParams,
    pub dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    v_diag: Vec<f64>,
    v_fwd: Vec<Complex64>,
    v_bwd: Vec<Complex64>,
}

impl HubbardOperators {
    fn from_parts(params: HubbardParams, diag: &[f64], forward: &CsrMatrix) -> Self {
        let dim = diag.len();
        let backward = forward.adjoint();
        let zero = Complex64::new(0.0, 0.0);
        let mut trip: Vec<(usize, usize, (f64, Complex64, Complex64))> = Vec::new();
        for (r, &d) in diag.iter().enumerate() {
            trip.push((r, r, (d, zero, zero)));
            trip.extend(forward.row(r).map(|(c, v)| (r, c, (0.0, v, zero))));
            trip.extend(backward.row(r).map(|(c, v)| (r, c, (0.0, zero, v))));
        }
        trip.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx = Vec::new();
        let (mut v_diag, mut v_fwd, mut v_bwd) = (Vec::new(), Vec::new(), Vec::new());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, (d, f, b)) in trip {
            if last == Some((r, c)) {
                *v_diag.last_mut().unwrap() += d;
                *v_fwd.last_mut().unwrap() += f;
                *v_bwd.last_mut().unwrap() += b;
            } else {
                row_ptr[r + 1] += 1;
                col_idx.push(c);
                v_diag.push(d);
                v_fwd.push(f);
                v_bwd.push(b);
                last = Some((r, c));
            }
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { params, dim, row_ptr, col_idx, v_diag, v_fwd, v_bwd }
    }

    fn assemble(&self, cd: f64, cf: Complex64, cb: Complex64) -> CsrMatrix {
        let values = self
            .v_diag
            .iter()
            .zip(&self.v_fwd)
            .zip(&self.v_bwd)
            .map(|((d, f), b)| cf * f + cb * b + cd * d)
            .collect();
        CsrMatrix { n: self.dim, row_ptr: self.row_ptr.clone(), col_idx: self.col_idx.clone(), values }
    }

    /// H(A) as a sparse matrix.
    pub fn hamiltonian(&self, a_cl: f64) -> CsrMatrix {
        let p = &self.params;
        let phase = Complex64::from_polar(1.0, p.a * a_cl);
        self.assemble(1.0, -p.t0 * phase, -p.t0 * phase.conj())
    }

    /// J(A) = ∂H/∂A as a sparse matrix.
    pub fn current(&self, a_cl: f64) -> CsrMatrix {
        let p = &self.params;
        let phase = Complex64::from_polar(1.0, p.a * a_cl);
        let c = Complex64::new(0.0, -p.a * p.t0);
        self.assemble(0.0, c * phase, -c * phase.conj())
    }

    /// Diagonal interaction energies.
    pub fn interaction(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|r| (self.row_ptr[r]..self.row_ptr[r + 1]).find(|&k| self.col_idx[k] == r).map_or(0.0, |k| self.v_diag[k]))
            .collect()
    }
}

/// Operators in the full occupation basis.
pub fn build_operators(basis: &OccupationBasis, params: &HubbardParams) -> HubbardOperators {
    let diag: Vec<f64> = (0..basis.dim())
        .map(|idx| {
            let (up, dn) = basis.state(idx);
            interaction_energy(params, up, dn)
        })
        .collect();
    HubbardOperators::from_parts(*params, &diag, &forward_hop(basis, params))
}

/// T = Σ_{bonds, σ} c†_{i,σ} c_{i+1,σ} in the full basis.
fn forward_hop(basis: &OccupationBasis, params: &HubbardParams) -> CsrMatrix {
    let mut trip = Vec::new();
    for col in 0..basis.dim() {
        let (up, dn) = basis.state(col);
        for &(i, j) in &params.bonds() {
            if let Some((nu, s)) = hop(up, i, j) {
                trip.push((basis.index(nu, dn), col, Complex64::new(s, 0.0)));
            }
            if let Some((nd, s)) = hop(dn, i, j) {
                trip.push((basis.index(up, nd), col, Complex64::new(s, 0.0)));
            }
        }
    }
    CsrMatrix::from_triplets(basis.dim(), trip)
}

/// Full-basis Hamiltonian at vector potential `a_cl`.
pub fn build_hamiltonian(basis: &OccupationBasis, params: &HubbardParams, a_cl: f64) -> CsrMatrix {
    build_operators(basis, params).hamiltonian(a_cl)
}

/// J(A)·ψ
pub fn current_apply(state: &[Complex64], ops: &HubbardOperators, a_cl: f64) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); state.len()];
    ops.current(a_cl).matvec(state, &mut out);
    out
}

/// Cyclic translation of one species' mask by one site, with the fermionic
/// sign from moving the wrapped particle to the front of the ordering.
fn translate(mask: u32, l: usize, n: usize) -> (u32, f64) {
    let top = (mask >> (l - 1)) & 1;
    let rotated = ((mask << 1) | top) & ((1u32 << l) - 1);
    let sign = if top == 1 && n % 2 == 0 { -1.0 } else { 1.0 };
    (rotated, sign)
}

/// States of definite lattice momentum k = 2πq/L.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumSector {
    pub q: usize,
    pub full_dim: usize,
    /// Per sector state: (full index, coefficient) pairs.
    members: Vec<Vec<(usize, Complex64)>>,
    /// Full index → (sector index, coefficient) for states in the sector.
    lookup: Vec<Option<(usize, Complex64)>>,
}

impl MomentumSector {
    pub fn new(basis: &OccupationBasis, params: &HubbardParams, q: usize) -> Result<Self, HubbardError> {
        if !params.periodic {
            return Err(HubbardError::NotPeriodic);
        }
        let l = params.l;
        let k = 2.0 * PI * q as f64 / l as f64;
        let mut seen = vec![false; basis.dim()];
        let mut members = Vec::new();
        let mut lookup = vec![None; basis.dim()];
        for rep in 0..basis.dim() {
            if seen[rep] {
                continue;
            }
            let (mut up, mut dn) = basis.state(rep);
            let mut chi = 1.0;
            let mut coef: Vec<(usize, Complex64)> = Vec::new();
            for s in 0..l {
                let idx = basis.index(up, dn);
                seen[idx] = true;
                let c = Complex64::from_polar(chi, -k * s as f64);
                match coef.iter_mut().find(|(i, _)| *i == idx) {
                    Some(e) => e.1 += c,
                    None => coef.push((idx, c)),
                }
                let (nu, su) = translate(up, l, params.n_up);
                let (nd, sd) = translate(dn, l, params.n_dn);
                up = nu;
                dn = nd;
                chi *= su * sd;
            }
            let norm: f64 = coef.iter().map(|(_, c)| c.norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-8 {
                continue;
            }
            coef.sort_by_key(|e| e.0);
            let sector_idx = members.len();
            for e in &mut coef {
                e.1 /= norm;
                lookup[e.0] = Some((sector_idx, e.1));
            }
            members.push(coef);
        }
        if members.is_empty() {
            return Err(HubbardError::EmptySector(q));
        }
        Ok(Self { q, full_dim: basis.dim(), members, lookup })
    }

    pub fn dim(&self) -> usize {
        self.members.len()
    }

    /// Sector vector → full-basis vector.
    pub fn lift(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.full_dim];
        for (r, mem) in self.members.iter().enumerate() {
            for &(idx, c) in mem {
                out[idx] += c * v[r];
            }
        }
        out
    }

    /// Full-basis vector → sector components.
    pub fn project(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        for (idx, x) in v.iter().enumerate() {
            if let Some((r, c)) = self.lookup[idx] {
                out[r] += c.conj() * x;
            }
        }
        out
    }

    /// Operators restricted to the sector.
    pub fn operators(&self, basis: &OccupationBasis, params: &HubbardParams) -> HubbardOperators {
        let fwd = forward_hop(basis, params);
        let mut trip = Vec::new();
        for (col, mem) in self.members.iter().enumerate() {
            let mut acc: HashMap<usize, Complex64> = HashMap::new();
            for &(idx, c) in mem {
                for (row, v) in fwd.row(idx) {
                    if let Some((r, cr)) = self.lookup[row] {
                        *acc.entry(r).or_default() += cr.conj() * v * c;
                    }
                }
            }
            trip.extend(acc.into_iter().filter(|(_, v)| v.norm() > 1e-14).map(|(r, v)| (r, col, v)));
        }
        let diag: Vec<f64> = self
            .members
            .iter()
            .map(|mem| {
                let (up, dn) = basis.state(mem[0].0);
                interaction_energy(params, up, dn)
            })
            .collect();
        HubbardOperators::from_parts(*params, &diag, &CsrMatrix::from_triplets(self.dim(), trip))
    }
}

/// Fix the global phase so the first largest-magnitude component is real
/// and positive.
fn fix_phase(v: &mut [Complex64]) {
    let peak = v.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    if let Some(z) = v.iter().find(|z| z.norm() >= (1.0 - 1e-8) * peak).copied() {
        let rot = z.conj() / z.norm();
        v.iter_mut().for_each(|x| *x *= rot);
    }
}

/// The `m` lowest field-free eigenpairs by dense diagonalization.
pub fn eigenstates_hubbard(ops: &HubbardOperators, m: usize) -> Result<(Vec<f64>, Vec<Vec<Complex64>>), HubbardError> {
    if m > ops.dim || m == 0 {
        return Err(HubbardError::TooManyStates { requested: m, dim: ops.dim });
    }
    let h = ops.hamiltonian(0.0).to_dense();
    let real = h.iter().all(|z| z.im == 0.0);
    let (vals, vecs): (Vec<f64>, Vec<Vec<Complex64>>) = if real {
        let (vals, v) = symmetric_eigh(&h.map(|z| z.re));
        let vecs = (0..m).map(|c| v.column(c).iter().map(|&x| Complex64::new(x, 0.0)).collect()).collect();
        (vals, vecs)
    } else {
        let (vals, v) = hermitian_eigh(&h);
        (vals, (0..m).map(|c| v.column(c).iter().copied().collect()).collect())
    };
    let mut vecs = vecs;
    vecs.iter_mut().for_each(|v| fix_phase(v));
    let mut worst = 0.0f64;
    for a in 0..m {
        for b in a..m {
            let d: Complex64 = vecs[a].iter().zip(&vecs[b]).map(|(x, y)| x.conj() * y).sum();
            let expect = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((d - expect).norm());
        }
    }
    if worst > 1e-10 {
        return Err(HubbardError::NotOrthonormal(worst));
    }
    Ok((vals[..m].to_vec(), vecs))
}

/// One Krylov step ψ ← exp(−i·dt·H(A(t + dt/2)))·ψ.
pub fn lanczos_step(state: &mut [Complex64], t: f64, dt: f64, ops: &HubbardOperators, pulse: &PulseConfig, krylov_dim: usize) -> KrylovInfo {
    let h = ops.hamiltonian(vector_potential(pulse, t + 0.5 * dt));
    lanczos_expm(|x, y| h.matvec(x, y), state, dt, krylov_dim)
}

/// ⟨ψ|n_i n_{i+1}⟩ averaged over bonds, for a full-basis state.
pub fn neighbor_density_correlation(basis: &OccupationBasis, params: &HubbardParams, psi: &[Complex64]) -> f64 {
    let bonds = params.bonds();
    let occ = |m: u32, i: usize| f64::from((m >> i) & 1);
    let mut total = 0.0;
    for (idx, z) in psi.iter().enumerate() {
        let (up, dn) = basis.state(idx);
        let corr: f64 = bonds.iter().map(|&(i, j)| (occ(up, i) + occ(dn, i)) * (occ(up, j) + occ(dn, j))).sum();
        total += z.norm_sqr() * corr;
    }
    total / bonds.len() as f64
}

/// Where the Hubbard eigenbasis lives.
#[derive(Debug, Clone, PartialEq)]
pub enum Representation {
    Full,
    Momentum(MomentumSector),
}

/// Field-free eigenbasis of the chain, ready for propagation.
#[derive(Debug, Clone)]
pub struct HubbardChain {
    pub params: HubbardParams,
    pub basis: OccupationBasis,
    pub representation: Representation,
    pub ops: HubbardOperators,
    pub energies: Vec<f64>,
    pub states: Vec<Vec<Complex64>>,
    pub krylov_dim: usize,
}

impl HubbardChain {
    /// Lowest `m` eigenstates in the full occupation basis.
    pub fn full(params: HubbardParams, m: usize, krylov_dim: usize) -> Result<Self, HubbardError> {
        let basis = build_basis(&params)?;
        let ops = build_operators(&basis, &params);
        let (energies, states) = eigenstates_hubbard(&ops, m)?;
        Ok(Self { params, basis, representation: Representation::Full, ops, energies, states, krylov_dim })
    }

    /// Lowest `m` eigenstates in the momentum sector containing the global
    /// ground state (lowest sector index on ties).
    pub fn ground_sector(params: HubbardParams, m: usize, krylov_dim: usize) -> Result<Self, HubbardError> {
        let basis = build_basis(&params)?;
        let sectors: Vec<(MomentumSector, HubbardOperators, f64)> = (0..params.l)
            .into_par_iter()
            .filter_map(|q| MomentumSector::new(&basis, &params, q).ok())
            .map(|sec| {
                let ops = sec.operators(&basis, &params);
                let e0 = lowest_energy(&ops);
                (sec, ops, e0)
            })
            .collect();
        let best = sectors
            .iter()
            .enumerate()
            .fold(None::<(usize, f64)>, |acc, (idx, s)| match acc {
                Some((_, e)) if e <= s.2 + 1e-12 => acc,
                _ => Some((idx, s.2)),
            })
            .map(|x| x.0)
            .ok_or(HubbardError::EmptySector(0))?;
        let (sector, ops, _) = sectors.into_iter().nth(best).expect("index in range");
        let (energies, states) = eigenstates_hubbard(&ops, m.min(ops.dim))?;
        Ok(Self { params, basis, representation: Representation::Momentum(sector), ops, energies, states, krylov_dim })
    }

    /// Eigenstate `m` expressed in the full occupation basis.
    pub fn full_state(&self, m: usize) -> Vec<Complex64> {
        match &self.representation {
            Representation::Full => self.states[m].clone(),
            Representation::Momentum(sec) => sec.lift(&self.states[m]),
        }
    }
}

fn lowest_energy(ops: &HubbardOperators) -> f64 {
    let h: DMatrix<Complex64> = ops.hamiltonian(0.0).to_dense();
    hermitian_eigh(&h).0[0]
}

/// Krylov propagation of selected chain eigenstates.
pub struct HubbardPropagation<'a> {
    chain: &'a HubbardChain,
    pulse: PulseConfig,
    dt: f64,
    states: Vec<Vec<Complex64>>,
    scratch: Vec<Vec<Complex64>>,
}

impl Propagation for HubbardPropagation<'_> {
    fn len(&self) -> usize {
        self.states.len()
    }

    fn step(&mut self, t: f64) {
        let h = self.chain.ops.hamiltonian(vector_potential(&self.pulse, t + 0.5 * self.dt));
        let (dt, kdim) = (self.dt, self.chain.krylov_dim);
        self.states.par_iter_mut().for_each(|psi| {
            lanczos_expm(|x, y| h.matvec(x, y), psi, dt, kdim);
        });
    }

    fn emission_row(&mut self, t: f64, row: usize, out: &mut [Complex64]) {
        let j = self.chain.ops.current(vector_potential(&self.pulse, t));
        let jr = &mut self.scratch[0];
        j.matvec(&self.states[row], jr);
        // p_{row,n} = conj(⟨φ_n|J|φ_row⟩)
        for (o, s) in out.iter_mut().zip(&self.states) {
            *o = s.iter().zip(jr.iter()).map(|(a, b)| a.conj() * b).sum::<Complex64>().conj();
        }
    }

    fn emission_matrix(&mut self, t: f64, out: &mut [Complex64]) {
        let j = self.chain.ops.current(vector_potential(&self.pulse, t));
        let m = self.states.len();
        self.scratch.resize(m, vec![Complex64::new(0.0, 0.0); self.chain.ops.dim]);
        for (s, js) in self.states.iter().zip(self.scratch.iter_mut()) {
            j.matvec(s, js);
        }
        for a in 0..m {
            for b in 0..m {
                out[a * m + b] = self.states[a].iter().zip(&self.scratch[b]).map(|(x, y)| x.conj() * y).sum();
            }
        }
    }

    fn norms(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.iter().map(|z| z.norm_sqr()).sum()).collect()
    }
}

impl EmitterModel for HubbardChain {
    fn energies(&self) -> &[f64] {
        &self.energies
    }

    fn start(&self, pulse: &PulseConfig, dt: f64, selection: &[usize]) -> Result<Box<dyn Propagation + '_>, ModelError> {
        check_selection(selection, self.energies.len())?;
        Ok(Box::new(HubbardPropagation {
            chain: self,
            pulse: *pulse,
            dt,
            states: selection.iter().map(|&s| self.states[s].clone()).collect(),
            scratch: vec![vec![Complex64::new(0.0, 0.0); self.ops.dim]],
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_dimensions() {
        assert_eq!(build_basis(&HubbardParams::default()).unwrap().dim(), 4900);
        let p = HubbardParams { l: 2, n_up: 1, n_dn: 1, ..HubbardParams::default() };
        assert_eq!(build_basis(&p).unwrap().dim(), 4);
        let bad = HubbardParams { n_up: 9, n_dn: 0, ..HubbardParams::default() };
        assert!(build_basis(&bad).is_err());
    }

    #[test]
    fn basis_index_round_trip() {
        let p = HubbardParams { l: 5, n_up: 2, n_dn: 3, ..HubbardParams::default() };
        let b = build_basis(&p).unwrap();
        for idx in 0..b.dim() {
            let (u, d) = b.state(idx);
            assert_eq!(b.index(u, d), idx);
        }
        for w in 1..b.dim() {
            assert!(b.state(w - 1) < b.state(w));
        }
    }

    #[test]
    fn hop_signs() {
        // 0b0101: c†_1 c_2 has no particle strictly between → +1.
        assert_eq!(hop(0b0100, 1, 2), Some((0b0010, 1.0)));
        // c†_0 c_3 on 0b1010: one particle (site 1) between → −1.
        assert_eq!(hop(0b1010, 0, 3), Some((0b0011, -1.0)));
        assert_eq!(hop(0b0011, 0, 1), None);
    }

    #[test]
    fn translation_sign() {
        // Two particles, top site occupied: wrap costs one exchange.
        assert_eq!(translate(0b1001, 4, 2), (0b0011, -1.0));
        assert_eq!(translate(0b1000, 4, 1), (0b0001, 1.0));
        assert_eq!(translate(0b0011, 4, 2), (0b0110, 1.0));
    }
}
