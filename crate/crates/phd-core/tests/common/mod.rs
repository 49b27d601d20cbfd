#![allow(dead_code)]

use num_complex::Complex64;
use phd_core::dipole::{TableMode, TransitionDipoleTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Full table with random Hermitian p(t_k) on a uniform grid.
pub fn random_table(m: usize, k: usize, dt: f64, initial: usize, seed: u64) -> TransitionDipoleTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = vec![c(0.0, 0.0); m * m * k];
    for t in 0..k {
        for a in 0..m {
            data[t * m * m + a * m + a] = c(rng.random_range(-1.0..1.0), 0.0);
            for b in a + 1..m {
                let z = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                data[t * m * m + a * m + b] = z;
                data[t * m * m + b * m + a] = z.conj();
            }
        }
    }
    let energies = (0..m).map(|j| -1.0 + 0.3 * j as f64).collect();
    let times = (0..k).map(|j| j as f64 * dt).collect();
    TransitionDipoleTable::from_parts(TableMode::Full, energies, initial, times, data).unwrap()
}

/// Copy of a full table with every entry transformed by `f(m, n, k, p)`.
pub fn map_table(t: &TransitionDipoleTable, f: impl Fn(usize, usize, usize, Complex64) -> Complex64) -> TransitionDipoleTable {
    let m = t.m();
    let mut data = Vec::with_capacity(m * m * t.k());
    for k in 0..t.k() {
        for a in 0..m {
            for b in 0..m {
                data.push(f(a, b, k, t.get(a, b, k)));
            }
        }
    }
    TransitionDipoleTable::from_parts(TableMode::Full, t.energies.clone(), t.initial, t.times.clone(), data).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

pub fn crel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
}
