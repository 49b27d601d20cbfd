//! Short-iteration Lanczos approximation of exp(−i·dt·H)·ψ.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Outcome of one Krylov step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovInfo {
    /// Dimension of the subspace actually built (smaller than requested on
    /// breakdown, in which case the step is exact).
    pub dim: usize,
    pub breakdown: bool,
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// exp(−i·dt·T)·e₁ for a real symmetric tridiagonal T.
pub(crate) fn small_expm_e1(alpha: &[f64], beta: &[f64], dt: f64) -> Vec<Complex64> {
    let k = alpha.len();
    let t = DMatrix::from_fn(k, k, |r, c| {
        if r == c {
            alpha[r]
        } else if r + 1 == c {
            beta[r]
        } else if c + 1 == r {
            beta[c]
        } else {
            0.0
        }
    });
    let eig = t.symmetric_eigen();
    let v = &eig.eigenvectors;
    let coeff = DVector::from_fn(k, |j, _| Complex64::from_polar(v[(0, j)], -eig.eigenvalues[j] * dt));
    (0..k).map(|r| (0..k).map(|j| coeff[j] * v[(r, j)]).sum()).collect()
}

/// Replace `psi` by exp(−i·dt·H)·psi using a Krylov subspace of at most
/// `kdim` vectors. `apply(x, y)` must compute y = H·x for Hermitian H.
pub fn lanczos_expm<F>(mut apply: F, psi: &mut [Complex64], dt: f64, kdim: usize) -> KrylovInfo
where
    F: FnMut(&[Complex64], &mut [Complex64]),
{
    assert!(kdim >= 2, "Krylov dimension must be at least 2");
    let n = psi.len();
    let beta0 = norm(psi);
    if beta0 == 0.0 {
        return KrylovInfo { dim: 0, breakdown: true };
    }
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(kdim);
    basis.push(psi.iter().map(|x| x / beta0).collect());
    let mut alpha = Vec::with_capacity(kdim);
    let mut beta = Vec::with_capacity(kdim);
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    let mut breakdown = false;
    let mut scale = 0.0f64;
    for j in 0..kdim {
        apply(&basis[j], &mut w);
        let a = inner(&basis[j], &w).re;
        alpha.push(a);
        scale = scale.max(a.abs()).max(norm(&w));
        for (wi, vi) in w.iter_mut().zip(&basis[j]) {
            *wi -= vi * a;
        }
        if j > 0 {
            let b = beta[j - 1];
            for (wi, vi) in w.iter_mut().zip(&basis[j - 1]) {
                *wi -= vi * b;
            }
        }
        // Full reorthogonalization; cheap for the short recurrences used here.
        for v in &basis {
            let p = inner(v, &w);
            for (wi, vi) in w.iter_mut().zip(v) {
                *wi -= vi * p;
            }
        }
        if j + 1 == kdim {
            break;
        }
        let b = norm(&w);
        if b <= 1e-13 * scale.max(f64::MIN_POSITIVE) {
            breakdown = true;
            break;
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    let k = alpha.len();
    let coeff = small_expm_e1(&alpha, &beta[..k - 1], dt);
    psi.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
    for (c, v) in coeff.iter().zip(&basis) {
        let c = c * beta0;
        for (x, y) in psi.iter_mut().zip(v) {
            *x += c * y;
        }
    }
    KrylovInfo { dim: k, breakdown }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense::hermitian_expm;

    #[test]
    fn krylov_matches_dense_expm_for_small_step() {
        let n = 30;
        let h = DMatrix::from_fn(n, n, |r, c| {
            let x = ((r * 7 + c * 3) % 11) as f64 / 11.0;
            let y = ((r * 5 + c * 13) % 7) as f64 / 7.0;
            Complex64::new(x + ((c * 7 + r * 3) % 11) as f64 / 11.0, y - ((c * 5 + r * 13) % 7) as f64 / 7.0)
        });
        let h = (&h + h.adjoint()) * Complex64::new(0.5, 0.0);
        let psi0: Vec<Complex64> = (0..n).map(|k| Complex64::new((k as f64).sin(), (k as f64 * 0.3).cos())).collect();
        let dt = 0.02;
        let exact = hermitian_expm(&h, dt) * DVector::from_vec(psi0.clone());
        let mut psi = psi0;
        lanczos_expm(|x, y| {
            let v = &h * DVector::from_column_slice(x);
            y.copy_from_slice(v.as_slice());
        }, &mut psi, dt, 8);
        let err: f64 = psi.iter().zip(exact.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 1e-10, "err={err}");
    }

    #[test]
    fn eigenvector_breaks_down_exactly() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(-2.0, 0.0)]));
        let mut psi = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        let info = lanczos_expm(|x, y| {
            let v = &h * DVector::from_column_slice(x);
            y.copy_from_slice(v.as_slice());
        }, &mut psi, 3.0, 6);
        assert!(info.breakdown);
        assert!((psi[1] - Complex64::from_polar(1.0, 6.0)).norm() < 1e-14);
    }
}
