//! Lowest eigenpairs of a real symmetric tridiagonal matrix by Sturm
//! bisection and inverse iteration.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TridiagError {
    #[error("requested {requested} eigenpairs of a {n}x{n} matrix")]
    TooMany { requested: usize, n: usize },
    #[error("eigenpairs did not converge; residual norms {residuals:?}")]
    NotConverged { residuals: Vec<(usize, f64)> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    /// off[j] couples rows j and j+1.
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len(), "off-diagonal must have n-1 entries");
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let n = self.len();
        for j in 0..n {
            let mut v = self.diag[j] * x[j];
            if j > 0 {
                v += self.off[j - 1] * x[j - 1];
            }
            if j + 1 < n {
                v += self.off[j] * x[j + 1];
            }
            y[j] = v;
        }
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for j in 0..n {
            let r = if j > 0 { self.off[j - 1].abs() } else { 0.0 } + if j + 1 < n { self.off[j].abs() } else { 0.0 };
            lo = lo.min(self.diag[j] - r);
            hi = hi.max(self.diag[j] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for j in 1..self.len() {
            let qp = if q.abs() < tiny { tiny.copysign(q) } else { q };
            q = self.diag[j] - x - self.off[j - 1] * self.off[j - 1] / qp;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// k-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        let scale = lo.abs().max(hi.abs()).max(1e-300);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * scale {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Solve (T − λI)x = b in place using Gaussian elimination with partial
    /// pivoting.
    fn shifted_solve(&self, lambda: f64, b: &mut [f64]) {
        let n = self.len();
        let eps = f64::EPSILON * self.gershgorin().1.abs().max(1.0);
        // Row j of the factorization holds up to three entries after pivoting.
        let mut d: Vec<f64> = self.diag.iter().map(|v| v - lambda).collect();
        let mut du: Vec<f64> = self.off.clone();
        let mut dl: Vec<f64> = self.off.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swap = vec![false; n.saturating_sub(1)];
        for j in 0..n - 1 {
            if d[j].abs() >= dl[j].abs() {
                if d[j] == 0.0 {
                    d[j] = eps;
                }
                let f = dl[j] / d[j];
                dl[j] = f;
                d[j + 1] -= f * du[j];
            } else {
                swap[j] = true;
                let f = d[j] / dl[j];
                d[j] = dl[j];
                dl[j] = f;
                let tmp = du[j];
                du[j] = d[j + 1];
                d[j + 1] = tmp - f * d[j + 1];
                if j + 2 < n {
                    du2[j] = du[j + 1];
                    du[j + 1] *= -f;
                }
            }
        }
        if d[n - 1] == 0.0 {
            d[n - 1] = eps;
        }
        for j in 0..n - 1 {
            if swap[j] {
                b.swap(j, j + 1);
            }
            b[j + 1] -= dl[j] * b[j];
        }
        b[n - 1] /= d[n - 1];
        if n >= 2 {
            b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
        }
        for j in (0..n.saturating_sub(2)).rev() {
            b[j] = (b[j] - du[j] * b[j + 1] - du2[j] * b[j + 2]) / d[j];
        }
    }

    /// The `m` lowest eigenpairs, ascending, with eigenvectors of unit
    /// Euclidean norm, mutually orthonormalized.
    pub fn lowest_eigenpairs(&self, m: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>), TridiagError> {
        let n = self.len();
        if m > n {
            return Err(TridiagError::TooMany { requested: m, n });
        }
        let values: Vec<f64> = (0..m).map(|k| self.eigenvalue(k)).collect();
        let mut vectors = Vec::with_capacity(m);
        for &lambda in &values {
            // Deterministic, generic starting vector.
            let mut x: Vec<f64> = (0..n).map(|j| 1.0 + 0.5 * ((j as f64) * 0.618_033_988_749_895).fract()).collect();
            for _ in 0..3 {
                self.shifted_solve(lambda, &mut x);
                normalize(&mut x);
            }
            vectors.push(x);
        }
        // Two passes of modified Gram-Schmidt for clusters of close eigenvalues.
        for _ in 0..2 {
            for a in 0..m {
                let (done, rest) = vectors.split_at_mut(a);
                let va = &mut rest[0];
                for vb in done.iter() {
                    let p = dot(vb, va);
                    for (x, y) in va.iter_mut().zip(vb) {
                        *x -= p * y;
                    }
                }
                normalize(va);
            }
        }
        let mut y = vec![0.0; n];
        let scale = self.gershgorin().0.abs().max(self.gershgorin().1.abs());
        let mut bad = Vec::new();
        for (k, v) in vectors.iter().enumerate() {
            self.matvec(v, &mut y);
            let r = y.iter().zip(v).map(|(a, b)| (a - values[k] * b).powi(2)).sum::<f64>().sqrt();
            if !(r <= 1e-8 * scale.max(1.0)) {
                bad.push((k, r));
            }
        }
        if !bad.is_empty() {
            return Err(TridiagError::NotConverged { residuals: bad });
        }
        Ok((values, vectors))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(x: &mut [f64]) {
    let s = dot(x, x).sqrt();
    x.iter_mut().for_each(|v| *v /= s);
}
