//! Compressed-sparse-row complex matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<Complex64>,
}

impl CsrMatrix {
    /// Build from (row, col, value) triplets; duplicates are summed and
    /// explicit zeros dropped.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, Complex64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            assert!(r < n && c < n, "triplet ({r},{c}) outside {n}x{n}");
            if rows.last() == Some(&r) && col_idx.last() == Some(&c) {
                *values.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                col_idx.push(c);
                values.push(v);
            }
        }
        let keep: Vec<bool> = values.iter().map(|v| *v != Complex64::new(0.0, 0.0)).collect();
        let mut k = 0;
        let mut ci = Vec::with_capacity(col_idx.len());
        let mut vs = Vec::with_capacity(values.len());
        for (idx, &r) in rows.iter().enumerate() {
            if keep[idx] {
                row_ptr[r + 1] += 1;
                ci.push(col_idx[idx]);
                vs.push(values[idx]);
                k += 1;
            }
        }
        debug_assert_eq!(k, ci.len());
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { n, row_ptr, col_idx: ci, values: vs }
    }

    pub fn zeros(n: usize) -> Self {
        Self { n, row_ptr: vec![0; n + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    /// y = A·x
    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        for r in 0..self.n {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
    }

    pub fn adjoint(&self) -> Self {
        let trip = (0..self.n).flat_map(|r| self.row(r).map(move |(c, v)| (c, r, v.conj()))).collect();
        Self::from_triplets(self.n, trip)
    }

    /// Linear combination Σ c_k A_k of matrices of equal size.
    pub fn combine(terms: &[(Complex64, &CsrMatrix)]) -> Self {
        let n = terms.first().map_or(0, |t| t.1.n);
        let trip = terms
            .iter()
            .flat_map(|(c, m)| (0..m.n).flat_map(move |r| m.row(r).map(move |(col, v)| (r, col, c * v))))
            .collect();
        Self::from_triplets(n, trip)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                d[(r, c)] += v;
            }
        }
        d
    }

    /// max |A − A†| over all entries.
    pub fn hermiticity_residual(&self) -> f64 {
        let d = self.to_dense();
        let mut worst = 0.0f64;
        for r in 0..self.n {
            for c in 0..self.n {
                worst = worst.max((d[(r, c)] - d[(c, r)].conj()).norm());
            }
        }
        worst
    }
}
