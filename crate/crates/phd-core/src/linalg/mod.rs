//! Linear-algebra kernels: symmetric tridiagonal eigensolver, sparse
//! complex matrices, Krylov and dense matrix exponentials.

pub mod dense;
pub mod krylov;
pub mod sparse;
pub mod tridiag;
