//! Perturbative Heisenberg dynamics (PHD) for the quantum optics of
//! high-harmonic generation.
//!
//! The pipeline has two stages. Field-free eigenstates of an emitter are
//! propagated under the classical laser field and reduced to a table of
//! time-dependent transition matrix elements of the emission operator
//! ([`dipole::TransitionDipoleTable`]). Every photonic observable (spectrum,
//! quadrature squeezing, g²(0)) is then a closed-form functional of that
//! table, with the emitter count N entering only through polynomial
//! prefactors.

pub mod atom1d;
pub mod dipole;
pub mod hubbard;
pub mod linalg;
pub mod model;
pub mod nscaling;
pub mod observables;
pub mod quad;
pub mod toy;

pub use num_complex::Complex64;

/// Speed of light in atomic units.
pub const SPEED_OF_LIGHT: f64 = 137.036;
