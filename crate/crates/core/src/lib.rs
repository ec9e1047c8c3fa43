//! Lindbladian quantum tomography for weakly noisy few-qubit gates.
//!
//! The crate estimates the Hamiltonian vector and the Lindblad matrix of a
//! Markovian generator from measurement counts. It contains the Pauli
//! algebra, state and measurement sets, exact propagation, a first-order
//! linearization around a known target unitary, four estimators (full
//! maximum likelihood, two convex solvers for the linearized likelihood, and
//! an L1-sparse compressed-sensing solver), goodness-of-fit diagnostics, and
//! the benchmark harnesses used to compare them.

pub mod bench;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod expm;
pub mod hermitian;
pub mod lindblad;
pub mod linearize;
pub mod pauli;
pub mod quantum;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = nalgebra::Complex<f64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense real matrix.
pub type RMatrix = nalgebra::DMatrix<f64>;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
