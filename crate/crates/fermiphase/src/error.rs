//! Crate-wide error type.
//!
//! Variants are grouped by failure class rather than by module: `Config` for
//! structurally invalid requests, `Validation` for inputs that violate a
//! stated precondition (asymmetric kernels, non-Hermitian Hamiltonians),
//! `Structural` for algebraic mismatches (a Hamiltonian outside the supported
//! form), `Numerical` for runtime failures of an otherwise valid computation.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    /// Structurally invalid request: bad dimensions, out-of-range indices,
    /// incompatible objects.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input violates a stated precondition (e.g. kernel symmetry,
    /// Hermiticity) beyond the allowed tolerance.
    #[error("validation error: {0}")]
    Validation(String),

    /// An algebraic identity that defines the method failed to hold: the
    /// input is outside the supported structural class.
    #[error("structural error: {0}")]
    Structural(String),

    /// A numerical routine failed to meet its contract (factorization
    /// residual, eigensolver convergence).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Too many trajectories diverged; results would be biased.
    #[error("divergence ceiling exceeded: {excluded} of {total} trajectories diverged (ceiling {ceiling})")]
    DivergenceCeiling {
        excluded: usize,
        total: usize,
        ceiling: f64,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
