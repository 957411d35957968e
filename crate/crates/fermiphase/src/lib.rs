//! Grassmann phase-space simulation of interacting Fermi gases.
//!
//! The density operator of a fermionic many-body system is represented by a
//! distribution over anticommuting phase-space variables whose drift is
//! *linear* in those variables. That linearity is the whole trick: a
//! trajectory never has to store a Grassmann number at runtime. Each
//! stochastic trajectory carries two complex matrices (one per field sector)
//! that left-multiply the initial phase variables, and physical quantities
//! are recovered by contracting ensemble-averaged products of those matrices
//! against the initial moment tensor.
//!
//! The crate is organised in layers:
//!
//! * [`algebra`] / [`superop`] / [`ffpe`] — an exact finite Grassmann algebra
//!   with Berezin calculus, the operator-correspondence superoperators, and
//!   symbolic extraction of drift/diffusion coefficients from a mode
//!   Hamiltonian. This is the algebraic reference the numerical coefficients
//!   are checked against.
//! * [`linalg`] — self-contained dense routines: cyclic Jacobi eigensolvers
//!   (real symmetric and complex Hermitian), Takagi factorization of complex
//!   symmetric matrices, discrete Fourier helpers.
//! * [`grid`] / [`model`] / [`hamiltonian`] / [`discretize`] — physical model
//!   descriptions on a periodic grid and their discretization into the drift
//!   operator `L` and noise coefficient matrices `K_a` that define a
//!   trajectory step.
//! * [`wiener`] / [`propagate`] / [`bloch`] — counter-addressed Gaussian
//!   increments, the per-step transfer matrix Θ = I + L·dt + Σ_a K_a·δw_a,
//!   split-step and band-basis variants, and per-trajectory propagators.
//! * [`moments`] / [`observables`] / [`ensemble`] — canonical moment tensors,
//!   population/coherence extraction, and deterministic parallel ensemble
//!   averaging with standard errors.
//! * [`oracle`] / [`onebody`] — exact Fock-space reference (Jordan-Wigner
//!   operators, unitary evolution, exact coherences) for ≤ 8 modes, plus
//!   exact single-particle references for scheme-accuracy tests.

pub mod algebra;
pub mod bloch;
pub mod discretize;
pub mod ensemble;
pub mod error;
pub mod ffpe;
pub mod grid;
pub mod hamiltonian;
pub mod linalg;
pub mod model;
pub mod moments;
pub mod observables;
pub mod onebody;
pub mod oracle;
pub mod propagate;
pub mod superop;
pub mod wiener;

pub use error::{Error, Result};

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;
