//! Dense linear algebra kernels sized for this crate's needs.
//!
//! Everything here operates on matrices of dimension at most a few hundred
//! (Fock spaces up to 2⁸, discretized one-body operators up to 64 points per
//! component, normal-equation systems of order ~10²), so cyclic Jacobi
//! iteration is accurate and fast enough, and avoids pulling in a LAPACK
//! binding.

pub mod fourier;
pub mod jacobi;
pub mod takagi;

pub use jacobi::{eigh_complex, eigh_real, solve_hermitian_lstsq};
pub use takagi::takagi_factor;
