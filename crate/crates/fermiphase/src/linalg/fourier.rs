//! Discrete plane-wave basis on a periodic grid.
//!
//! Conventions: M points at spacing Δx, mode index ν labels the wavenumber
//! k_ν = 2πν/(MΔx) with ν folded into (−M/2, M/2]; the normalized plane wave
//! is χ_ν(j) = e^{i k_ν x_j} / √M. Grids here are small (M ≤ 64), so dense
//! transform matrices are built directly rather than through an FFT.

use ndarray::Array2;

use crate::C64;

/// Fold an arbitrary integer mode index into the canonical window
/// (−M/2, M/2].
pub fn fold_mode(m: usize, nu: i64) -> i64 {
    let m_i = m as i64;
    let mut r = nu.rem_euclid(m_i);
    if 2 * r > m_i {
        r -= m_i;
    }
    r
}

/// Wavenumber of mode ν on an M-point grid with spacing `dx`.
pub fn wavenumber(m: usize, dx: f64, nu: i64) -> f64 {
    2.0 * std::f64::consts::PI * (fold_mode(m, nu) as f64) / (m as f64 * dx)
}

/// Wavenumbers for storage order ν = 0, 1, …, M−1 (each folded).
pub fn wavenumbers(m: usize, dx: f64) -> Vec<f64> {
    (0..m as i64).map(|nu| wavenumber(m, dx, nu)).collect()
}

/// Normalized plane wave χ_ν(j) = e^{i k_ν x_j} / √M as a length-M vector.
pub fn plane_wave(m: usize, nu: i64) -> Vec<C64> {
    let norm = 1.0 / (m as f64).sqrt();
    let base = 2.0 * std::f64::consts::PI * (nu.rem_euclid(m as i64) as f64) / (m as f64);
    (0..m)
        .map(|j| {
            let phase = base * j as f64;
            C64::new(phase.cos(), phase.sin()) * norm
        })
        .collect()
}

/// Unitary forward transform: row ν equals χ_ν†, so (F ψ)_ν is the amplitude
/// of ψ on plane wave ν.
pub fn dft_unitary(m: usize) -> Array2<C64> {
    let mut f = Array2::zeros((m, m));
    for nu in 0..m {
        let chi = plane_wave(m, nu as i64);
        for j in 0..m {
            f[[nu, j]] = chi[j].conj();
        }
    }
    f
}
