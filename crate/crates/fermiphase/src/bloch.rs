//! Band structure of the 1D optical lattice V(x) = V0 sin²(k_L x).
//!
//! For each quasimomentum k the one-body operator is truncated to the
//! plane waves e^{i(k + 2ν k_L)x}, |ν| ≤ cutoff, where it is a real
//! symmetric tridiagonal matrix: sin² contributes V0/2 on the diagonal and
//! −V0/4 one step off it. Eigenvalues give the band energies ω^{k,a},
//! eigenvectors the plane-wave composition of the Bloch states.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::eigh_real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeParams {
    pub hbar: f64,
    pub mass: f64,
    /// Lattice depth V0 ≥ 0.
    pub v0: f64,
    /// Lattice wavevector k_L; the potential period is π/k_L and the
    /// Brillouin zone (−k_L, k_L].
    pub k_lattice: f64,
}

impl LatticeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(Error::config(format!("hbar {} must be positive", self.hbar)));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::config(format!("mass {} must be positive", self.mass)));
        }
        if !(self.v0 >= 0.0 && self.v0.is_finite()) {
            return Err(Error::config(format!(
                "lattice depth {} must be non-negative",
                self.v0
            )));
        }
        if !(self.k_lattice > 0.0 && self.k_lattice.is_finite()) {
            return Err(Error::config(format!(
                "lattice wavevector {} must be positive",
                self.k_lattice
            )));
        }
        Ok(())
    }

    /// Recoil energy ħ²k_L²/2m, the natural depth and energy scale.
    pub fn recoil_energy(&self) -> f64 {
        self.hbar * self.hbar * self.k_lattice * self.k_lattice / (2.0 * self.mass)
    }
}

/// Band energies and Bloch vectors over a set of quasimomenta.
#[derive(Debug, Clone)]
pub struct BandStructure {
    pub quasimomenta: Vec<f64>,
    /// energies[[i, a]]: band a at quasimomentum i, ascending in a.
    pub energies: Array2<f64>,
    /// One (dim × bands) coefficient matrix per quasimomentum; row ν+cutoff
    /// is the amplitude on e^{i(k + 2ν k_L)x}, columns orthonormal.
    pub vectors: Vec<Array2<f64>>,
    pub cutoff: usize,
    /// Largest band-energy shift observed when enlarging the cutoff by 2.
    pub residual: f64,
    /// False when the kept bands have not converged in the cutoff.
    pub converged: bool,
}

fn band_matrix(params: &LatticeParams, k: f64, cutoff: usize) -> Array2<f64> {
    let dim = 2 * cutoff + 1;
    let mut h = Array2::zeros((dim, dim));
    for idx in 0..dim {
        let nu = idx as i64 - cutoff as i64;
        let kk = k + 2.0 * nu as f64 * params.k_lattice;
        h[[idx, idx]] = params.hbar * params.hbar * kk * kk / (2.0 * params.mass) + params.v0 / 2.0;
        if idx + 1 < dim {
            h[[idx, idx + 1]] = -params.v0 / 4.0;
            h[[idx + 1, idx]] = -params.v0 / 4.0;
        }
    }
    h
}

fn solve_k(
    params: &LatticeParams,
    k: f64,
    bands: usize,
    cutoff: usize,
) -> Result<(Vec<f64>, Array2<f64>)> {
    let h = band_matrix(params, k, cutoff);
    let (vals, vecs) = eigh_real(&h)?;
    let dim = 2 * cutoff + 1;
    let mut most = Array2::zeros((dim, bands));
    for a in 0..bands {
        for idx in 0..dim {
            most[[idx, a]] = vecs[[idx, a]];
        }
    }
    Ok((vals.iter().take(bands).copied().collect(), most))
}

/// Band structure of the lattice over the given quasimomenta.
///
/// The kept bands are checked for convergence in the plane-wave cutoff by
/// re-solving with cutoff + 2; a residual above 1e−8 of the recoil energy
/// (or of the largest band energy, whichever is bigger) clears the
/// `converged` flag instead of failing the run.
pub fn bloch_bands(
    params: &LatticeParams,
    quasimomenta: &[f64],
    bands: usize,
    cutoff: usize,
) -> Result<BandStructure> {
    params.validate()?;
    if bands == 0 {
        return Err(Error::config("at least one band is required"));
    }
    if cutoff < bands {
        return Err(Error::config(format!(
            "plane-wave cutoff {cutoff} must be at least the band count {bands}"
        )));
    }
    if quasimomenta.is_empty() {
        return Err(Error::config("at least one quasimomentum is required"));
    }
    for &k in quasimomenta {
        if !k.is_finite() {
            return Err(Error::config(format!("quasimomentum {k} must be finite")));
        }
    }

    let n_k = quasimomenta.len();
    let mut energies = Array2::zeros((n_k, bands));
    let mut vectors = Vec::with_capacity(n_k);
    let mut residual = 0.0f64;
    let mut scale = params.recoil_energy();
    for (i, &k) in quasimomenta.iter().enumerate() {
        let (vals, vecs) = solve_k(params, k, bands, cutoff)?;
        let (refined, _) = solve_k(params, k, bands, cutoff + 2)?;
        for a in 0..bands {
            energies[[i, a]] = vals[a];
            residual = residual.max((vals[a] - refined[a]).abs());
            scale = scale.max(vals[a].abs());
        }
        vectors.push(vecs);
    }
    Ok(BandStructure {
        quasimomenta: quasimomenta.to_vec(),
        energies,
        vectors,
        cutoff,
        residual,
        converged: residual <= 1e-8 * scale,
    })
}

/// Evenly spread quasimomenta covering the Brillouin zone (−k_L, k_L].
pub fn brillouin_zone(params: &LatticeParams, n_k: usize) -> Vec<f64> {
    let step = 2.0 * params.k_lattice / n_k.max(1) as f64;
    (0..n_k.max(1))
        .map(|i| -params.k_lattice + step * (i + 1) as f64)
        .collect()
}
