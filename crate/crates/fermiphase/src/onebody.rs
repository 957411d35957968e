//! Exact single-particle evolution under a one-body grid operator, used as
//! the reference for free-gas and lattice scheme checks.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::{eigh_complex, eigh_real};
use crate::C64;

/// Exact propagator e^{−i h t / ħ} of a real symmetric one-body operator.
pub fn propagator_real(h: &Array2<f64>, hbar: f64, t: f64) -> Result<Array2<C64>> {
    let (vals, vecs) = eigh_real(h)?;
    let n = vals.len();
    let mut out = Array2::from_elem((n, n), C64::new(0.0, 0.0));
    for e in 0..n {
        let phase = -vals[e] * t / hbar;
        let rot = C64::new(phase.cos(), phase.sin());
        for r in 0..n {
            for c in 0..n {
                out[[r, c]] += rot * vecs[[r, e]] * vecs[[c, e]];
            }
        }
    }
    Ok(out)
}

/// Exact propagator e^{−i h t / ħ} of a complex Hermitian one-body
/// operator.
pub fn propagator_hermitian(h: &Array2<C64>, hbar: f64, t: f64) -> Result<Array2<C64>> {
    let (vals, vecs) = eigh_complex(h)?;
    let n = vals.len();
    let mut out = Array2::from_elem((n, n), C64::new(0.0, 0.0));
    for e in 0..n {
        let phase = -vals[e] * t / hbar;
        let rot = C64::new(phase.cos(), phase.sin());
        for r in 0..n {
            for c in 0..n {
                out[[r, c]] += rot * vecs[[r, e]] * vecs[[c, e]].conj();
            }
        }
    }
    Ok(out)
}

/// Evolve a single-particle orbital exactly: φ(t) = e^{−i h t/ħ} φ(0).
pub fn evolve_orbital(
    h: &Array2<f64>,
    hbar: f64,
    t: f64,
    orbital: &[C64],
) -> Result<Vec<C64>> {
    let n = h.nrows();
    if orbital.len() != n {
        return Err(Error::config(format!(
            "orbital length {} does not match operator dimension {n}",
            orbital.len()
        )));
    }
    let u = propagator_real(h, hbar, t)?;
    let phi = Array1::from_iter(orbital.iter().copied());
    Ok(u.dot(&phi).to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::hamiltonian::{kinetic_fourier, kinetic_stencil};
    use crate::linalg::fourier;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn propagator_is_unitary() {
        let grid = Grid::new(8, 0.5).unwrap();
        let h = kinetic_stencil(&grid, 1.0, 1.0);
        let u = propagator_real(&h, 1.0, 0.37).unwrap();
        let uh = u.t().mapv(|v: C64| v.conj());
        let prod = uh.dot(&u);
        for r in 0..8 {
            for col in 0..8 {
                let want = if r == col { 1.0 } else { 0.0 };
                assert!((prod[[r, col]] - c(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn plane_wave_acquires_dispersion_phase() {
        let m = 8;
        let dx = 0.5;
        let grid = Grid::new(m, dx).unwrap();
        let mass = 2.0;
        let h = kinetic_fourier(&grid, 1.0, mass);
        let t = 0.9;
        let nu = 3i64;
        let chi = fourier::plane_wave(m, nu);
        let phi_t = evolve_orbital(&h, 1.0, t, &chi).unwrap();
        let k = fourier::wavenumber(m, dx, nu);
        let phase = -k * k / (2.0 * mass) * t;
        let rot = c(phase.cos(), phase.sin());
        for j in 0..m {
            assert!((phi_t[j] - chi[j] * rot).norm() < 1e-12);
        }
    }

    #[test]
    fn hermitian_propagator_matches_real_one() {
        let grid = Grid::new(6, 0.5).unwrap();
        let h = kinetic_stencil(&grid, 1.0, 1.5);
        let hc = h.mapv(|v| C64::new(v, 0.0));
        let a = propagator_real(&h, 2.0, 0.7).unwrap();
        let b = propagator_hermitian(&hc, 2.0, 0.7).unwrap();
        for r in 0..6 {
            for col in 0..6 {
                assert!((a[[r, col]] - b[[r, col]]).norm() < 1e-12);
            }
        }
    }
}
