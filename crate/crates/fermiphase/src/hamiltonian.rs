//! Mode-operator form of the model Hamiltonians, shared by the symbolic
//! phase-space construction and the exact Fock-space reference.
//!
//! A component/grid pair (α, j) is flattened to the composite mode
//! p = α·M + j. The Hamiltonian is kept as a one-body matrix h_{pr}
//! (coefficients of ĉ†_p ĉ_r) plus a list of quartic terms
//! w·ĉ†_p ĉ†_q ĉ_s ĉ_r in the fixed operator order written here.

use ndarray::Array2;

use crate::error::Result;
use crate::grid::Grid;
use crate::linalg::fourier;
use crate::model::{MultiComponentModel, Potential, TwoComponentModel};
use crate::C64;

/// One quartic interaction term w·ĉ†_{create.0} ĉ†_{create.1}
/// ĉ_{annihilate.0} ĉ_{annihilate.1}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticTerm {
    pub create: (usize, usize),
    pub annihilate: (usize, usize),
    pub coeff: C64,
}

/// Hamiltonian in mode-operator form.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeHamiltonian {
    pub n_modes: usize,
    pub hbar: f64,
    /// Coefficients of ĉ†_p ĉ_r.
    pub one_body: Array2<C64>,
    pub quartic: Vec<QuarticTerm>,
}

/// Composite mode index of component α at grid point j.
pub fn composite_mode(grid: &Grid, component: usize, point: usize) -> usize {
    component * grid.n_points() + point
}

/// Periodic second-difference kinetic operator −ħ²/(2m)·∇²_disc as a dense
/// matrix. Neighbor contributions accumulate, so on very small grids the
/// wrap-around doubles the off-diagonal rather than widening the stencil.
pub fn kinetic_stencil(grid: &Grid, hbar: f64, mass: f64) -> Array2<f64> {
    let m = grid.n_points();
    let t = hbar * hbar / (2.0 * mass * grid.dx() * grid.dx());
    let mut h = Array2::zeros((m, m));
    for j in 0..m {
        h[[j, j]] += 2.0 * t;
        h[[j, (j + 1) % m]] += -t;
        h[[j, (j + m - 1) % m]] += -t;
    }
    h
}

/// Kinetic operator with the exact periodic dispersion ħ²k²/(2m): the grid
/// representation of F† diag(ħ²k²/2m) F, which is real symmetric because
/// the ±k modes pair up.
pub fn kinetic_fourier(grid: &Grid, hbar: f64, mass: f64) -> Array2<f64> {
    let m = grid.n_points();
    let ks = fourier::wavenumbers(m, grid.dx());
    let mut h = Array2::zeros((m, m));
    for nu in 0..m {
        let chi = fourier::plane_wave(m, nu as i64);
        let e = hbar * hbar * ks[nu] * ks[nu] / (2.0 * mass);
        for j in 0..m {
            for l in 0..m {
                h[[j, l]] += e * (chi[j] * chi[l].conj()).re;
            }
        }
    }
    h
}

/// Which kinetic-energy representation a one-body operator uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dispersion {
    /// Nearest-neighbor second difference.
    Stencil,
    /// Exact periodic plane-wave dispersion.
    Fourier,
}

/// One-component one-body operator: kinetic term plus sampled potential.
pub fn one_body_matrix(
    grid: &Grid,
    hbar: f64,
    mass: f64,
    potential: &Potential,
    dispersion: Dispersion,
) -> Result<Array2<f64>> {
    let mut h = match dispersion {
        Dispersion::Stencil => kinetic_stencil(grid, hbar, mass),
        Dispersion::Fourier => kinetic_fourier(grid, hbar, mass),
    };
    for (j, v) in potential.sample(grid)?.into_iter().enumerate() {
        h[[j, j]] += v;
    }
    Ok(h)
}

/// Block-diagonal one-body operator over components, on composite modes.
fn block_one_body(
    grid: &Grid,
    hbar: f64,
    mass: f64,
    potentials: &[Potential],
    dispersion: Dispersion,
) -> Result<Array2<C64>> {
    let m = grid.n_points();
    let n_modes = potentials.len() * m;
    let mut h = Array2::zeros((n_modes, n_modes));
    for (alpha, pot) in potentials.iter().enumerate() {
        let block = one_body_matrix(grid, hbar, mass, pot, dispersion)?;
        for j in 0..m {
            for l in 0..m {
                h[[alpha * m + j, alpha * m + l]] = C64::new(block[[j, l]], 0.0);
            }
        }
    }
    Ok(h)
}

impl ModeHamiltonian {
    /// Mode form of the spin-½ contact gas: stencil kinetic blocks plus an
    /// on-site interspecies interaction g/ΔV·n̂_{↑j} n̂_{↓j}.
    pub fn from_two_component(model: &TwoComponentModel) -> Result<Self> {
        model.validate()?;
        let grid = &model.grid;
        let one_body = block_one_body(
            grid,
            model.hbar,
            model.mass,
            &model.potentials,
            Dispersion::Stencil,
        )?;
        let u0 = model.on_site_coupling();
        let mut quartic = Vec::new();
        for j in 0..grid.n_points() {
            let up = composite_mode(grid, 0, j);
            let down = composite_mode(grid, 1, j);
            // n̂_↑ n̂_↓ = ĉ†_↑ ĉ†_↓ ĉ_↓ ĉ_↑ for distinct modes.
            quartic.push(QuarticTerm {
                create: (up, down),
                annihilate: (down, up),
                coeff: C64::new(u0, 0.0),
            });
        }
        Ok(ModeHamiltonian {
            n_modes: 2 * grid.n_points(),
            hbar: model.hbar,
            one_body,
            quartic,
        })
    }

    /// Mode form of the general multi-component model with its two-body
    /// kernel expanded term by term.
    pub fn from_multi_component(model: &MultiComponentModel) -> Result<Self> {
        model.validate()?;
        let grid = &model.grid;
        let m = grid.n_points();
        let nc = model.n_components;
        let one_body = block_one_body(
            grid,
            model.hbar,
            model.mass,
            &model.potentials,
            Dispersion::Stencil,
        )?;
        let mut quartic = Vec::new();
        for a in 0..nc {
            for b in 0..nc {
                for c in 0..nc {
                    for d in 0..nc {
                        for j in 0..m {
                            for k in 0..m {
                                let v = model.kernel.value(a, b, c, d, j, k);
                                if v == 0.0 {
                                    continue;
                                }
                                let p = composite_mode(grid, a, j);
                                let q = composite_mode(grid, b, k);
                                let s = composite_mode(grid, d, k);
                                let r = composite_mode(grid, c, j);
                                if p == q || s == r {
                                    continue;
                                }
                                quartic.push(QuarticTerm {
                                    create: (p, q),
                                    annihilate: (s, r),
                                    coeff: C64::new(0.5 * v, 0.0),
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(ModeHamiltonian {
            n_modes: nc * m,
            hbar: model.hbar,
            one_body,
            quartic,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InteractionKernel;

    #[test]
    fn stencil_entries() {
        let grid = Grid::new(4, 0.5).unwrap();
        let h = kinetic_stencil(&grid, 1.0, 1.0);
        let t = 1.0 / (2.0 * 0.25);
        assert!((h[[0, 0]] - 2.0 * t).abs() < 1e-15);
        assert!((h[[0, 1]] + t).abs() < 1e-15);
        assert!((h[[0, 3]] + t).abs() < 1e-15);
        assert_eq!(h[[0, 2]], 0.0);
    }

    #[test]
    fn two_point_stencil_accumulates_wraparound() {
        let grid = Grid::new(2, 1.0).unwrap();
        let h = kinetic_stencil(&grid, 1.0, 1.0);
        // Both neighbors of point 0 are point 1.
        assert!((h[[0, 0]] - 1.0).abs() < 1e-15);
        assert!((h[[0, 1]] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_point_has_no_kinetic_energy() {
        let grid = Grid::new(1, 1.0).unwrap();
        let h = kinetic_stencil(&grid, 1.0, 1.0);
        assert_eq!(h[[0, 0]], 0.0);
    }

    #[test]
    fn fourier_kinetic_eigenvalues_are_exact_dispersion() {
        let grid = Grid::new(8, 0.7).unwrap();
        let h = kinetic_fourier(&grid, 1.0, 2.0);
        // Symmetric and real by construction; plane waves are eigenvectors.
        for nu in 0..8i64 {
            let k = fourier::wavenumber(8, 0.7, nu);
            let want = k * k / 4.0;
            let chi = fourier::plane_wave(8, nu);
            for j in 0..8 {
                let mut acc = C64::new(0.0, 0.0);
                for l in 0..8 {
                    acc += C64::new(h[[j, l]], 0.0) * chi[l];
                }
                assert!((acc - chi[j] * want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn two_component_mode_form() {
        let grid = Grid::new(2, 0.5).unwrap();
        let model = TwoComponentModel {
            grid,
            hbar: 1.0,
            mass: 1.0,
            coupling: 0.3,
            potentials: [
                Potential::Table(vec![0.1, 0.2]),
                Potential::Table(vec![0.3, 0.4]),
            ],
        };
        let h = ModeHamiltonian::from_two_component(&model).unwrap();
        assert_eq!(h.n_modes, 4);
        // Diagonal picks up stencil plus potential; components don't mix.
        let t = 1.0 / (2.0 * 0.25);
        assert!((h.one_body[[0, 0]].re - (2.0 * t + 0.1)).abs() < 1e-14);
        assert!((h.one_body[[3, 3]].re - (2.0 * t + 0.4)).abs() < 1e-14);
        assert_eq!(h.one_body[[0, 2]], C64::new(0.0, 0.0));
        // One on-site term per point at strength g/ΔV.
        assert_eq!(h.quartic.len(), 2);
        assert_eq!(h.quartic[0].create, (0, 2));
        assert_eq!(h.quartic[0].annihilate, (2, 0));
        assert!((h.quartic[0].coeff.re - 0.6).abs() < 1e-15);
    }

    #[test]
    fn multi_component_zero_range_terms() {
        let grid = Grid::new(2, 0.5).unwrap();
        let model = MultiComponentModel {
            grid,
            hbar: 1.0,
            mass: 1.0,
            n_components: 2,
            potentials: vec![Potential::Zero, Potential::Zero],
            kernel: InteractionKernel::zero_range(0.3, 2, &grid).unwrap(),
        };
        let h = ModeHamiltonian::from_multi_component(&model).unwrap();
        assert_eq!(h.n_modes, 4);
        // Exchange arrangement: two kernel entries per point, each with
        // half weight −g/(2ΔV).
        assert_eq!(h.quartic.len(), 4);
        for term in &h.quartic {
            assert!((term.coeff.re + 0.3).abs() < 1e-15);
            assert_eq!(term.coeff.im, 0.0);
        }
    }
}
