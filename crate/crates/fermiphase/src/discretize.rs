//! Grid discretization of the field models into stochastic form.
//!
//! The field is replaced by one composite mode per (component, grid point),
//! and the model becomes a linear trajectory equation
//!
//! ```text
//! dψ = −(i/ħ) h ψ dt + Σ_a K_a ψ δw_a
//! ```
//!
//! in the ψ sector, with the conjugate sector driven by the complex
//! conjugate drift and channels i·K_a on independent noise increments. The
//! noise channels are point-local matrices in component space; for the
//! spin-½ contact gas they have a closed form, while the general
//! multi-component kernel goes through a Takagi factorization of its
//! complex symmetric coupling matrix.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::ffpe::PairKernel;
use crate::grid::Grid;
use crate::hamiltonian::{one_body_matrix, Dispersion};
use crate::linalg::jacobi::MAX_DIM;
use crate::linalg::takagi_factor;
use crate::model::{MultiComponentModel, Potential, TwoComponentModel};
use crate::C64;

/// Discretized model in stochastic trajectory form.
#[derive(Debug, Clone)]
pub struct StochasticModel {
    pub grid: Grid,
    pub n_components: usize,
    pub hbar: f64,
    pub mass: f64,
    /// External potential per component, as configured.
    pub potential_kinds: Vec<Potential>,
    /// Sampled external potential per component.
    pub potentials: Vec<Vec<f64>>,
    /// One-body operator h on composite modes (second-difference kinetic
    /// term plus potential), block-diagonal over components.
    pub one_body: Array2<f64>,
    /// Noise channel matrices K_a for the ψ sector.
    pub channels: Vec<Array2<C64>>,
}

impl StochasticModel {
    pub fn n_modes(&self) -> usize {
        self.n_components * self.grid.n_points()
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    /// Deterministic drift −(i/ħ) h for the ψ sector.
    pub fn drift_psi(&self) -> Array2<C64> {
        let scale = C64::new(0.0, -1.0 / self.hbar);
        self.one_body.mapv(|v| scale * v)
    }

    /// Deterministic drift for the ψ⁺ sector: the complex conjugate
    /// +(i/ħ) h (h is real symmetric).
    pub fn drift_psi_plus(&self) -> Array2<C64> {
        let scale = C64::new(0.0, 1.0 / self.hbar);
        self.one_body.mapv(|v| scale * v)
    }

    /// Noise channels for the ψ⁺ sector, i·K_a, driven by increments
    /// independent of the ψ-sector ones.
    pub fn channels_psi_plus(&self) -> Vec<Array2<C64>> {
        let i = C64::new(0.0, 1.0);
        self.channels.iter().map(|k| k.mapv(|v| i * v)).collect()
    }

    /// Pairwise covariance of the ψ-sector channels; comparing it against
    /// the symbolically extracted diffusion kernel validates the
    /// discretization.
    pub fn diffusion_kernel(&self) -> Result<PairKernel> {
        PairKernel::from_channels(self.n_modes(), &self.channels)
    }
}

fn block_one_body(
    grid: &Grid,
    hbar: f64,
    mass: f64,
    potentials: &[Potential],
) -> Result<(Array2<f64>, Vec<Vec<f64>>)> {
    let m = grid.n_points();
    let n_modes = potentials.len() * m;
    let mut h = Array2::zeros((n_modes, n_modes));
    let mut samples = Vec::with_capacity(potentials.len());
    for (alpha, pot) in potentials.iter().enumerate() {
        let block = one_body_matrix(grid, hbar, mass, pot, Dispersion::Stencil)?;
        for j in 0..m {
            for l in 0..m {
                h[[alpha * m + j, alpha * m + l]] = block[[j, l]];
            }
        }
        samples.push(pot.sample(grid)?);
    }
    Ok((h, samples))
}

/// Discretize the spin-½ contact gas.
///
/// The interaction becomes two noise channels per grid point with the
/// closed-form amplitude c = √(i g / (2ħΔV)): one coupling the components
/// symmetrically, one antisymmetrically with a quarter-turn phase, so that
/// Σ_a K_a K_aᵀ reproduces the on-site coupling matrix.
pub fn discretize_two_component(model: &TwoComponentModel) -> Result<StochasticModel> {
    model.validate()?;
    let grid = model.grid;
    let m = grid.n_points();
    let (one_body, potentials) =
        block_one_body(&grid, model.hbar, model.mass, &model.potentials)?;

    let n_modes = 2 * m;
    let mut channels = Vec::new();
    if model.coupling != 0.0 {
        let amp = C64::new(0.0, model.coupling / (2.0 * model.hbar * grid.volume())).sqrt();
        let i = C64::new(0.0, 1.0);
        for j in 0..m {
            let up = j;
            let down = m + j;
            let mut k1 = Array2::from_elem((n_modes, n_modes), C64::new(0.0, 0.0));
            k1[[up, down]] = amp;
            k1[[down, up]] = amp;
            let mut k2 = Array2::from_elem((n_modes, n_modes), C64::new(0.0, 0.0));
            k2[[up, down]] = i * amp;
            k2[[down, up]] = -i * amp;
            channels.push(k1);
            channels.push(k2);
        }
    }

    Ok(StochasticModel {
        grid,
        n_components: 2,
        hbar: model.hbar,
        mass: model.mass,
        potential_kinds: model.potentials.to_vec(),
        potentials,
        one_body,
        channels,
    })
}

/// Row index of the channel-coupling matrix for the slot (α, γ, j): the
/// amplitude with which a channel drives component α from component γ at
/// grid point j.
fn coupling_row(n_components: usize, m: usize, alpha: usize, gamma: usize, j: usize) -> usize {
    (alpha * n_components + gamma) * m + j
}

/// Discretize the general multi-component model.
///
/// The two-body kernel is packed into the complex symmetric coupling matrix
/// Q over (α, γ, j) slots, Q = −(i/ħ)·V, and Takagi-factored as Q = KKᵀ;
/// each factor column becomes one point-local noise channel. Nonlocal
/// kernels are handled the same way: the channels stay point-local, and
/// cross-point correlations enter through shared channels.
pub fn discretize_multi_component(model: &MultiComponentModel) -> Result<StochasticModel> {
    model.validate()?;
    let grid = model.grid;
    let m = grid.n_points();
    let nc = model.n_components;
    let (one_body, potentials) = block_one_body(&grid, model.hbar, model.mass, &model.potentials)?;

    let dim = nc * nc * m;
    if dim > MAX_DIM {
        return Err(Error::config(format!(
            "coupling matrix dimension {dim} exceeds factorization bound {MAX_DIM}"
        )));
    }
    let scale = C64::new(0.0, -1.0 / model.hbar);
    let mut q = Array2::from_elem((dim, dim), C64::new(0.0, 0.0));
    for alpha in 0..nc {
        for beta in 0..nc {
            for gamma in 0..nc {
                for delta in 0..nc {
                    for j in 0..m {
                        for k in 0..m {
                            let v = model.kernel.value(alpha, beta, gamma, delta, j, k);
                            if v == 0.0 {
                                continue;
                            }
                            let row = coupling_row(nc, m, alpha, gamma, j);
                            let col = coupling_row(nc, m, beta, delta, k);
                            q[[row, col]] = scale * v;
                        }
                    }
                }
            }
        }
    }

    let factor = takagi_factor(&q)?;
    let n_modes = nc * m;
    let mut channels = Vec::with_capacity(factor.ncols());
    for a in 0..factor.ncols() {
        let mut ch = Array2::from_elem((n_modes, n_modes), C64::new(0.0, 0.0));
        for alpha in 0..nc {
            for gamma in 0..nc {
                for j in 0..m {
                    let v = factor[[coupling_row(nc, m, alpha, gamma, j), a]];
                    if v != C64::new(0.0, 0.0) {
                        ch[[alpha * m + j, gamma * m + j]] = v;
                    }
                }
            }
        }
        channels.push(ch);
    }

    Ok(StochasticModel {
        grid,
        n_components: nc,
        hbar: model.hbar,
        mass: model.mass,
        potential_kinds: model.potentials.clone(),
        potentials,
        one_body,
        channels,
    })
}
