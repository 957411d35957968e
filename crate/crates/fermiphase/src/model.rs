//! Physical model descriptions: external potentials, the spin-½ contact-
//! interaction gas, and the general multi-component gas with a two-body
//! interaction kernel.
//!
//! Models here are continuum-level descriptions; `discretize` turns them
//! into drift matrices and noise channels on the grid, `hamiltonian` into
//! mode-operator form for the symbolic and exact references.

use ndarray::{Array6, ArrayView6};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// External one-body potential, shared across all schemes.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Zero,
    /// V(x) = ½·strength·(x − center)².
    Harmonic { strength: f64, center: f64 },
    /// V(x) = v0·sin²(k_lattice·x), the standard optical-lattice form.
    SinSq { v0: f64, k_lattice: f64 },
    /// Explicit per-grid-point values.
    Table(Vec<f64>),
}

impl Potential {
    /// Potential values on the grid points.
    pub fn sample(&self, grid: &Grid) -> Result<Vec<f64>> {
        match self {
            Potential::Zero => Ok(vec![0.0; grid.n_points()]),
            Potential::Harmonic { strength, center } => Ok(grid
                .positions()
                .iter()
                .map(|&x| 0.5 * strength * (x - center) * (x - center))
                .collect()),
            Potential::SinSq { v0, k_lattice } => Ok(grid
                .positions()
                .iter()
                .map(|&x| v0 * (k_lattice * x).sin().powi(2))
                .collect()),
            Potential::Table(values) => {
                if values.len() != grid.n_points() {
                    return Err(Error::config(format!(
                        "potential table has {} entries for a {}-point grid",
                        values.len(),
                        grid.n_points()
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::config("potential table contains non-finite values"));
                }
                Ok(values.clone())
            }
        }
    }
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if !value.is_finite() || value <= 0.0 {
        return Err(Error::config(format!("{name} must be positive, got {value}")));
    }
    Ok(())
}

/// Spin-½ gas with a zero-range interspecies contact interaction of
/// strength g: H_int = g ∫ ψ̂†_↑ψ̂†_↓ψ̂_↓ψ̂_↑ dx.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoComponentModel {
    pub grid: Grid,
    pub hbar: f64,
    pub mass: f64,
    /// Contact coupling g; on the grid this becomes an on-site interaction
    /// of strength g/ΔV between the two components.
    pub coupling: f64,
    /// External potential seen by each component (↑ then ↓).
    pub potentials: [Potential; 2],
}

impl TwoComponentModel {
    pub fn validate(&self) -> Result<()> {
        check_positive("hbar", self.hbar)?;
        check_positive("mass", self.mass)?;
        if !self.coupling.is_finite() {
            return Err(Error::config("coupling must be finite"));
        }
        for p in &self.potentials {
            p.sample(&self.grid)?;
        }
        Ok(())
    }

    /// On-site interaction energy between the components at one grid point.
    pub fn on_site_coupling(&self) -> f64 {
        self.coupling / self.grid.volume()
    }
}

/// Two-body interaction kernel for the multi-component gas.
///
/// `table[[a, b, c, d, j, k]]` is the grid-sampled kernel
/// V^{ab;cd}(x_j, x_k) entering
/// H_int = ½ Σ V^{ab;cd}(x_j, x_k) ĉ†_{a j} ĉ†_{b k} ĉ_{d k} ĉ_{c j},
/// with any contact delta already converted to δ_{jk}/ΔV.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionKernel {
    table: Array6<f64>,
}

/// Relative tolerance for the kernel's pair-exchange symmetry check.
pub const KERNEL_SYMMETRY_TOL: f64 = 1e-12;

impl InteractionKernel {
    /// Wrap an explicit kernel table, checking shape and the pair-exchange
    /// symmetry V^{ab;cd}(j,k) = V^{ba;dc}(k,j) that makes the interaction
    /// Hermitian and the derived diffusion matrix symmetric.
    pub fn new(table: Array6<f64>, n_components: usize, grid: &Grid) -> Result<Self> {
        let m = grid.n_points();
        let want = [n_components, n_components, n_components, n_components, m, m];
        if table.shape() != want {
            return Err(Error::config(format!(
                "kernel table shape {:?} does not match {:?}",
                table.shape(),
                want
            )));
        }
        let max = table.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
        if !max.is_finite() {
            return Err(Error::config("kernel table contains non-finite values"));
        }
        let mut worst = 0.0f64;
        for a in 0..n_components {
            for b in 0..n_components {
                for c in 0..n_components {
                    for d in 0..n_components {
                        for j in 0..m {
                            for k in 0..m {
                                let diff =
                                    (table[[a, b, c, d, j, k]] - table[[b, a, d, c, k, j]]).abs();
                                worst = worst.max(diff);
                            }
                        }
                    }
                }
            }
        }
        if worst > KERNEL_SYMMETRY_TOL * max.max(f64::MIN_POSITIVE) {
            return Err(Error::validation(format!(
                "kernel violates pair-exchange symmetry by {worst:.3e}"
            )));
        }
        Ok(InteractionKernel { table })
    }

    /// Zero-range interspecies kernel in exchange form:
    /// V^{ab;cd}(j,k) = −g·δ_{jk}/ΔV·δ_{ad}δ_{bc}(1 − δ_{ab}).
    ///
    /// Equivalent under operator reordering to the direct form from
    /// [`InteractionKernel::zero_range_direct`]; this arrangement keeps the
    /// derived noise channels local and strictly off-diagonal in the
    /// component indices.
    pub fn zero_range(g: f64, n_components: usize, grid: &Grid) -> Result<Self> {
        let m = grid.n_points();
        let dv = grid.volume();
        let mut table = Array6::zeros([n_components, n_components, n_components, n_components, m, m]);
        for a in 0..n_components {
            for b in 0..n_components {
                if a == b {
                    continue;
                }
                for j in 0..m {
                    table[[a, b, b, a, j, j]] = -g / dv;
                }
            }
        }
        InteractionKernel::new(table, n_components, grid)
    }

    /// Zero-range interspecies kernel in direct (density-density) form:
    /// V^{ab;cd}(j,k) = g·δ_{jk}/ΔV·δ_{ac}δ_{bd}(1 − δ_{ab}).
    pub fn zero_range_direct(g: f64, n_components: usize, grid: &Grid) -> Result<Self> {
        let m = grid.n_points();
        let dv = grid.volume();
        let mut table = Array6::zeros([n_components, n_components, n_components, n_components, m, m]);
        for a in 0..n_components {
            for b in 0..n_components {
                if a == b {
                    continue;
                }
                for j in 0..m {
                    table[[a, b, a, b, j, j]] = g / dv;
                }
            }
        }
        InteractionKernel::new(table, n_components, grid)
    }

    pub fn table(&self) -> ArrayView6<'_, f64> {
        self.table.view()
    }

    pub fn value(&self, a: usize, b: usize, c: usize, d: usize, j: usize, k: usize) -> f64 {
        self.table[[a, b, c, d, j, k]]
    }
}

/// Multi-component gas with a general two-body kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiComponentModel {
    pub grid: Grid,
    pub hbar: f64,
    pub mass: f64,
    pub n_components: usize,
    /// External potential per component.
    pub potentials: Vec<Potential>,
    pub kernel: InteractionKernel,
}

impl MultiComponentModel {
    pub fn validate(&self) -> Result<()> {
        check_positive("hbar", self.hbar)?;
        check_positive("mass", self.mass)?;
        if self.n_components == 0 {
            return Err(Error::config("model needs at least one component"));
        }
        if self.potentials.len() != self.n_components {
            return Err(Error::config(format!(
                "{} potentials given for {} components",
                self.potentials.len(),
                self.n_components
            )));
        }
        for p in &self.potentials {
            p.sample(&self.grid)?;
        }
        let m = self.grid.n_points();
        let want = [
            self.n_components,
            self.n_components,
            self.n_components,
            self.n_components,
            m,
            m,
        ];
        if self.kernel.table.shape() != want {
            return Err(Error::config(format!(
                "kernel table shape {:?} does not match model dimensions {:?}",
                self.kernel.table.shape(),
                want
            )));
        }
        Ok(())
    }

    /// Number of composite (component, point) modes.
    pub fn n_modes(&self) -> usize {
        self.n_components * self.grid.n_points()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2() -> Grid {
        Grid::new(2, 0.5).unwrap()
    }

    #[test]
    fn potential_sampling() {
        let g = Grid::new(4, 1.0).unwrap();
        assert_eq!(Potential::Zero.sample(&g).unwrap(), vec![0.0; 4]);

        let harm = Potential::Harmonic { strength: 2.0, center: 1.0 };
        assert_eq!(harm.sample(&g).unwrap(), vec![1.0, 0.0, 1.0, 4.0]);

        let v = Potential::SinSq { v0: 3.0, k_lattice: std::f64::consts::FRAC_PI_2 };
        let s = v.sample(&g).unwrap();
        assert!((s[0] - 0.0).abs() < 1e-12);
        assert!((s[1] - 3.0).abs() < 1e-12);
        assert!((s[2] - 0.0).abs() < 1e-11);

        assert!(Potential::Table(vec![1.0; 3]).sample(&g).is_err());
        assert!(Potential::Table(vec![f64::NAN; 4]).sample(&g).is_err());
    }

    #[test]
    fn zero_range_kernels_are_symmetric_and_local() {
        let g = grid2();
        for kernel in [
            InteractionKernel::zero_range(0.7, 2, &g).unwrap(),
            InteractionKernel::zero_range_direct(0.7, 2, &g).unwrap(),
        ] {
            // Off-site and same-component entries vanish.
            for a in 0..2 {
                for b in 0..2 {
                    for c in 0..2 {
                        for d in 0..2 {
                            assert_eq!(kernel.value(a, b, c, d, 0, 1), 0.0);
                            if a == b {
                                assert_eq!(kernel.value(a, b, c, d, 0, 0), 0.0);
                            }
                        }
                    }
                }
            }
        }
        let exchange = InteractionKernel::zero_range(0.7, 2, &g).unwrap();
        // ΔV = 0.5 so the on-site strength is g/ΔV = 1.4, negated in
        // exchange arrangement.
        assert!((exchange.value(0, 1, 1, 0, 1, 1) + 1.4).abs() < 1e-15);
        let direct = InteractionKernel::zero_range_direct(0.7, 2, &g).unwrap();
        assert!((direct.value(0, 1, 0, 1, 1, 1) - 1.4).abs() < 1e-15);
    }

    #[test]
    fn asymmetric_kernel_rejected() {
        let g = grid2();
        let mut table = Array6::zeros([2, 2, 2, 2, 2, 2]);
        table[[0, 1, 1, 0, 0, 0]] = 1.0;
        // Missing the (1,0,0,1) mirror entry.
        assert!(matches!(
            InteractionKernel::new(table, 2, &g),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn two_component_validation() {
        let model = TwoComponentModel {
            grid: grid2(),
            hbar: 1.0,
            mass: 1.0,
            coupling: 0.3,
            potentials: [Potential::Zero, Potential::Zero],
        };
        assert!(model.validate().is_ok());
        assert!((model.on_site_coupling() - 0.6).abs() < 1e-15);

        let bad = TwoComponentModel { mass: -1.0, ..model };
        assert!(bad.validate().is_err());
    }
}
