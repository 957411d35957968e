//! Drift and diffusion extraction from the phase-space evolution operator.
//!
//! For the models handled here the distribution evolves under an operator
//! of graded drift-plus-diffusion form,
//!
//! ```text
//! ∂B/∂t = Σ_{pr} L_{pr} ∂⃗_p (g_r B)  −  Σ_{p<q, r<s} d_{pq,rs} ∂⃗_p ∂⃗_q (g_r g_s B)
//! ```
//!
//! with all derivative and multiplication indices inside one conjugate
//! sector (ψ-type or ψ⁺-type generators). [`symbolic_ffpe`] recovers the
//! drift matrices L and the pair-indexed diffusion kernels d by expanding
//! the evolution operator exactly in that operator basis: the basis is
//! linearly independent, so the least-squares system has a unique solution,
//! and any evolution operator that does not fit the form shows up as a
//! nonzero expansion residual rather than a silently wrong answer.
//!
//! The same pair-indexed kernel shape is produced from stochastic noise
//! channels by [`PairKernel::from_channels`]; agreement of the two is the
//! consistency check between the symbolic route and the discretized
//! trajectory route.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::hamiltonian::ModeHamiltonian;
use crate::linalg::solve_hermitian_lstsq;
use crate::superop::{liouvillian, OpKind, OpString, SparseSuperOp};
use crate::C64;

/// Mode bound for the symbolic expansion (the basis grows as n⁴).
pub const MAX_SYMBOLIC_MODES: usize = 4;

/// Relative residual above which the evolution operator is declared outside
/// the drift-plus-diffusion form.
pub const RESIDUAL_TOL: f64 = 1e-12;

const LSTSQ_RANK_TOL: f64 = 1e-10;

/// Antisymmetric-pair-indexed kernel: a complex matrix over ordered mode
/// pairs (p < q), used both for extracted diffusion coefficients and for
/// the pairwise covariance of noise channels.
#[derive(Debug, Clone, PartialEq)]
pub struct PairKernel {
    n_modes: usize,
    data: Array2<C64>,
}

/// Ordered pairs (p < q) of mode indices, lexicographic.
pub fn mode_pairs(n_modes: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for p in 0..n_modes {
        for q in (p + 1)..n_modes {
            out.push((p, q));
        }
    }
    out
}

/// Position of (p, q) with p < q in [`mode_pairs`] order.
pub fn pair_index(n_modes: usize, p: usize, q: usize) -> usize {
    debug_assert!(p < q && q < n_modes);
    // Pairs starting below p: (n−1) + (n−2) + … + (n−p).
    p * n_modes - p * (p + 1) / 2 + (q - p - 1)
}

impl PairKernel {
    pub fn zeros(n_modes: usize) -> Self {
        let np = n_modes * n_modes.saturating_sub(1) / 2;
        PairKernel {
            n_modes,
            data: Array2::from_elem((np, np), C64::new(0.0, 0.0)),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_pairs(&self) -> usize {
        self.data.nrows()
    }

    pub fn get(&self, pq: (usize, usize), rs: (usize, usize)) -> C64 {
        self.data[[
            pair_index(self.n_modes, pq.0, pq.1),
            pair_index(self.n_modes, rs.0, rs.1),
        ]]
    }

    pub fn set(&mut self, pq: (usize, usize), rs: (usize, usize), value: C64) {
        self.data[[
            pair_index(self.n_modes, pq.0, pq.1),
            pair_index(self.n_modes, rs.0, rs.1),
        ]] = value;
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn frobenius_distance(&self, other: &PairKernel) -> f64 {
        assert_eq!(self.n_modes, other.n_modes, "mode count mismatch");
        (&self.data - &other.data)
            .iter()
            .map(|x| x.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Pairwise covariance of a set of noise channel matrices:
    /// T[(p,q),(r,s)] = Σ_a [(K_a)_{pr}(K_a)_{qs} − (K_a)_{ps}(K_a)_{qr}],
    /// the antisymmetrized object that multiplies ∂_p∂_q in the evolution
    /// generated by noise terms Σ_a K_a ψ δw_a.
    pub fn from_channels(n_modes: usize, channels: &[Array2<C64>]) -> Result<Self> {
        for (a, k) in channels.iter().enumerate() {
            if k.dim() != (n_modes, n_modes) {
                return Err(Error::config(format!(
                    "channel {a} has shape {:?}, expected ({n_modes}, {n_modes})",
                    k.dim()
                )));
            }
        }
        let mut out = Self::zeros(n_modes);
        let pairs = mode_pairs(n_modes);
        for &(p, q) in &pairs {
            for &(r, s) in &pairs {
                let mut acc = C64::new(0.0, 0.0);
                for k in channels {
                    acc += k[[p, r]] * k[[q, s]] - k[[p, s]] * k[[q, r]];
                }
                out.set((p, q), (r, s), acc);
            }
        }
        Ok(out)
    }
}

/// Extracted drift matrices and diffusion kernels, one per conjugate
/// sector, plus the relative expansion residual actually achieved.
#[derive(Debug, Clone)]
pub struct FfpeCoefficients {
    pub n_modes: usize,
    /// L with dψ_p = Σ_r L_{pr} ψ_r dt under the deterministic part.
    pub drift_psi: Array2<C64>,
    pub drift_psi_plus: Array2<C64>,
    pub diffusion_psi: PairKernel,
    pub diffusion_psi_plus: PairKernel,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy)]
enum Unknown {
    DriftPsi(usize, usize),
    DriftPsiPlus(usize, usize),
    DiffPsi(usize, usize, usize, usize),
    DiffPsiPlus(usize, usize, usize, usize),
}

/// Basis operator for one unknown: its elementary-op composition and the
/// sign convention it enters the expansion with.
fn basis_op(u: Unknown) -> (OpString, f64) {
    use OpKind::{DerivLeft, MultLeft};
    match u {
        Unknown::DriftPsi(p, r) => (
            OpString::new(vec![(DerivLeft, 2 * p), (MultLeft, 2 * r)]),
            1.0,
        ),
        Unknown::DriftPsiPlus(p, r) => (
            OpString::new(vec![(DerivLeft, 2 * p + 1), (MultLeft, 2 * r + 1)]),
            1.0,
        ),
        Unknown::DiffPsi(p, q, r, s) => (
            OpString::new(vec![
                (DerivLeft, 2 * p),
                (DerivLeft, 2 * q),
                (MultLeft, 2 * r),
                (MultLeft, 2 * s),
            ]),
            -1.0,
        ),
        Unknown::DiffPsiPlus(p, q, r, s) => (
            OpString::new(vec![
                (DerivLeft, 2 * p + 1),
                (DerivLeft, 2 * q + 1),
                (MultLeft, 2 * r + 1),
                (MultLeft, 2 * s + 1),
            ]),
            -1.0,
        ),
    }
}

fn unknown_list(n: usize) -> Vec<Unknown> {
    let mut out = Vec::new();
    for p in 0..n {
        for r in 0..n {
            out.push(Unknown::DriftPsi(p, r));
        }
    }
    for p in 0..n {
        for r in 0..n {
            out.push(Unknown::DriftPsiPlus(p, r));
        }
    }
    let pairs = mode_pairs(n);
    for &(p, q) in &pairs {
        for &(r, s) in &pairs {
            out.push(Unknown::DiffPsi(p, q, r, s));
        }
    }
    for &(p, q) in &pairs {
        for &(r, s) in &pairs {
            out.push(Unknown::DiffPsiPlus(p, q, r, s));
        }
    }
    out
}

/// Expand the model's phase-space evolution operator in the graded
/// drift-plus-diffusion basis and return the coefficients.
///
/// # Errors
///
/// `Error::Config` above [`MAX_SYMBOLIC_MODES`] modes; `Error::Structural`
/// if the expansion residual exceeds [`RESIDUAL_TOL`], meaning the
/// evolution operator does not have the assumed form.
pub fn symbolic_ffpe(h: &ModeHamiltonian) -> Result<FfpeCoefficients> {
    let n = h.n_modes;
    if n == 0 || n > MAX_SYMBOLIC_MODES {
        return Err(Error::config(format!(
            "symbolic extraction supports 1..={MAX_SYMBOLIC_MODES} modes, got {n}"
        )));
    }
    let op = liouvillian(h)?;
    let dim = op.dim();

    let unknowns = unknown_list(n);
    let m = unknowns.len();
    let basis: Vec<(OpString, f64)> = unknowns.iter().map(|&u| basis_op(u)).collect();

    // Per-column images of each basis operator (each maps a monomial to at
    // most one monomial), cached as (row, signed coefficient).
    let images: Vec<Vec<Option<(usize, f64)>>> = basis
        .iter()
        .map(|(string, sign)| {
            (0..dim)
                .map(|col| {
                    string
                        .entry(col as u16)
                        .map(|(row, s)| (row as usize, s * sign))
                })
                .collect()
        })
        .collect();

    // Normal equations over the Frobenius inner product.
    let mut gram = Array2::from_elem((m, m), C64::new(0.0, 0.0));
    let mut rhs = vec![C64::new(0.0, 0.0); m];
    for a in 0..m {
        for b in a..m {
            let mut acc = 0.0;
            for col in 0..dim {
                if let (Some((ra, ca)), Some((rb, cb))) = (images[a][col], images[b][col]) {
                    if ra == rb {
                        acc += ca * cb;
                    }
                }
            }
            gram[[a, b]] = C64::new(acc, 0.0);
            gram[[b, a]] = C64::new(acc, 0.0);
        }
        let mut acc = C64::new(0.0, 0.0);
        for col in 0..dim {
            if let Some((ra, ca)) = images[a][col] {
                for &(row, v) in op.column(col) {
                    if row == ra {
                        acc += ca * v;
                    }
                }
            }
        }
        rhs[a] = acc;
    }

    let x = solve_hermitian_lstsq(&gram, &rhs, LSTSQ_RANK_TOL)?;

    let residual = expansion_residual(&op, &images, &x);
    let op_norm = op.frobenius();
    let rel = if op_norm == 0.0 { residual } else { residual / op_norm };
    if rel > RESIDUAL_TOL {
        return Err(Error::structural(format!(
            "evolution operator does not fit the drift-plus-diffusion form: \
             relative expansion residual {rel:.3e}"
        )));
    }

    let mut out = FfpeCoefficients {
        n_modes: n,
        drift_psi: Array2::from_elem((n, n), C64::new(0.0, 0.0)),
        drift_psi_plus: Array2::from_elem((n, n), C64::new(0.0, 0.0)),
        diffusion_psi: PairKernel::zeros(n),
        diffusion_psi_plus: PairKernel::zeros(n),
        residual: rel,
    };
    for (i, &u) in unknowns.iter().enumerate() {
        match u {
            Unknown::DriftPsi(p, r) => out.drift_psi[[p, r]] = x[i],
            Unknown::DriftPsiPlus(p, r) => out.drift_psi_plus[[p, r]] = x[i],
            Unknown::DiffPsi(p, q, r, s) => out.diffusion_psi.set((p, q), (r, s), x[i]),
            Unknown::DiffPsiPlus(p, q, r, s) => out.diffusion_psi_plus.set((p, q), (r, s), x[i]),
        }
    }
    Ok(out)
}

/// Frobenius norm of (Σ_a x_a B_a − op).
fn expansion_residual(
    op: &SparseSuperOp,
    images: &[Vec<Option<(usize, f64)>>],
    x: &[C64],
) -> f64 {
    let dim = op.dim();
    let mut acc = 0.0;
    let mut col_fit: Vec<(usize, C64)> = Vec::new();
    for col in 0..dim {
        col_fit.clear();
        for (a, image) in images.iter().enumerate() {
            if let Some((row, c)) = image[col] {
                match col_fit.iter_mut().find(|(r, _)| *r == row) {
                    Some((_, v)) => *v += x[a] * c,
                    None => col_fit.push((row, x[a] * c)),
                }
            }
        }
        for &(row, v) in op.column(col) {
            match col_fit.iter_mut().find(|(r, _)| *r == row) {
                Some((_, fit)) => *fit -= v,
                None => col_fit.push((row, -v)),
            }
        }
        acc += col_fit.iter().map(|(_, v)| v.norm_sqr()).sum::<f64>();
    }
    acc.sqrt()
}
