//! Takagi factorization of complex symmetric matrices: Q = K Kᵀ.
//!
//! The factor is obtained from the real symmetric doubling
//!
//! ```text
//! S = | Re Q   Im Q |
//!     | Im Q  -Re Q |
//! ```
//!
//! whose eigenpairs (σ, (u; v)) with σ > 0 encode con-eigenvectors
//! x = u + iv satisfying Q x̄ = σ x; the columns of K are √σ · x. Eigenvalues
//! of S come in ±σ pairs (x ↦ ix maps one sign to the other), so keeping the
//! positive half yields exactly rank(Q) columns, complex-orthogonal by
//! construction even for degenerate σ.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::jacobi::eigh_real;
use crate::C64;

/// Relative symmetry tolerance on the input: ‖Q − Qᵀ‖_F ≤ tol · ‖Q‖_F.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Relative reconstruction tolerance on the output: ‖KKᵀ − Q‖_F ≤ tol · ‖Q‖_F.
pub const RECONSTRUCTION_TOL: f64 = 1e-10;

/// Eigenvalues below this fraction of the largest are treated as rank
/// deficiency and dropped.
pub const RANK_TOL: f64 = 1e-12;

/// Factor a complex symmetric matrix as Q = K Kᵀ.
///
/// Returns K with one column per retained singular direction (so K is d×r
/// with r = numerical rank of Q); a zero matrix yields zero columns. The
/// particular column phases and intra-degenerate-block rotations are not
/// canonical, only the reconstruction K Kᵀ is.
///
/// # Errors
///
/// Rejects non-square or asymmetric input (`Error::Validation`) and fails
/// with `Error::Numerical` if the reconstruction check does not meet
/// [`RECONSTRUCTION_TOL`].
pub fn takagi_factor(q: &Array2<C64>) -> Result<Array2<C64>> {
    let (rows, cols) = q.dim();
    if rows != cols {
        return Err(Error::validation(format!(
            "matrix is {rows}x{cols}, expected square"
        )));
    }
    let n = rows;
    let norm_q = q.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let mut asym = 0.0f64;
    for r in 0..n {
        for c in 0..n {
            asym += (q[[r, c]] - q[[c, r]]).norm_sqr();
        }
    }
    if asym.sqrt() > SYMMETRY_TOL * norm_q.max(f64::MIN_POSITIVE) {
        return Err(Error::validation(format!(
            "matrix is not symmetric: ‖Q − Qᵀ‖ = {:.3e} vs ‖Q‖ = {:.3e}",
            asym.sqrt(),
            norm_q
        )));
    }
    if norm_q == 0.0 {
        return Ok(Array2::zeros((n, 0)));
    }

    let mut s = Array2::<f64>::zeros((2 * n, 2 * n));
    for r in 0..n {
        for c in 0..n {
            let re = 0.5 * (q[[r, c]].re + q[[c, r]].re);
            let im = 0.5 * (q[[r, c]].im + q[[c, r]].im);
            s[[r, c]] = re;
            s[[r, n + c]] = im;
            s[[n + r, c]] = im;
            s[[n + r, n + c]] = -re;
        }
    }

    let (vals, vecs) = eigh_real(&s)?;
    let sigma_max = vals.iter().fold(0.0f64, |m, &x| m.max(x));
    let cutoff = RANK_TOL * sigma_max;

    // Positive eigenvalues, largest first.
    let mut kept: Vec<usize> = (0..2 * n).filter(|&i| vals[i] > cutoff).collect();
    kept.sort_by(|&i, &j| vals[j].partial_cmp(&vals[i]).unwrap());

    let mut k = Array2::<C64>::zeros((n, kept.len()));
    for (col, &i) in kept.iter().enumerate() {
        let scale = vals[i].sqrt();
        for r in 0..n {
            k[[r, col]] = C64::new(vecs[[r, i]], vecs[[n + r, i]]) * scale;
        }
    }

    let mut err = 0.0f64;
    for r in 0..n {
        for c in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for a in 0..kept.len() {
                acc += k[[r, a]] * k[[c, a]];
            }
            err += (acc - q[[r, c]]).norm_sqr();
        }
    }
    if err.sqrt() > RECONSTRUCTION_TOL * norm_q {
        return Err(Error::numerical(format!(
            "factor reconstruction error {:.3e} exceeds {:.3e}",
            err.sqrt(),
            RECONSTRUCTION_TOL * norm_q
        )));
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reconstruction_error(q: &Array2<C64>, k: &Array2<C64>) -> f64 {
        let n = q.nrows();
        let r = k.ncols();
        let mut err = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for a in 0..r {
                    acc += k[[i, a]] * k[[j, a]];
                }
                err += (acc - q[[i, j]]).norm_sqr();
            }
        }
        err.sqrt()
    }

    fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> Array2<C64> {
        let g = Array2::from_shape_fn((n, n), |_| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let gt = g.t().to_owned();
        g + gt
    }

    #[test]
    fn random_matrices_reconstruct() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for &n in &[1usize, 2, 3, 8, 24, 64] {
            let q = random_symmetric(&mut rng, n);
            let k = takagi_factor(&q).unwrap();
            let norm_q = q.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            let err = reconstruction_error(&q, &k);
            assert!(
                err <= RECONSTRUCTION_TOL * norm_q,
                "n={n}: error {err} vs bound {}",
                RECONSTRUCTION_TOL * norm_q
            );
        }
    }

    #[test]
    fn columns_are_complex_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let q = random_symmetric(&mut rng, 12);
        let k = takagi_factor(&q).unwrap();
        let r = k.ncols();
        for a in 0..r {
            for b in 0..r {
                if a == b {
                    continue;
                }
                let mut dot = C64::new(0.0, 0.0);
                for i in 0..k.nrows() {
                    dot += k[[i, a]].conj() * k[[i, b]];
                }
                assert!(dot.norm() < 1e-10, "columns {a},{b} overlap {dot}");
            }
        }
    }

    #[test]
    fn swap_matrix_factorizes_with_two_channels() {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let q = ndarray::array![[zero, one], [one, zero]];
        let k = takagi_factor(&q).unwrap();
        assert_eq!(k.ncols(), 2);
        assert!(reconstruction_error(&q, &k) < 1e-12);
    }

    #[test]
    fn rank_one_outer_product() {
        let x = [C64::new(1.0, 0.5), C64::new(-0.25, 2.0), C64::new(0.0, -1.0)];
        let q = Array2::from_shape_fn((3, 3), |(i, j)| x[i] * x[j]);
        let k = takagi_factor(&q).unwrap();
        assert_eq!(k.ncols(), 1);
        assert!(reconstruction_error(&q, &k) < 1e-12);
    }

    #[test]
    fn purely_imaginary_diagonal() {
        // Qx̄ = σx structure with a nontrivial phase: Q = diag(i).
        let i = C64::new(0.0, 1.0);
        let q = Array2::from_diag(&ndarray::arr1(&[i, i]));
        let k = takagi_factor(&q).unwrap();
        assert_eq!(k.ncols(), 2);
        assert!(reconstruction_error(&q, &k) < 1e-12);
    }

    #[test]
    fn zero_matrix_gives_no_columns() {
        let q = Array2::<C64>::zeros((4, 4));
        let k = takagi_factor(&q).unwrap();
        assert_eq!(k.ncols(), 0);
    }

    #[test]
    fn asymmetric_input_rejected() {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let q = ndarray::array![[zero, one], [-one, zero]];
        assert!(matches!(takagi_factor(&q), Err(Error::Validation(_))));
    }
}
