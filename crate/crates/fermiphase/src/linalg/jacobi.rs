//! Cyclic Jacobi eigensolvers for real symmetric and complex Hermitian
//! matrices, plus a rank-revealing least-squares solve built on them.
//!
//! A complex pivot is first rotated onto the real axis by a diagonal phase
//! unitary, then annihilated by the standard symmetric Schur rotation; each
//! sweep visits every superdiagonal pair and the iteration stops once the
//! off-diagonal Frobenius mass is negligible against the matrix norm.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::C64;

/// Largest matrix dimension these solvers accept.
pub const MAX_DIM: usize = 256;

const MAX_SWEEPS: usize = 100;
const OFF_DIAG_TOL: f64 = 1e-14;

fn check_square<T>(a: &Array2<T>) -> Result<usize> {
    let (r, c) = a.dim();
    if r != c {
        return Err(Error::config(format!("matrix is {r}x{c}, expected square")));
    }
    if r > MAX_DIM {
        return Err(Error::config(format!(
            "matrix dimension {r} exceeds solver bound {MAX_DIM}"
        )));
    }
    Ok(r)
}

fn frobenius_real(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn frobenius_complex(a: &Array2<C64>) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn off_diag_sqr_real(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for p in 0..n {
        for q in 0..n {
            if p != q {
                s += a[[p, q]] * a[[p, q]];
            }
        }
    }
    s
}

fn off_diag_sqr_complex(a: &Array2<C64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for p in 0..n {
        for q in 0..n {
            if p != q {
                s += a[[p, q]].norm_sqr();
            }
        }
    }
    s
}

/// Schur rotation parameters (c, s) that annihilate a real symmetric pivot.
fn schur_rotation(app: f64, aqq: f64, apq: f64) -> (f64, f64) {
    let tau = (aqq - app) / (2.0 * apq);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    (c, t * c)
}

fn sort_ascending_real(vals: &mut Array1<f64>, vecs: &mut Array2<f64>) {
    let n = vals.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap());
    let old_vals = vals.clone();
    let old_vecs = vecs.clone();
    for (new, &old) in order.iter().enumerate() {
        vals[new] = old_vals[old];
        for k in 0..n {
            vecs[[k, new]] = old_vecs[[k, old]];
        }
    }
}

fn sort_ascending_complex(vals: &mut Array1<f64>, vecs: &mut Array2<C64>) {
    let n = vals.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap());
    let old_vals = vals.clone();
    let old_vecs = vecs.clone();
    for (new, &old) in order.iter().enumerate() {
        vals[new] = old_vals[old];
        for k in 0..n {
            vecs[[k, new]] = old_vecs[[k, old]];
        }
    }
}

/// Eigendecomposition of a real symmetric matrix: A = V diag(λ) Vᵀ with
/// eigenvalues ascending and orthonormal eigenvector columns. The input is
/// symmetrized internally, so only its symmetric part matters.
pub fn eigh_real(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = check_square(a)?;
    let mut m = a.clone();
    for p in 0..n {
        for q in (p + 1)..n {
            let avg = 0.5 * (m[[p, q]] + m[[q, p]]);
            m[[p, q]] = avg;
            m[[q, p]] = avg;
        }
    }
    let mut v = Array2::<f64>::eye(n);
    let scale = frobenius_real(&m);
    if n == 1 || scale == 0.0 {
        let vals = Array1::from_iter((0..n).map(|i| m[[i, i]]));
        let mut vals = vals;
        sort_ascending_real(&mut vals, &mut v);
        return Ok((vals, v));
    }
    let target = (OFF_DIAG_TOL * scale).powi(2);

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if off_diag_sqr_real(&m) <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let (c, s) = schur_rotation(m[[p, p]], m[[q, q]], apq);
                for k in 0..n {
                    let akp = m[[k, p]];
                    let akq = m[[k, q]];
                    m[[k, p]] = c * akp - s * akq;
                    m[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[[p, k]];
                    let aqk = m[[q, k]];
                    m[[p, k]] = c * apk - s * aqk;
                    m[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged && off_diag_sqr_real(&m) > target {
        return Err(Error::numerical(
            "Jacobi iteration did not converge on real symmetric matrix",
        ));
    }

    let mut vals = Array1::from_iter((0..n).map(|i| m[[i, i]]));
    sort_ascending_real(&mut vals, &mut v);
    Ok((vals, v))
}

/// Eigendecomposition of a complex Hermitian matrix: A = V diag(λ) V† with
/// real eigenvalues ascending and unitary V. The input is Hermitized
/// internally; callers needing to reject non-Hermitian input must check
/// before calling.
pub fn eigh_complex(a: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let n = check_square(a)?;
    let zero = C64::new(0.0, 0.0);
    let mut m = a.clone();
    for p in 0..n {
        m[[p, p]] = C64::new(m[[p, p]].re, 0.0);
        for q in (p + 1)..n {
            let avg = 0.5 * (m[[p, q]] + m[[q, p]].conj());
            m[[p, q]] = avg;
            m[[q, p]] = avg.conj();
        }
    }
    let mut v = Array2::<C64>::eye(n);
    let scale = frobenius_complex(&m);
    if n == 1 || scale == 0.0 {
        let mut vals = Array1::from_iter((0..n).map(|i| m[[i, i]].re));
        sort_ascending_complex(&mut vals, &mut v);
        return Ok((vals, v));
    }
    let target = (OFF_DIAG_TOL * scale).powi(2);

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if off_diag_sqr_complex(&m) <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == zero {
                    continue;
                }
                let abs = apq.norm();
                let phase = apq / abs;
                // Absorb the pivot's phase into column p so the remaining
                // rotation is real.
                for k in 0..n {
                    m[[k, p]] *= phase;
                }
                for k in 0..n {
                    m[[p, k]] *= phase.conj();
                }
                for k in 0..n {
                    v[[k, p]] *= phase;
                }
                let (c, s) = schur_rotation(m[[p, p]].re, m[[q, q]].re, abs);
                for k in 0..n {
                    let akp = m[[k, p]];
                    let akq = m[[k, q]];
                    m[[k, p]] = c * akp - s * akq;
                    m[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[[p, k]];
                    let aqk = m[[q, k]];
                    m[[p, k]] = c * apk - s * aqk;
                    m[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged && off_diag_sqr_complex(&m) > target {
        return Err(Error::numerical(
            "Jacobi iteration did not converge on Hermitian matrix",
        ));
    }

    let mut vals = Array1::from_iter((0..n).map(|i| m[[i, i]].re));
    sort_ascending_complex(&mut vals, &mut v);
    Ok((vals, v))
}

/// Solve the normal-equation system G x = rhs for Hermitian positive
/// semidefinite G via eigendecomposition, dropping eigenmodes below
/// `rank_tol` times the largest eigenvalue. Returns the minimum-norm
/// least-squares solution.
pub fn solve_hermitian_lstsq(g: &Array2<C64>, rhs: &[C64], rank_tol: f64) -> Result<Vec<C64>> {
    let n = check_square(g)?;
    if rhs.len() != n {
        return Err(Error::config(format!(
            "right-hand side length {} does not match system size {n}",
            rhs.len()
        )));
    }
    let (vals, vecs) = eigh_complex(g)?;
    let lmax = vals.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let mut x = vec![C64::new(0.0, 0.0); n];
    if lmax == 0.0 {
        return Ok(x);
    }
    let cutoff = rank_tol * lmax;
    for i in 0..n {
        if vals[i].abs() <= cutoff {
            continue;
        }
        let mut proj = C64::new(0.0, 0.0);
        for k in 0..n {
            proj += vecs[[k, i]].conj() * rhs[k];
        }
        let w = proj / vals[i];
        for k in 0..n {
            x[k] += w * vecs[[k, i]];
        }
    }
    Ok(x)
}
