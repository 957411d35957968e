//! Exact Fock-space reference for small mode counts.
//!
//! States live in the 2ⁿ-dimensional occupation basis |mask⟩, built from
//! the vacuum by applying creators in ascending mode order. Operators use
//! the occupation-number string convention: annihilating or creating mode i
//! picks up one sign per occupied mode below i. Densities are evolved
//! exactly by diagonalizing the Hamiltonian, so this path has no time-step
//! error and serves as the ground truth the stochastic sampler is compared
//! against.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::hamiltonian::ModeHamiltonian;
use crate::linalg::eigh_complex;
use crate::C64;

/// Mode bound: the Fock dimension 2ⁿ must stay diagonalizable.
pub const MAX_ORACLE_MODES: usize = 8;

/// Absolute tolerance (relative to the matrix scale) for the Hermiticity
/// check on assembled Hamiltonians.
pub const HERMITICITY_TOL: f64 = 1e-12;

fn check_modes(n_modes: usize) -> Result<usize> {
    if n_modes == 0 || n_modes > MAX_ORACLE_MODES {
        return Err(Error::config(format!(
            "exact reference supports 1..={MAX_ORACLE_MODES} modes, got {n_modes}"
        )));
    }
    Ok(1usize << n_modes)
}

/// Sign string below `mode`: (−1)^{#occupied modes with index < mode}.
fn string_sign(mask: u32, mode: usize) -> f64 {
    let below = (mask & ((1u32 << mode) - 1)).count_ones();
    if below % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// ĉ_mode |mask⟩ in mask form.
pub fn annihilate(mask: u32, mode: usize) -> Option<(u32, f64)> {
    let bit = 1u32 << mode;
    if mask & bit == 0 {
        None
    } else {
        Some((mask & !bit, string_sign(mask, mode)))
    }
}

/// ĉ†_mode |mask⟩ in mask form.
pub fn create(mask: u32, mode: usize) -> Option<(u32, f64)> {
    let bit = 1u32 << mode;
    if mask & bit != 0 {
        None
    } else {
        Some((mask | bit, string_sign(mask, mode)))
    }
}

/// Dense matrices of all annihilation operators (creators are their
/// conjugate transposes).
pub fn build_fock_operators(n_modes: usize) -> Result<Vec<Array2<C64>>> {
    let dim = check_modes(n_modes)?;
    let mut ops = Vec::with_capacity(n_modes);
    for mode in 0..n_modes {
        let mut m = Array2::from_elem((dim, dim), C64::new(0.0, 0.0));
        for col in 0..dim {
            if let Some((row, sign)) = annihilate(col as u32, mode) {
                m[[row as usize, col]] = C64::new(sign, 0.0);
            }
        }
        ops.push(m);
    }
    Ok(ops)
}

/// Assemble the Fock-space matrix of a mode Hamiltonian and verify it is
/// Hermitian.
pub fn hamiltonian_matrix(h: &ModeHamiltonian) -> Result<Array2<C64>> {
    let dim = check_modes(h.n_modes)?;
    let mut m = Array2::from_elem((dim, dim), C64::new(0.0, 0.0));

    for col in 0..dim {
        let col_mask = col as u32;
        for p in 0..h.n_modes {
            for r in 0..h.n_modes {
                let w = h.one_body[[p, r]];
                if w == C64::new(0.0, 0.0) {
                    continue;
                }
                if let Some((m1, s1)) = annihilate(col_mask, r) {
                    if let Some((m2, s2)) = create(m1, p) {
                        m[[m2 as usize, col]] += w * (s1 * s2);
                    }
                }
            }
        }
        for term in &h.quartic {
            // w·ĉ†_p ĉ†_q ĉ_s ĉ_r applied right to left.
            let chain = [
                (false, term.annihilate.1),
                (false, term.annihilate.0),
                (true, term.create.1),
                (true, term.create.0),
            ];
            let mut mask = col_mask;
            let mut sign = 1.0;
            let mut alive = true;
            for &(is_create, mode) in &chain {
                let step = if is_create {
                    create(mask, mode)
                } else {
                    annihilate(mask, mode)
                };
                match step {
                    Some((next, s)) => {
                        mask = next;
                        sign *= s;
                    }
                    None => {
                        alive = false;
                        break;
                    }
                }
            }
            if alive {
                m[[mask as usize, col]] += term.coeff * sign;
            }
        }
    }

    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.norm()));
    let mut worst = 0.0f64;
    for r in 0..dim {
        for c in 0..dim {
            worst = worst.max((m[[r, c]] - m[[c, r]].conj()).norm());
        }
    }
    if worst > HERMITICITY_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::structural(format!(
            "assembled Hamiltonian is not Hermitian: deviation {worst:.3e}"
        )));
    }
    Ok(m)
}

/// Pure Fock state density |Φ⟩⟨Φ| with the listed modes occupied.
pub fn fock_state_density(n_modes: usize, occupied: &[usize]) -> Result<Array2<C64>> {
    let dim = check_modes(n_modes)?;
    let mut mask = 0u32;
    for &m in occupied {
        if m >= n_modes {
            return Err(Error::config(format!("mode index {m} out of range")));
        }
        let bit = 1u32 << m;
        if mask & bit != 0 {
            return Err(Error::config(format!("mode {m} occupied twice")));
        }
        mask |= bit;
    }
    let mut rho = Array2::from_elem((dim, dim), C64::new(0.0, 0.0));
    rho[[mask as usize, mask as usize]] = C64::new(1.0, 0.0);
    Ok(rho)
}

/// Pure Slater determinant density from orthonormal orbital columns:
/// |Ψ⟩ = ∏_a (Σ_m φ_a(m) ĉ†_m) |0⟩, one particle per column.
pub fn slater_density(n_modes: usize, orbitals: &Array2<C64>) -> Result<Array2<C64>> {
    let dim = check_modes(n_modes)?;
    if orbitals.nrows() != n_modes {
        return Err(Error::config(format!(
            "orbitals have {} rows for {n_modes} modes",
            orbitals.nrows()
        )));
    }
    let n_particles = orbitals.ncols();
    if n_particles > n_modes {
        return Err(Error::config(format!(
            "{n_particles} particles exceed {n_modes} modes"
        )));
    }
    for a in 0..n_particles {
        for b in a..n_particles {
            let mut dot = C64::new(0.0, 0.0);
            for m in 0..n_modes {
                dot += orbitals[[m, a]].conj() * orbitals[[m, b]];
            }
            let want = if a == b { 1.0 } else { 0.0 };
            if (dot - C64::new(want, 0.0)).norm() > 1e-10 {
                return Err(Error::validation(format!(
                    "orbitals {a} and {b} are not orthonormal (overlap {dot})"
                )));
            }
        }
    }

    // Apply the dressed creators right to left.
    let mut state = Array1::from_elem(dim, C64::new(0.0, 0.0));
    state[0] = C64::new(1.0, 0.0);
    for a in (0..n_particles).rev() {
        let mut next = Array1::from_elem(dim, C64::new(0.0, 0.0));
        for basis in 0..dim {
            let amp = state[basis];
            if amp == C64::new(0.0, 0.0) {
                continue;
            }
            for m in 0..n_modes {
                let w = orbitals[[m, a]];
                if w == C64::new(0.0, 0.0) {
                    continue;
                }
                if let Some((out, sign)) = create(basis as u32, m) {
                    next[out as usize] += amp * w * sign;
                }
            }
        }
        state = next;
    }
    let norm_sqr: f64 = state.iter().map(|v| v.norm_sqr()).sum();
    if norm_sqr <= 0.0 {
        return Err(Error::validation("orbital set produced a null state"));
    }
    let scale = 1.0 / norm_sqr.sqrt();
    let mut rho = Array2::from_elem((dim, dim), C64::new(0.0, 0.0));
    for r in 0..dim {
        for c in 0..dim {
            rho[[r, c]] = state[r] * scale * (state[c] * scale).conj();
        }
    }
    Ok(rho)
}

/// Evolve a density operator exactly to each requested time:
/// ρ(t) = e^{−iĤt/ħ} ρ₀ e^{+iĤt/ħ} via diagonalization.
pub fn evolve_exact(
    h: &ModeHamiltonian,
    rho0: &Array2<C64>,
    times: &[f64],
) -> Result<Vec<Array2<C64>>> {
    let dim = check_modes(h.n_modes)?;
    if rho0.dim() != (dim, dim) {
        return Err(Error::config(format!(
            "density has shape {:?}, expected ({dim}, {dim})",
            rho0.dim()
        )));
    }
    let hm = hamiltonian_matrix(h)?;
    let (vals, vecs) = eigh_complex(&hm)?;
    let vecs_h = vecs.t().mapv(|v: C64| v.conj());
    // Rotate once into the energy eigenbasis.
    let rho_e = vecs_h.dot(rho0).dot(&vecs);

    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if !t.is_finite() {
            return Err(Error::config(format!("non-finite time {t}")));
        }
        let mut rotated = rho_e.clone();
        for r in 0..dim {
            for c in 0..dim {
                let phase = -(vals[r] - vals[c]) * t / h.hbar;
                rotated[[r, c]] *= C64::new(phase.cos(), phase.sin());
            }
        }
        out.push(vecs.dot(&rotated).dot(&vecs_h));
    }
    Ok(out)
}

/// Matrix element ⟨Φ_bra| ρ |Φ_ket⟩ between multi-mode coherence states
/// |Φ_(t₁…t_p)⟩ = ĉ†_{t₁}…ĉ†_{t_p}|0⟩. Repeated modes in either tuple give
/// exactly zero.
pub fn exact_coherence(rho: &Array2<C64>, bra: &[usize], ket: &[usize]) -> Result<C64> {
    let dim = rho.nrows();
    let state = |modes: &[usize]| -> Result<Option<(u32, f64)>> {
        let mut mask = 0u32;
        let mut sign = 1.0;
        // Rightmost creator acts first.
        for &m in modes.iter().rev() {
            if (1usize << m) >= dim {
                return Err(Error::config(format!("mode index {m} out of range")));
            }
            match create(mask, m) {
                Some((next, s)) => {
                    mask = next;
                    sign *= s;
                }
                None => return Ok(None),
            }
        }
        Ok(Some((mask, sign)))
    };
    let b = state(bra)?;
    let k = state(ket)?;
    match (b, k) {
        (Some((bm, bs)), Some((km, ks))) => Ok(rho[[bm as usize, km as usize]] * (bs * ks)),
        _ => Ok(C64::new(0.0, 0.0)),
    }
}

/// Tr(Â ρ).
pub fn expectation(op: &Array2<C64>, rho: &Array2<C64>) -> C64 {
    let dim = rho.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for r in 0..dim {
        for c in 0..dim {
            acc += op[[r, c]] * rho[[c, r]];
        }
    }
    acc
}
