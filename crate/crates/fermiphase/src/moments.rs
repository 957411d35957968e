//! Multi-particle coherence tensors and their propagation.
//!
//! The order-p moment tensor of a state collects every p-particle
//! coherence: M[(m₁…m_p),(l₁…l_p)] = ⟨Φ_{m⃗}| ρ |Φ_{l⃗}⟩ with
//! |Φ_{t⃗}⟩ = ĉ†_{t₁}…ĉ†_{t_p}|0⟩. Entries are antisymmetric in each tuple
//! separately and vanish exactly on repeated indices.
//!
//! Under the linear trajectory equations the tensor of a single trajectory
//! evolves by contraction: each bra axis with the ψ-sector propagator T,
//! each ket axis with the ψ⁺-sector propagator T⁺. For the deterministic
//! one-body problem (T, T⁺) = (U, Ū) and the contraction reproduces
//! U ρ U† exactly; with noise the ensemble mean over trajectories restores
//! the interacting coherences.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::C64;

/// Largest stored tensor: d^{2p} complex entries.
pub const MAX_TENSOR_LEN: usize = 1 << 20;

/// Dense order-p coherence tensor over d modes: 2p axes of length d, the
/// first p indexing the bra tuple, the last p the ket tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTensor {
    n_modes: usize,
    order: usize,
    data: Vec<C64>,
}

fn tensor_len(n_modes: usize, order: usize) -> Result<usize> {
    if order == 0 {
        return Err(Error::config("moment order must be at least 1"));
    }
    let mut len: usize = 1;
    for _ in 0..2 * order {
        len = len
            .checked_mul(n_modes)
            .filter(|&l| l <= MAX_TENSOR_LEN)
            .ok_or_else(|| {
                Error::config(format!(
                    "moment tensor with {n_modes} modes at order {order} exceeds \
                     the {MAX_TENSOR_LEN}-entry bound"
                ))
            })?;
    }
    Ok(len)
}

/// Occupation mask and reordering sign of a creation tuple; `None` for
/// repeated indices.
pub(crate) fn tuple_mask(modes: &[usize]) -> Option<(u32, f64)> {
    let mut mask = 0u32;
    let mut sign = 1.0;
    // Rightmost creator acts first; each one passes the modes already
    // placed below it.
    for &m in modes.iter().rev() {
        let bit = 1u32 << m;
        if mask & bit != 0 {
            return None;
        }
        let below = (mask & (bit - 1)).count_ones();
        if below % 2 == 1 {
            sign = -sign;
        }
        mask |= bit;
    }
    Some((mask, sign))
}

fn decode_index(mut flat: usize, n_modes: usize, n_axes: usize, out: &mut [usize]) {
    for axis in (0..n_axes).rev() {
        out[axis] = flat % n_modes;
        flat /= n_modes;
    }
}

impl MomentTensor {
    pub fn zeros(n_modes: usize, order: usize) -> Result<Self> {
        let len = tensor_len(n_modes, order)?;
        Ok(MomentTensor {
            n_modes,
            order,
            data: vec![C64::new(0.0, 0.0); len],
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn flat_index(&self, bra: &[usize], ket: &[usize]) -> Result<usize> {
        if bra.len() != self.order || ket.len() != self.order {
            return Err(Error::config(format!(
                "tuple lengths ({}, {}) do not match tensor order {}",
                bra.len(),
                ket.len(),
                self.order
            )));
        }
        let mut flat = 0usize;
        for &i in bra.iter().chain(ket.iter()) {
            if i >= self.n_modes {
                return Err(Error::config(format!("mode index {i} out of range")));
            }
            flat = flat * self.n_modes + i;
        }
        Ok(flat)
    }

    pub fn get(&self, bra: &[usize], ket: &[usize]) -> Result<C64> {
        Ok(self.data[self.flat_index(bra, ket)?])
    }

    pub fn set(&mut self, bra: &[usize], ket: &[usize], value: C64) -> Result<()> {
        let i = self.flat_index(bra, ket)?;
        self.data[i] = value;
        Ok(())
    }

    /// All p-particle coherences of a Fock-space density operator.
    pub fn from_state(rho: &Array2<C64>, n_modes: usize, order: usize) -> Result<Self> {
        let dim = 1usize << n_modes;
        if rho.dim() != (dim, dim) {
            return Err(Error::config(format!(
                "density has shape {:?}, expected ({dim}, {dim})",
                rho.dim()
            )));
        }
        let mut out = Self::zeros(n_modes, order)?;
        let mut idx = vec![0usize; 2 * order];
        for flat in 0..out.data.len() {
            decode_index(flat, n_modes, 2 * order, &mut idx);
            let (bra, ket) = idx.split_at(order);
            if let (Some((bm, bs)), Some((km, ks))) = (tuple_mask(bra), tuple_mask(ket)) {
                out.data[flat] = rho[[bm as usize, km as usize]] * (bs * ks);
            }
        }
        Ok(out)
    }

    /// Moment tensor of a Slater determinant over orthonormal orbital
    /// columns, at order p = number of particles:
    /// M[m⃗, l⃗] = det[φ_j(m_i)] · conj(det[φ_j(l_i)]).
    pub fn from_slater(orbitals: &Array2<C64>) -> Result<Self> {
        let (n_modes, p) = orbitals.dim();
        if p == 0 || p > n_modes {
            return Err(Error::config(format!(
                "{p} orbitals over {n_modes} modes is not a valid determinant state"
            )));
        }
        for a in 0..p {
            for b in a..p {
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
        let mut out = Self::zeros(n_modes, p)?;
        let n_tuples = out.data.len() / {
            let mut half = 1usize;
            for _ in 0..p {
                half *= n_modes;
            }
            half
        };
        // Precompute the sampled determinant for every tuple once.
        let mut dets = vec![C64::new(0.0, 0.0); n_tuples];
        let mut tuple = vec![0usize; p];
        for (flat, det) in dets.iter_mut().enumerate() {
            decode_index(flat, n_modes, p, &mut tuple);
            *det = sampled_determinant(orbitals, &tuple);
        }
        for (flat, value) in out.data.iter_mut().enumerate() {
            let bra_flat = flat / n_tuples;
            let ket_flat = flat % n_tuples;
            *value = dets[bra_flat] * dets[ket_flat].conj();
        }
        Ok(out)
    }

    /// Propagate one trajectory's tensor: bra axes contract with the
    /// ψ-sector propagator, ket axes with the ψ⁺-sector propagator.
    pub fn evolve(&self, t_psi: &Array2<C64>, t_psi_plus: &Array2<C64>) -> Result<Self> {
        let d = self.n_modes;
        for (name, m) in [("psi", t_psi), ("psi_plus", t_psi_plus)] {
            if m.dim() != (d, d) {
                return Err(Error::config(format!(
                    "{name} propagator has shape {:?}, expected ({d}, {d})",
                    m.dim()
                )));
            }
        }
        let n_axes = 2 * self.order;
        let mut data = self.data.clone();
        for axis in 0..n_axes {
            let mat = if axis < self.order { t_psi } else { t_psi_plus };
            data = contract_axis(&data, d, n_axes, axis, mat);
        }
        Ok(MomentTensor {
            n_modes: d,
            order: self.order,
            data,
        })
    }

    pub(crate) fn data(&self) -> &[C64] {
        &self.data
    }

    pub(crate) fn from_raw(n_modes: usize, order: usize, data: Vec<C64>) -> Result<Self> {
        let len = tensor_len(n_modes, order)?;
        if data.len() != len {
            return Err(Error::config(format!(
                "raw tensor length {} does not match {len}",
                data.len()
            )));
        }
        Ok(MomentTensor {
            n_modes,
            order,
            data,
        })
    }

    /// Largest entry magnitude; a non-finite value reports as infinity.
    pub fn max_norm(&self) -> f64 {
        self.data.iter().fold(0.0f64, |acc, v| {
            let n = v.norm_sqr();
            if n.is_finite() {
                acc.max(n.sqrt())
            } else {
                f64::INFINITY
            }
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

/// det[orbitals[tuple[i], j]] over a p-element tuple, by partial-pivot
/// elimination.
fn sampled_determinant(orbitals: &Array2<C64>, tuple: &[usize]) -> C64 {
    let p = tuple.len();
    let mut a = vec![C64::new(0.0, 0.0); p * p];
    for (i, &m) in tuple.iter().enumerate() {
        for j in 0..p {
            a[i * p + j] = orbitals[[m, j]];
        }
    }
    let mut det = C64::new(1.0, 0.0);
    for col in 0..p {
        let mut pivot = col;
        let mut best = a[col * p + col].norm();
        for row in (col + 1)..p {
            let v = a[row * p + col].norm();
            if v > best {
                best = v;
                pivot = row;
            }
        }
        if best == 0.0 {
            return C64::new(0.0, 0.0);
        }
        if pivot != col {
            for j in 0..p {
                a.swap(col * p + j, pivot * p + j);
            }
            det = -det;
        }
        let diag = a[col * p + col];
        det *= diag;
        for row in (col + 1)..p {
            let f = a[row * p + col] / diag;
            for j in col..p {
                let sub = f * a[col * p + j];
                a[row * p + j] -= sub;
            }
        }
    }
    det
}

fn contract_axis(
    data: &[C64],
    d: usize,
    n_axes: usize,
    axis: usize,
    mat: &Array2<C64>,
) -> Vec<C64> {
    let mut stride = 1usize;
    for _ in 0..(n_axes - 1 - axis) {
        stride *= d;
    }
    let block = stride * d;
    let mut out = vec![C64::new(0.0, 0.0); data.len()];
    let mut base = 0;
    while base < data.len() {
        for inner in 0..stride {
            for a in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for m in 0..d {
                    acc += mat[[a, m]] * data[base + m * stride + inner];
                }
                out[base + a * stride + inner] = acc;
            }
        }
        base += block;
    }
    out
}
