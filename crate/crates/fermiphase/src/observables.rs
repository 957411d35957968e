//! Measurable quantities read off moment tensors, and ensemble averaging
//! of tensors over trajectories.
//!
//! Mode values are cell amplitudes, so populations come out as cell
//! probabilities directly: a continuum density |φ(x)|² appears here as
//! |φ(x_r)|²ΔV. Momentum-space quantities contract the tensor with the
//! discrete plane waves of the periodic grid, one weight vector per tensor
//! axis, conjugated on bra axes.

use crate::error::{Error, Result};
use crate::linalg::fourier::plane_wave;
use crate::moments::MomentTensor;
use crate::propagate::TrajectoryPropagator;
use crate::C64;

/// How composite mode indices split into (component, grid point).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeLayout {
    pub n_components: usize,
    pub n_points: usize,
}

impl ModeLayout {
    pub fn n_modes(&self) -> usize {
        self.n_components * self.n_points
    }

    pub fn composite(&self, component: usize, point: usize) -> Result<usize> {
        if component >= self.n_components {
            return Err(Error::config(format!(
                "component {component} out of range ({} available)",
                self.n_components
            )));
        }
        if point >= self.n_points {
            return Err(Error::config(format!(
                "grid point {point} out of range ({} available)",
                self.n_points
            )));
        }
        Ok(component * self.n_points + point)
    }
}

/// One particle slot at a fixed (component, grid point).
pub type PositionSlot = (usize, usize);
/// One particle slot at a fixed (component, momentum mode). The momentum
/// mode is an integer ν labelling the reciprocal-lattice wavenumber
/// 2πν/(MΔx); any integer is accepted and wraps periodically.
pub type MomentumSlot = (usize, i64);

#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    /// Probability of finding the p particles at the given slots.
    PositionPopulation { slots: Vec<PositionSlot> },
    /// ⟨Φ_bra| ρ |Φ_ket⟩ between position Fock states.
    PositionCoherence {
        bra: Vec<PositionSlot>,
        ket: Vec<PositionSlot>,
    },
    /// ⟨Φ_bra| ρ |Φ_ket⟩ between momentum Fock states.
    MomentumCoherence {
        bra: Vec<MomentumSlot>,
        ket: Vec<MomentumSlot>,
    },
    /// Sum of the order-p population over all slot placements; 1 for a
    /// p-particle state.
    TotalPopulation { order: usize },
}

impl Observable {
    /// Moment order the observable reads.
    pub fn order(&self) -> usize {
        match self {
            Observable::PositionPopulation { slots } => slots.len(),
            Observable::PositionCoherence { bra, .. } => bra.len(),
            Observable::MomentumCoherence { bra, .. } => bra.len(),
            Observable::TotalPopulation { order } => *order,
        }
    }

    pub fn validate(&self, layout: &ModeLayout) -> Result<()> {
        let check_position = |slots: &[PositionSlot]| -> Result<()> {
            for &(component, point) in slots {
                layout.composite(component, point)?;
            }
            Ok(())
        };
        match self {
            Observable::PositionPopulation { slots } => {
                if slots.is_empty() {
                    return Err(Error::config("population needs at least one slot"));
                }
                check_position(slots)
            }
            Observable::PositionCoherence { bra, ket } => {
                if bra.is_empty() || bra.len() != ket.len() {
                    return Err(Error::config(format!(
                        "coherence bra/ket lengths ({}, {}) must match and be positive",
                        bra.len(),
                        ket.len()
                    )));
                }
                check_position(bra)?;
                check_position(ket)
            }
            Observable::MomentumCoherence { bra, ket } => {
                if bra.is_empty() || bra.len() != ket.len() {
                    return Err(Error::config(format!(
                        "coherence bra/ket lengths ({}, {}) must match and be positive",
                        bra.len(),
                        ket.len()
                    )));
                }
                for &(component, _) in bra.iter().chain(ket.iter()) {
                    layout.composite(component, 0)?;
                }
                Ok(())
            }
            Observable::TotalPopulation { order } => {
                if *order == 0 {
                    return Err(Error::config("total population needs order at least 1"));
                }
                Ok(())
            }
        }
    }

    /// Read the observable off one tensor (a single trajectory's, or an
    /// ensemble mean).
    pub fn evaluate(&self, tensor: &MomentTensor, layout: &ModeLayout) -> Result<C64> {
        self.validate(layout)?;
        if layout.n_modes() != tensor.n_modes() {
            return Err(Error::config(format!(
                "layout has {} modes, tensor has {}",
                layout.n_modes(),
                tensor.n_modes()
            )));
        }
        if self.order() != tensor.order() {
            return Err(Error::config(format!(
                "observable order {} does not match tensor order {}",
                self.order(),
                tensor.order()
            )));
        }
        match self {
            Observable::PositionPopulation { slots } => {
                let idx = composite_tuple(layout, slots)?;
                tensor.get(&idx, &idx)
            }
            Observable::PositionCoherence { bra, ket } => {
                let b = composite_tuple(layout, bra)?;
                let k = composite_tuple(layout, ket)?;
                tensor.get(&b, &k)
            }
            Observable::MomentumCoherence { bra, ket } => {
                let order = tensor.order();
                let mut weights = Vec::with_capacity(2 * order);
                for &(component, nu) in bra {
                    weights.push(momentum_weights(layout, component, nu, true));
                }
                for &(component, nu) in ket {
                    weights.push(momentum_weights(layout, component, nu, false));
                }
                Ok(contract_weights(tensor, &weights))
            }
            Observable::TotalPopulation { order } => {
                let mut total = C64::new(0.0, 0.0);
                let mut tuple: Vec<usize> = (0..*order).collect();
                if tuple.last().copied().unwrap_or(0) >= tensor.n_modes() {
                    return Err(Error::config(format!(
                        "order {order} exceeds the {} available modes",
                        tensor.n_modes()
                    )));
                }
                loop {
                    total += tensor.get(&tuple, &tuple)?;
                    if !next_combination(&mut tuple, tensor.n_modes()) {
                        break;
                    }
                }
                Ok(total)
            }
        }
    }
}

fn composite_tuple(layout: &ModeLayout, slots: &[PositionSlot]) -> Result<Vec<usize>> {
    slots
        .iter()
        .map(|&(component, point)| layout.composite(component, point))
        .collect()
}

/// Per-mode weight vector for one tensor axis: the component-masked plane
/// wave, conjugated on bra axes.
fn momentum_weights(layout: &ModeLayout, component: usize, nu: i64, bra: bool) -> Vec<C64> {
    let m = layout.n_points;
    let wave = plane_wave(m, nu);
    let mut w = vec![C64::new(0.0, 0.0); layout.n_modes()];
    for j in 0..m {
        let v = wave[j];
        w[component * m + j] = if bra { v.conj() } else { v };
    }
    w
}

fn contract_weights(tensor: &MomentTensor, weights: &[Vec<C64>]) -> C64 {
    let d = tensor.n_modes();
    let n_axes = weights.len();
    let mut total = C64::new(0.0, 0.0);
    let mut idx = vec![0usize; n_axes];
    for (flat, &v) in tensor.data().iter().enumerate() {
        if v != C64::new(0.0, 0.0) {
            let mut rest = flat;
            for axis in (0..n_axes).rev() {
                idx[axis] = rest % d;
                rest /= d;
            }
            let mut term = v;
            for (axis, w) in weights.iter().enumerate() {
                term *= w[idx[axis]];
            }
            total += term;
        }
    }
    total
}

/// Advance a strictly increasing index tuple; false when exhausted.
fn next_combination(tuple: &mut [usize], n: usize) -> bool {
    let p = tuple.len();
    let mut i = p;
    while i > 0 {
        i -= 1;
        if tuple[i] + 1 <= n - (p - i) {
            tuple[i] += 1;
            for j in i + 1..p {
                tuple[j] = tuple[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Ensemble mean and per-entry standard error of an evolved moment tensor.
#[derive(Debug, Clone)]
pub struct EnsembleEstimate {
    pub mean: MomentTensor,
    /// Standard errors: real part for the entry's real part, imaginary for
    /// imaginary.
    pub stderr: MomentTensor,
    pub n_trajectories: usize,
    pub n_excluded: usize,
}

/// Evolve M0 through every trajectory and average. Divergent trajectories
/// (non-finite propagator entries) are excluded and counted.
pub fn evolve_moment(
    m0: &MomentTensor,
    trajectories: &[TrajectoryPropagator],
) -> Result<EnsembleEstimate> {
    if trajectories.is_empty() {
        return Err(Error::config("at least one trajectory is required"));
    }
    let len = m0.data().len();
    let mut sum = vec![C64::new(0.0, 0.0); len];
    let mut sum_sq_re = vec![0.0f64; len];
    let mut sum_sq_im = vec![0.0f64; len];
    let mut kept = 0usize;
    let mut excluded = 0usize;
    for prop in trajectories {
        if !prop.is_finite() {
            excluded += 1;
            continue;
        }
        let evolved = m0.evolve(&prop.t_psi, &prop.t_psi_plus)?;
        if !evolved.is_finite() {
            excluded += 1;
            continue;
        }
        for (i, &v) in evolved.data().iter().enumerate() {
            sum[i] += v;
            sum_sq_re[i] += v.re * v.re;
            sum_sq_im[i] += v.im * v.im;
        }
        kept += 1;
    }
    if kept == 0 {
        return Err(Error::numerical(
            "every trajectory diverged; nothing to average",
        ));
    }
    let n = kept as f64;
    let mut mean = Vec::with_capacity(len);
    let mut stderr = Vec::with_capacity(len);
    for i in 0..len {
        let mu = sum[i] / n;
        mean.push(mu);
        stderr.push(C64::new(
            sample_stderr(sum_sq_re[i], mu.re, kept),
            sample_stderr(sum_sq_im[i], mu.im, kept),
        ));
    }
    Ok(EnsembleEstimate {
        mean: MomentTensor::from_raw(m0.n_modes(), m0.order(), mean)?,
        stderr: MomentTensor::from_raw(m0.n_modes(), m0.order(), stderr)?,
        n_trajectories: kept,
        n_excluded: excluded,
    })
}

/// √(unbiased variance / n) from Σx² and the mean; 0 for a single sample.
pub(crate) fn sample_stderr(sum_sq: f64, mean: f64, n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let var = (sum_sq - nf * mean * mean) / (nf - 1.0);
    (var.max(0.0) / nf).sqrt()
}
