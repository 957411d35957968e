//! Parallel trajectory ensembles with reproducible reductions.
//!
//! Trajectories are processed in fixed blocks of 256 consecutive indices.
//! Blocks run in parallel on a dedicated thread pool, each producing a
//! partial accumulator from its own sequential loop; the partials are then
//! folded in block order on one thread. Since every trajectory's noise is
//! addressed by index and the fold order is fixed, the result is
//! byte-identical for any worker count.
//!
//! A trajectory whose propagator or evolved tensor picks up a non-finite
//! entry is excluded as divergent and counted; the run aborts when the
//! excluded fraction exceeds the configured ceiling.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::moments::MomentTensor;
use crate::observables::{sample_stderr, ModeLayout, Observable};
use crate::propagate::{propagate_with_snapshots, StepperPlan};
use crate::wiener::NoiseSource;
use crate::C64;

/// Trajectories per reduction block.
pub const BLOCK_SIZE: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec {
    pub n_trajectories: usize,
    /// Abort when excluded/total exceeds this fraction.
    pub divergence_ceiling: f64,
    /// Worker threads; 0 picks the library default.
    pub workers: usize,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec {
            n_trajectories: BLOCK_SIZE,
            divergence_ceiling: 0.01,
            workers: 0,
        }
    }
}

/// One block's contribution: per-(checkpoint, observable) running sums.
#[derive(Debug, Clone)]
pub struct BlockPartial {
    pub sum: Vec<C64>,
    pub sum_sq_re: Vec<f64>,
    pub sum_sq_im: Vec<f64>,
    pub kept: usize,
    pub excluded: usize,
}

impl BlockPartial {
    fn zeros(slots: usize) -> Self {
        BlockPartial {
            sum: vec![C64::new(0.0, 0.0); slots],
            sum_sq_re: vec![0.0; slots],
            sum_sq_im: vec![0.0; slots],
            kept: 0,
            excluded: 0,
        }
    }

    fn absorb(&mut self, other: &BlockPartial) {
        for i in 0..self.sum.len() {
            self.sum[i] += other.sum[i];
            self.sum_sq_re[i] += other.sum_sq_re[i];
            self.sum_sq_im[i] += other.sum_sq_im[i];
        }
        self.kept += other.kept;
        self.excluded += other.excluded;
    }
}

/// Ensemble averages of every requested observable at every checkpoint.
#[derive(Debug, Clone)]
pub struct EnsembleResult {
    /// Checkpoint times, ascending.
    pub times: Vec<f64>,
    /// mean[[checkpoint, observable]].
    pub mean: Array2<C64>,
    /// Standard errors, real part for Re and imaginary part for Im.
    pub stderr: Array2<C64>,
    pub n_kept: usize,
    pub n_excluded: usize,
    /// Per-block partial sums in block order, for convergence studies.
    pub partials: Vec<BlockPartial>,
}

fn finalize(
    partials: &[BlockPartial],
    n_blocks: usize,
    n_checkpoints: usize,
    n_obs: usize,
) -> Result<(Array2<C64>, Array2<C64>, usize, usize)> {
    let slots = n_checkpoints * n_obs;
    let mut total = BlockPartial::zeros(slots);
    for p in partials.iter().take(n_blocks) {
        total.absorb(p);
    }
    if total.kept == 0 {
        return Err(Error::numerical(
            "every trajectory diverged; nothing to average",
        ));
    }
    let n = total.kept as f64;
    let mut mean = Array2::from_elem((n_checkpoints, n_obs), C64::new(0.0, 0.0));
    let mut stderr = mean.clone();
    for cp in 0..n_checkpoints {
        for ob in 0..n_obs {
            let i = cp * n_obs + ob;
            let mu = total.sum[i] / n;
            mean[[cp, ob]] = mu;
            stderr[[cp, ob]] = C64::new(
                sample_stderr(total.sum_sq_re[i], mu.re, total.kept),
                sample_stderr(total.sum_sq_im[i], mu.im, total.kept),
            );
        }
    }
    Ok((mean, stderr, total.kept, total.excluded))
}

/// Run the full ensemble: propagate each trajectory, contract the initial
/// moment tensor at every checkpoint, evaluate the observables, and reduce.
pub fn run_ensemble(
    plan: &StepperPlan,
    noise: &NoiseSource,
    m0: &MomentTensor,
    layout: &ModeLayout,
    observables: &[Observable],
    checkpoint_steps: &[usize],
    spec: &EnsembleSpec,
) -> Result<EnsembleResult> {
    if spec.n_trajectories == 0 {
        return Err(Error::config("at least one trajectory is required"));
    }
    if !(0.0..=1.0).contains(&spec.divergence_ceiling) {
        return Err(Error::config(format!(
            "divergence ceiling {} must lie in [0, 1]",
            spec.divergence_ceiling
        )));
    }
    if observables.is_empty() {
        return Err(Error::config("at least one observable is required"));
    }
    if layout.n_modes() != plan.n_modes() || layout.n_modes() != m0.n_modes() {
        return Err(Error::config(format!(
            "mode counts disagree: layout {}, stepper {}, tensor {}",
            layout.n_modes(),
            plan.n_modes(),
            m0.n_modes()
        )));
    }
    for obs in observables {
        obs.validate(layout)?;
        if obs.order() != m0.order() {
            return Err(Error::config(format!(
                "observable order {} does not match tensor order {}",
                obs.order(),
                m0.order()
            )));
        }
    }
    if checkpoint_steps.is_empty() {
        return Err(Error::config("at least one checkpoint is required"));
    }

    let n_obs = observables.len();
    let n_checkpoints = checkpoint_steps.len();
    let slots = n_checkpoints * n_obs;
    let n_blocks = spec.n_trajectories.div_ceil(BLOCK_SIZE);

    let run_block = |block: usize| -> Result<BlockPartial> {
        let mut partial = BlockPartial::zeros(slots);
        let lo = block * BLOCK_SIZE;
        let hi = ((block + 1) * BLOCK_SIZE).min(spec.n_trajectories);
        for traj in lo..hi {
            let snaps = propagate_with_snapshots(plan, noise, traj as u64, checkpoint_steps)?;
            let mut values = Vec::with_capacity(slots);
            let mut finite = true;
            'snapshots: for snap in &snaps {
                if !snap.is_finite() {
                    finite = false;
                    break;
                }
                let evolved = m0.evolve(&snap.t_psi, &snap.t_psi_plus)?;
                if !evolved.is_finite() {
                    finite = false;
                    break;
                }
                for obs in observables {
                    let v = obs.evaluate(&evolved, layout)?;
                    if !(v.re.is_finite() && v.im.is_finite()) {
                        finite = false;
                        break 'snapshots;
                    }
                    values.push(v);
                }
            }
            if finite {
                for (i, v) in values.into_iter().enumerate() {
                    partial.sum[i] += v;
                    partial.sum_sq_re[i] += v.re * v.re;
                    partial.sum_sq_im[i] += v.im * v.im;
                }
                partial.kept += 1;
            } else {
                partial.excluded += 1;
            }
        }
        Ok(partial)
    };

    let partials: Vec<BlockPartial> = if spec.workers == 1 {
        (0..n_blocks)
            .map(run_block)
            .collect::<Result<Vec<_>>>()?
    } else {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if spec.workers > 0 {
            builder = builder.num_threads(spec.workers);
        }
        let pool = builder
            .build()
            .map_err(|e| Error::config(format!("worker pool: {e}")))?;
        pool.install(|| {
            (0..n_blocks)
                .into_par_iter()
                .map(run_block)
                .collect::<Result<Vec<_>>>()
        })?
    };

    let excluded: usize = partials.iter().map(|p| p.excluded).sum();
    let frac = excluded as f64 / spec.n_trajectories as f64;
    if frac > spec.divergence_ceiling {
        return Err(Error::DivergenceCeiling {
            excluded,
            total: spec.n_trajectories,
            ceiling: spec.divergence_ceiling,
        });
    }

    let (mean, stderr, kept, excluded) = finalize(&partials, n_blocks, n_checkpoints, n_obs)?;
    let times = checkpoint_steps
        .iter()
        .map(|&s| s as f64 * plan.dt())
        .collect();
    Ok(EnsembleResult {
        times,
        mean,
        stderr,
        n_kept: kept,
        n_excluded: excluded,
        partials,
    })
}

impl EnsembleResult {
    /// Recompute mean and standard error from the first `n_blocks` blocks
    /// only, for convergence ladders over growing trajectory counts.
    pub fn prefix_estimate(
        &self,
        n_blocks: usize,
    ) -> Result<(Array2<C64>, Array2<C64>, usize)> {
        if n_blocks == 0 || n_blocks > self.partials.len() {
            return Err(Error::config(format!(
                "prefix of {n_blocks} blocks out of range (have {})",
                self.partials.len()
            )));
        }
        let (n_checkpoints, n_obs) = self.mean.dim();
        let (mean, stderr, kept, _) =
            finalize(&self.partials, n_blocks, n_checkpoints, n_obs)?;
        Ok((mean, stderr, kept))
    }
}

/// Leave-one-out standard error of the mean over per-block values. For the
/// plain mean this reduces to the usual block standard error; it is exposed
/// for nonlinear post-processing of trajectory statistics.
pub fn jackknife_stderr(block_values: &[f64]) -> Result<f64> {
    let n = block_values.len();
    if n < 2 {
        return Err(Error::config(
            "jackknife needs at least two blocks of values",
        ));
    }
    let total: f64 = block_values.iter().sum();
    let nf = n as f64;
    let loo_means: Vec<f64> = block_values
        .iter()
        .map(|&v| (total - v) / (nf - 1.0))
        .collect();
    let center = loo_means.iter().sum::<f64>() / nf;
    let ss: f64 = loo_means.iter().map(|m| (m - center) * (m - center)).sum();
    Ok(((nf - 1.0) / nf * ss).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::discretize_two_component;
    use crate::grid::Grid;
    use crate::model::{Potential, TwoComponentModel};
    use crate::propagate::{SchemeVariant, StepScheme};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pair_setup(
        g: f64,
        dt: f64,
        steps: usize,
    ) -> (StepperPlan, MomentTensor, ModeLayout, Vec<Observable>) {
        // Both components occupied at a single grid point.
        let model = TwoComponentModel {
            grid: Grid::new(1, 1.0).unwrap(),
            hbar: 1.0,
            mass: 1.0,
            coupling: g,
            potentials: [Potential::Zero, Potential::Zero],
        };
        let sm = discretize_two_component(&model).unwrap();
        let plan = StepperPlan::new(
            &sm,
            &StepScheme {
                variant: SchemeVariant::EulerMaruyama,
                dt,
                steps,
            },
        )
        .unwrap();
        let rho = crate::oracle::fock_state_density(2, &[0, 1]).unwrap();
        let m0 = MomentTensor::from_state(&rho, 2, 2).unwrap();
        let layout = ModeLayout {
            n_components: 2,
            n_points: 1,
        };
        let obs = vec![Observable::TotalPopulation { order: 2 }];
        (plan, m0, layout, obs)
    }

    #[test]
    fn noise_free_ensemble_has_zero_stderr() {
        let (plan, m0, layout, obs) = pair_setup(0.0, 1e-2, 20);
        let noise = NoiseSource::new(3);
        let spec = EnsembleSpec {
            n_trajectories: 8,
            ..Default::default()
        };
        let result =
            run_ensemble(&plan, &noise, &m0, &layout, &obs, &[10, 20], &spec).unwrap();
        assert_eq!(result.n_kept, 8);
        assert_eq!(result.n_excluded, 0);
        assert_eq!(result.times, vec![0.1, 0.2]);
        for cp in 0..2 {
            assert_eq!(result.stderr[[cp, 0]], c(0.0, 0.0));
            // Euler drift error only; no interaction, population ≈ 1.
            assert!((result.mean[[cp, 0]].re - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn interacting_pair_population_matches_closed_form_step_mean() {
        // Single site, both components filled: each sector's propagator
        // determinant is an exact product of per-step factors whose means
        // are 1 ∓ iU·dt, so the expected pair population under this step
        // map is exactly (1 + U²dt²)^steps. The ensemble must reproduce
        // that within its own standard error.
        let u = 0.25;
        let dt = 5e-3;
        let (plan, m0, layout, obs) = pair_setup(u, dt, 60);
        let noise = NoiseSource::new(11);
        let spec = EnsembleSpec {
            n_trajectories: 2048,
            ..Default::default()
        };
        let result =
            run_ensemble(&plan, &noise, &m0, &layout, &obs, &[30, 60], &spec).unwrap();
        assert_eq!(result.n_kept + result.n_excluded, 2048);
        for (cp, steps) in [30usize, 60].into_iter().enumerate() {
            let mean = result.mean[[cp, 0]];
            let se = result.stderr[[cp, 0]];
            let expected = (1.0 + u * u * dt * dt).powi(steps as i32);
            assert!(se.re > 0.0, "noise must produce spread");
            assert!(
                (mean.re - expected).abs() < 6.0 * se.re + 1e-12,
                "checkpoint {cp}: {} ± {} vs {expected}",
                mean.re,
                se.re
            );
            assert!(
                mean.im.abs() < 6.0 * se.im + 1e-12,
                "checkpoint {cp}: imag {} ± {}",
                mean.im,
                se.im
            );
        }
    }

    #[test]
    fn results_are_identical_across_worker_counts() {
        let (plan, m0, layout, obs) = pair_setup(0.3, 5e-3, 40);
        let noise = NoiseSource::new(21);
        let mut outputs = Vec::new();
        for workers in [1usize, 4, 8] {
            let spec = EnsembleSpec {
                n_trajectories: 700,
                divergence_ceiling: 0.01,
                workers,
            };
            let r = run_ensemble(&plan, &noise, &m0, &layout, &obs, &[20, 40], &spec).unwrap();
            outputs.push(r);
        }
        for other in &outputs[1..] {
            assert_eq!(outputs[0].mean, other.mean);
            assert_eq!(outputs[0].stderr, other.stderr);
            assert_eq!(outputs[0].n_kept, other.n_kept);
        }
    }

    #[test]
    fn prefix_blocks_shrink_standard_errors() {
        let (plan, m0, layout, obs) = pair_setup(0.3, 5e-3, 40);
        let noise = NoiseSource::new(5);
        let spec = EnsembleSpec {
            n_trajectories: 4 * BLOCK_SIZE,
            ..Default::default()
        };
        let result =
            run_ensemble(&plan, &noise, &m0, &layout, &obs, &[40], &spec).unwrap();
        let (_, se1, kept1) = result.prefix_estimate(1).unwrap();
        let (_, se4, kept4) = result.prefix_estimate(4).unwrap();
        assert!(kept1 <= BLOCK_SIZE);
        assert_eq!(kept4, result.n_kept);
        assert!(se4[[0, 0]].re < se1[[0, 0]].re);
        assert!(result.prefix_estimate(0).is_err());
        assert!(result.prefix_estimate(5).is_err());
    }

    #[test]
    fn runaway_noise_trips_the_ceiling() {
        let (plan, m0, layout, obs) = pair_setup(1e6, 1.0, 400);
        let noise = NoiseSource::new(1);
        let spec = EnsembleSpec {
            n_trajectories: 16,
            divergence_ceiling: 0.25,
            workers: 1,
        };
        let err = run_ensemble(&plan, &noise, &m0, &layout, &obs, &[400], &spec).unwrap_err();
        match err {
            Error::DivergenceCeiling {
                excluded, total, ..
            } => {
                assert!(excluded > 4);
                assert_eq!(total, 16);
            }
            other => panic!("expected divergence ceiling, got {other}"),
        }
    }

    #[test]
    fn configuration_is_validated() {
        let (plan, m0, layout, obs) = pair_setup(0.1, 1e-2, 10);
        let noise = NoiseSource::new(0);
        let ok = EnsembleSpec {
            n_trajectories: 4,
            ..Default::default()
        };
        assert!(run_ensemble(&plan, &noise, &m0, &layout, &obs, &[], &ok).is_err());
        assert!(run_ensemble(&plan, &noise, &m0, &layout, &[], &[10], &ok).is_err());
        let bad_ceiling = EnsembleSpec {
            divergence_ceiling: 1.5,
            ..ok
        };
        assert!(run_ensemble(&plan, &noise, &m0, &layout, &obs, &[10], &bad_ceiling).is_err());
        let wrong_order = vec![Observable::TotalPopulation { order: 1 }];
        assert!(run_ensemble(&plan, &noise, &m0, &layout, &wrong_order, &[10], &ok).is_err());
    }

    #[test]
    fn jackknife_matches_block_standard_error_for_the_mean() {
        let blocks = [1.0, 2.0, 4.0, 3.0, 5.0, 2.5];
        let jk = jackknife_stderr(&blocks).unwrap();
        let n = blocks.len() as f64;
        let mean = blocks.iter().sum::<f64>() / n;
        let var = blocks.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let direct = (var / n).sqrt();
        assert!((jk - direct).abs() < 1e-12);
        assert!(jackknife_stderr(&[1.0]).is_err());
    }
}
