//! Per-step Θ maps and per-trajectory propagators.
//!
//! A trajectory is a pair of complex matrices (T, T⁺), one per field
//! sector, advanced by left multiplication with a per-step map Θ built from
//! the drift, the noise channels, and that step's Wiener increments. The
//! sectors share nothing: each has its own drift, its own channel set, and
//! its own noise draws.
//!
//! Three step forms are available. The Euler map applies everything to
//! first order, Θ = I + L·dt + Σ_a K_a δw_a. The split-step form advances
//! the kinetic term as an exact phase in the reciprocal basis and the
//! potential as an exact phase in the position basis, and applies the
//! noise between two deterministic half steps as a product of compensated
//! exponential factors exp(K_a δw_a − ½K_a²dt), one per channel. Each
//! factor has ensemble mean exactly I, so the mean propagator flow is
//! untouched, while second-moment averages pick up exactly exp(K_a⊗K_a·dt)
//! per channel instead of its first-order truncation; the scheme stays
//! weak order one overall but the noise contributes no O(dt) moment bias
//! of its own, which the ensemble tolerances rely on. The band-basis form
//! advances the whole one-body operator exactly through its
//! eigendecomposition, which admits periodic potentials at
//! machine-precision unitarity, and treats the noise the same way.

use ndarray::Array2;

use crate::discretize::StochasticModel;
use crate::error::{Error, Result};
use crate::hamiltonian::{one_body_matrix, Dispersion};
use crate::linalg::fourier::{dft_unitary, wavenumbers};
use crate::model::Potential;
use crate::wiener::{NoiseSource, WienerIncrements};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeVariant {
    EulerMaruyama,
    SplitStepFourier,
    BlochBasis,
}

/// Time-stepping recipe: which map to use, the step size, and how many
/// steps make up the full horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepScheme {
    pub variant: SchemeVariant,
    pub dt: f64,
    pub steps: usize,
}

impl StepScheme {
    pub fn horizon(&self) -> f64 {
        self.dt * self.steps as f64
    }
}

/// One trajectory's accumulated linear maps for both sectors.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPropagator {
    pub t_psi: Array2<C64>,
    pub t_psi_plus: Array2<C64>,
    pub elapsed: f64,
    pub steps: usize,
}

impl TrajectoryPropagator {
    pub fn identity(n_modes: usize) -> Self {
        TrajectoryPropagator {
            t_psi: Array2::eye(n_modes),
            t_psi_plus: Array2::eye(n_modes),
            elapsed: 0.0,
            steps: 0,
        }
    }

    /// False once noise blow-up has produced any non-finite entry; such a
    /// trajectory is excluded from ensemble averages and counted.
    pub fn is_finite(&self) -> bool {
        self.t_psi
            .iter()
            .chain(self.t_psi_plus.iter())
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

type SparseEntries = Vec<(usize, usize, C64)>;

fn sparse_entries(dense: &Array2<C64>) -> SparseEntries {
    let mut out = Vec::new();
    for ((r, c), &v) in dense.indexed_iter() {
        if v != C64::new(0.0, 0.0) {
            out.push((r, c, v));
        }
    }
    out
}

/// Euler base map I + L·dt for one sector.
fn euler_base(drift: &Array2<C64>, dt: f64) -> Array2<C64> {
    let mut theta = drift.mapv(|v| v * dt);
    for i in 0..theta.nrows() {
        theta[[i, i]] += 1.0;
    }
    theta
}

fn add_channel_noise(theta: &mut Array2<C64>, channels: &[SparseEntries], dw: &[f64]) {
    for (entries, &w) in channels.iter().zip(dw) {
        for &(r, c, v) in entries {
            theta[[r, c]] += v * w;
        }
    }
}

/// The first-order step map Θ = I + L·dt + Σ_a K_a δw_a for each sector.
pub fn theta_step(
    model: &StochasticModel,
    dt: f64,
    wiener: &WienerIncrements,
) -> Result<(Array2<C64>, Array2<C64>)> {
    let nc = model.n_channels();
    if wiener.psi.len() != nc || wiener.psi_plus.len() != nc {
        return Err(Error::config(format!(
            "wiener batch has ({}, {}) channels, model has {nc}",
            wiener.psi.len(),
            wiener.psi_plus.len()
        )));
    }
    if !dt.is_finite() || dt < 0.0 {
        return Err(Error::config(format!("step size {dt} must be finite")));
    }
    let psi_channels: Vec<SparseEntries> =
        model.channels.iter().map(sparse_entries).collect();
    let plus_channels: Vec<SparseEntries> = model
        .channels_psi_plus()
        .iter()
        .map(sparse_entries)
        .collect();
    let mut theta_psi = euler_base(&model.drift_psi(), dt);
    add_channel_noise(&mut theta_psi, &psi_channels, &wiener.psi);
    let mut theta_plus = euler_base(&model.drift_psi_plus(), dt);
    add_channel_noise(&mut theta_plus, &plus_channels, &wiener.psi_plus);
    Ok((theta_psi, theta_plus))
}

/// Precomputed per-step data shared read-only by every trajectory.
#[derive(Debug, Clone)]
pub struct StepperPlan {
    variant: SchemeVariant,
    dt: f64,
    steps: usize,
    n_modes: usize,
    kernel: StepKernel,
}

#[derive(Debug, Clone)]
enum StepKernel {
    Euler {
        /// I + L·dt per sector.
        theta_psi: Array2<C64>,
        theta_psi_plus: Array2<C64>,
        channels_psi: Vec<SparseEntries>,
        channels_psi_plus: Vec<SparseEntries>,
    },
    Lattice {
        /// Exact deterministic half-step map H per sector; a full step is
        /// H·(noise factors)·H.
        half_psi: Array2<C64>,
        half_psi_plus: Array2<C64>,
        /// H·H, used directly when there are no channels.
        full_psi: Array2<C64>,
        full_psi_plus: Array2<C64>,
        noise_psi: Vec<ChannelExp>,
        noise_psi_plus: Vec<ChannelExp>,
    },
}

/// One channel's exponential noise factor exp(K δw − ½K²dt), stored on the
/// channel's mode support so the small-block exponential stays cheap.
#[derive(Debug, Clone)]
struct ChannelExp {
    /// Modes the channel touches, ascending.
    rows: Vec<usize>,
    /// K restricted to those modes.
    block: Array2<C64>,
    /// −½K²dt on the same support, the compensator that keeps the factor's
    /// ensemble mean at exactly I.
    drift: Array2<C64>,
    /// Closed-form coefficients when the support has exactly two modes.
    two: Option<TwoModeExp>,
}

/// For a two-mode support, X(δw) = block·δw + drift splits as m·I + Y with
/// m linear in δw and Y traceless, so exp(X) = e^m(cosh(q)·I + sinhc(q)·Y)
/// with q² = −det(Y). The coefficients of m and Y in δw are fixed.
#[derive(Debug, Clone)]
struct TwoModeExp {
    m_w: C64,
    m_0: C64,
    /// (y00, y01, y10), each as the δw coefficient and the constant part.
    y_w: [C64; 3],
    y_0: [C64; 3],
}

impl ChannelExp {
    fn build(k: &Array2<C64>, dt: f64) -> Self {
        let n = k.nrows();
        let mut touched = vec![false; n];
        for ((r, c), &v) in k.indexed_iter() {
            if v != C64::new(0.0, 0.0) {
                touched[r] = true;
                touched[c] = true;
            }
        }
        let rows: Vec<usize> = (0..n).filter(|&i| touched[i]).collect();
        let b = rows.len();
        let mut block = Array2::from_elem((b, b), C64::new(0.0, 0.0));
        for (i, &r) in rows.iter().enumerate() {
            for (j, &c) in rows.iter().enumerate() {
                block[[i, j]] = k[[r, c]];
            }
        }
        let drift = block.dot(&block).mapv(|v| v * (-0.5 * dt));
        let two = (b == 2).then(|| {
            let m_w = (block[[0, 0]] + block[[1, 1]]) * 0.5;
            let m_0 = (drift[[0, 0]] + drift[[1, 1]]) * 0.5;
            TwoModeExp {
                m_w,
                m_0,
                y_w: [block[[0, 0]] - m_w, block[[0, 1]], block[[1, 0]]],
                y_0: [drift[[0, 0]] - m_0, drift[[0, 1]], drift[[1, 0]]],
            }
        });
        ChannelExp {
            rows,
            block,
            drift,
            two,
        }
    }

    /// Entries of exp(X(δw)) − I for the two-mode fast path.
    fn two_mode_factor(&self, dw: f64) -> Option<[C64; 4]> {
        let t = self.two.as_ref()?;
        let m = t.m_w * dw + t.m_0;
        let y00 = t.y_w[0] * dw + t.y_0[0];
        let y01 = t.y_w[1] * dw + t.y_0[1];
        let y10 = t.y_w[2] * dw + t.y_0[2];
        let q2 = y00 * y00 + y01 * y10;
        let em = m.exp();
        let (cosh_q, sinhc_q) = cosh_sinhc(q2);
        let diag = em * cosh_q - 1.0;
        let scale = em * sinhc_q;
        Some([
            diag + scale * y00,
            scale * y01,
            scale * y10,
            diag - scale * y00,
        ])
    }

    /// exp(block·δw + drift) − I on the support.
    fn factor_minus_identity(&self, dw: f64) -> Array2<C64> {
        if let Some([f00, f01, f10, f11]) = self.two_mode_factor(dw) {
            let mut out = Array2::from_elem((2, 2), C64::new(0.0, 0.0));
            out[[0, 0]] = f00;
            out[[0, 1]] = f01;
            out[[1, 0]] = f10;
            out[[1, 1]] = f11;
            return out;
        }
        let x = self.block.mapv(|v| v * dw) + &self.drift;
        exp_minus_identity(&x)
    }
}

/// cosh(q) and sinh(q)/q from q², through series near q = 0 where the
/// quotient loses accuracy. Both are even in q, so the branch of the square
/// root is immaterial.
fn cosh_sinhc(q2: C64) -> (C64, C64) {
    if q2.norm() < 1e-8 {
        let c = C64::new(1.0, 0.0) + q2 * 0.5 + q2 * q2 / 24.0;
        let s = C64::new(1.0, 0.0) + q2 / 6.0 + q2 * q2 / 120.0;
        (c, s)
    } else {
        let q = q2.sqrt();
        (q.cosh(), q.sinh() / q)
    }
}

/// exp(X) − I by scaled Taylor series; the subtraction is done in exact
/// arithmetic by never materializing the identity term.
fn exp_minus_identity(x: &Array2<C64>) -> Array2<C64> {
    let norm: f64 = x.iter().map(|v| v.norm()).sum();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scale = (0.5f64).powi(squarings as i32);
    let xs = x.mapv(|v| v * scale);
    // E = Σ_{k≥1} xs^k / k!, truncated once terms fall below roundoff.
    let mut e = xs.clone();
    let mut term = xs.clone();
    for k in 2..30 {
        term = term.dot(&xs).mapv(|v| v / k as f64);
        let size: f64 = term.iter().map(|v| v.norm()).sum();
        e += &term;
        if size < 1e-18 {
            break;
        }
    }
    // exp(2X) − I = E² + 2E for E = exp(X) − I.
    for _ in 0..squarings {
        let sq = e.dot(&e);
        e.mapv_inplace(|v| v * 2.0);
        e += &sq;
    }
    e
}

fn require_periodic_potentials(model: &StochasticModel, what: &str) -> Result<()> {
    for kind in &model.potential_kinds {
        match kind {
            Potential::Zero | Potential::SinSq { .. } => {}
            other => {
                return Err(Error::validation(format!(
                    "{what} stepping needs a zero or lattice-periodic potential, \
                     got {other:?}"
                )))
            }
        }
    }
    Ok(())
}

/// Exact one-step kinetic-then-potential map for one component block.
fn split_step_block(model: &StochasticModel, component: usize, dt: f64) -> Array2<C64> {
    let m = model.grid.n_points();
    let f = dft_unitary(m);
    let ks = wavenumbers(m, model.grid.dx());
    // F† · diag(e^{−i ħk²/2m · dt/ħ}) · F, then the potential phase rowwise.
    let mut g = Array2::from_elem((m, m), C64::new(0.0, 0.0));
    for r in 0..m {
        for c in 0..m {
            let mut acc = C64::new(0.0, 0.0);
            for (nu, &k) in ks.iter().enumerate() {
                let energy = model.hbar * model.hbar * k * k / (2.0 * model.mass);
                let phase = C64::new(0.0, -energy * dt / model.hbar).exp();
                acc += f[[nu, r]].conj() * phase * f[[nu, c]];
            }
            g[[r, c]] = acc;
        }
    }
    for r in 0..m {
        let phase = C64::new(0.0, -model.potentials[component][r] * dt / model.hbar).exp();
        for c in 0..m {
            g[[r, c]] *= phase;
        }
    }
    g
}

fn assemble_blocks(blocks: &[Array2<C64>]) -> Array2<C64> {
    let m = blocks[0].nrows();
    let n = blocks.len() * m;
    let mut out = Array2::from_elem((n, n), C64::new(0.0, 0.0));
    for (alpha, b) in blocks.iter().enumerate() {
        for r in 0..m {
            for c in 0..m {
                out[[alpha * m + r, alpha * m + c]] = b[[r, c]];
            }
        }
    }
    out
}

/// Deterministic map over time `dt` for the two lattice variants,
/// block-diagonal across components.
fn lattice_step_map(
    model: &StochasticModel,
    variant: SchemeVariant,
    dt: f64,
) -> Result<Array2<C64>> {
    match variant {
        SchemeVariant::SplitStepFourier => {
            require_periodic_potentials(model, "split-step")?;
            let blocks: Vec<_> = (0..model.n_components)
                .map(|alpha| split_step_block(model, alpha, dt))
                .collect();
            Ok(assemble_blocks(&blocks))
        }
        SchemeVariant::BlochBasis => {
            require_periodic_potentials(model, "band-basis")?;
            let mut blocks = Vec::with_capacity(model.n_components);
            for kind in &model.potential_kinds {
                let h = one_body_matrix(
                    &model.grid,
                    model.hbar,
                    model.mass,
                    kind,
                    Dispersion::Fourier,
                )?;
                blocks.push(crate::onebody::propagator_real(&h, model.hbar, dt)?);
            }
            Ok(assemble_blocks(&blocks))
        }
        SchemeVariant::EulerMaruyama => unreachable!("euler has no lattice map"),
    }
}

impl StepperPlan {
    pub fn new(model: &StochasticModel, scheme: &StepScheme) -> Result<Self> {
        if !(scheme.dt > 0.0 && scheme.dt.is_finite()) {
            return Err(Error::config(format!(
                "step size {} must be positive",
                scheme.dt
            )));
        }
        if scheme.steps == 0 {
            return Err(Error::config("step count must be at least 1"));
        }
        let kernel = match scheme.variant {
            SchemeVariant::EulerMaruyama => {
                let theta_psi = euler_base(&model.drift_psi(), scheme.dt);
                StepKernel::Euler {
                    // The drift conjugates cleanly because the one-body
                    // operator is real in the position basis.
                    theta_psi_plus: theta_psi.mapv(|v| v.conj()),
                    theta_psi,
                    channels_psi: model.channels.iter().map(sparse_entries).collect(),
                    channels_psi_plus: model
                        .channels_psi_plus()
                        .iter()
                        .map(sparse_entries)
                        .collect(),
                }
            }
            SchemeVariant::SplitStepFourier | SchemeVariant::BlochBasis => {
                let half_psi = lattice_step_map(model, scheme.variant, 0.5 * scheme.dt)?;
                let half_psi_plus = half_psi.mapv(|v| v.conj());
                let full_psi = half_psi.dot(&half_psi);
                StepKernel::Lattice {
                    full_psi_plus: full_psi.mapv(|v| v.conj()),
                    full_psi,
                    noise_psi: model
                        .channels
                        .iter()
                        .map(|k| ChannelExp::build(k, scheme.dt))
                        .collect(),
                    noise_psi_plus: model
                        .channels_psi_plus()
                        .iter()
                        .map(|k| ChannelExp::build(k, scheme.dt))
                        .collect(),
                    half_psi,
                    half_psi_plus,
                }
            }
        };
        Ok(StepperPlan {
            variant: scheme.variant,
            dt: scheme.dt,
            steps: scheme.steps,
            n_modes: model.n_modes(),
            kernel,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_channels(&self) -> usize {
        match &self.kernel {
            StepKernel::Euler { channels_psi, .. } => channels_psi.len(),
            StepKernel::Lattice { noise_psi, .. } => noise_psi.len(),
        }
    }

    pub fn variant(&self) -> SchemeVariant {
        self.variant
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Advance one step in place.
    pub fn step(&self, prop: &mut TrajectoryPropagator, wiener: &WienerIncrements) -> Result<()> {
        let nc = self.n_channels();
        if wiener.psi.len() != nc || wiener.psi_plus.len() != nc {
            return Err(Error::config(format!(
                "wiener batch has ({}, {}) channels, stepper has {nc}",
                wiener.psi.len(),
                wiener.psi_plus.len()
            )));
        }
        match &self.kernel {
            StepKernel::Euler {
                theta_psi,
                theta_psi_plus,
                channels_psi,
                channels_psi_plus,
            } => {
                prop.t_psi = euler_sector_step(theta_psi, channels_psi, &wiener.psi, &prop.t_psi);
                prop.t_psi_plus = euler_sector_step(
                    theta_psi_plus,
                    channels_psi_plus,
                    &wiener.psi_plus,
                    &prop.t_psi_plus,
                );
            }
            StepKernel::Lattice {
                half_psi,
                half_psi_plus,
                full_psi,
                full_psi_plus,
                noise_psi,
                noise_psi_plus,
            } => {
                prop.t_psi =
                    lattice_sector_step(half_psi, full_psi, noise_psi, &wiener.psi, &prop.t_psi);
                prop.t_psi_plus = lattice_sector_step(
                    half_psi_plus,
                    full_psi_plus,
                    noise_psi_plus,
                    &wiener.psi_plus,
                    &prop.t_psi_plus,
                );
            }
        }
        prop.steps += 1;
        prop.elapsed = prop.steps as f64 * self.dt;
        Ok(())
    }
}

/// Θ·T with Θ assembled first, so a single step reproduces theta_step
/// exactly.
fn euler_sector_step(
    theta_base: &Array2<C64>,
    channels: &[SparseEntries],
    dw: &[f64],
    t: &Array2<C64>,
) -> Array2<C64> {
    let mut theta = theta_base.clone();
    add_channel_noise(&mut theta, channels, dw);
    theta.dot(t)
}

/// Half step, each channel's exponential noise factor in listed order,
/// half step. The factors act on their own mode support only, so the update
/// touches a block of rows per channel.
fn lattice_sector_step(
    half: &Array2<C64>,
    full: &Array2<C64>,
    noise: &[ChannelExp],
    dw: &[f64],
    t: &Array2<C64>,
) -> Array2<C64> {
    if noise.is_empty() {
        return full.dot(t);
    }
    let mut ht = half.dot(t);
    let ncols = ht.ncols();
    let mut gathered: Vec<C64> = Vec::new();
    for (ch, &w) in noise.iter().zip(dw) {
        if let Some([f00, f01, f10, f11]) = ch.two_mode_factor(w) {
            let (r0, r1) = (ch.rows[0], ch.rows[1]);
            for j in 0..ncols {
                let u = ht[[r0, j]];
                let v = ht[[r1, j]];
                ht[[r0, j]] = u + f00 * u + f01 * v;
                ht[[r1, j]] = v + f10 * u + f11 * v;
            }
            continue;
        }
        let y = ch.factor_minus_identity(w);
        let b = ch.rows.len();
        gathered.clear();
        gathered.resize(b * ncols, C64::new(0.0, 0.0));
        for (i, &r) in ch.rows.iter().enumerate() {
            for j in 0..ncols {
                gathered[i * ncols + j] = ht[[r, j]];
            }
        }
        for (i, &r) in ch.rows.iter().enumerate() {
            for j in 0..ncols {
                let mut acc = C64::new(0.0, 0.0);
                for (c, chunk) in gathered.chunks_exact(ncols).enumerate() {
                    acc += y[[i, c]] * chunk[j];
                }
                ht[[r, j]] += acc;
            }
        }
    }
    half.dot(&ht)
}

fn empty_increments() -> WienerIncrements {
    WienerIncrements {
        psi: Vec::new(),
        psi_plus: Vec::new(),
    }
}

/// Run one trajectory over the full horizon.
pub fn propagate_trajectory(
    plan: &StepperPlan,
    noise: &NoiseSource,
    trajectory: u64,
) -> Result<TrajectoryPropagator> {
    let mut out = propagate_with_snapshots(plan, noise, trajectory, &[plan.steps])?;
    Ok(out.pop().expect("one snapshot requested"))
}

/// Run one trajectory, cloning the propagator after each listed step count.
/// Snapshot steps must be strictly increasing and end at or before the
/// scheme's step total. Once an entry goes non-finite the remaining
/// snapshots repeat the divergent state.
pub fn propagate_with_snapshots(
    plan: &StepperPlan,
    noise: &NoiseSource,
    trajectory: u64,
    snapshot_steps: &[usize],
) -> Result<Vec<TrajectoryPropagator>> {
    if snapshot_steps.is_empty() {
        return Err(Error::config("at least one snapshot step is required"));
    }
    for w in snapshot_steps.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::config("snapshot steps must be strictly increasing"));
        }
    }
    let last = *snapshot_steps.last().unwrap();
    if last > plan.steps {
        return Err(Error::config(format!(
            "snapshot step {last} beyond scheme total {}",
            plan.steps
        )));
    }
    let mut prop = TrajectoryPropagator::identity(plan.n_modes);
    let mut snapshots = Vec::with_capacity(snapshot_steps.len());
    let mut next = 0usize;
    let mut diverged = false;
    for step in 0..last {
        if !diverged {
            let w = if plan.n_channels() == 0 {
                empty_increments()
            } else {
                noise.increments(trajectory, step as u64, plan.n_channels(), plan.dt)?
            };
            plan.step(&mut prop, &w)?;
            if !prop.is_finite() {
                diverged = true;
            }
        } else {
            prop.steps += 1;
            prop.elapsed = prop.steps as f64 * plan.dt;
        }
        while next < snapshot_steps.len() && snapshot_steps[next] == step + 1 {
            snapshots.push(prop.clone());
            next += 1;
        }
    }
    Ok(snapshots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::discretize_two_component;
    use crate::grid::Grid;
    use crate::model::TwoComponentModel;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn gas(m: usize, dx: f64, g: f64, potentials: [Potential; 2]) -> StochasticModel {
        let model = TwoComponentModel {
            grid: Grid::new(m, dx).unwrap(),
            hbar: 1.0,
            mass: 1.0,
            coupling: g,
            potentials,
        };
        discretize_two_component(&model).unwrap()
    }

    fn zeros_batch(n: usize) -> WienerIncrements {
        WienerIncrements {
            psi: vec![0.0; n],
            psi_plus: vec![0.0; n],
        }
    }

    #[test]
    fn theta_reduces_to_identity_at_zero_dt() {
        let sm = gas(2, 0.5, 0.4, [Potential::Zero, Potential::Zero]);
        let (tp, tm) = theta_step(&sm, 0.0, &zeros_batch(sm.n_channels())).unwrap();
        for r in 0..4 {
            for q in 0..4 {
                let want = if r == q { 1.0 } else { 0.0 };
                assert_eq!(tp[[r, q]], c(want, 0.0));
                assert_eq!(tm[[r, q]], c(want, 0.0));
            }
        }
    }

    #[test]
    fn noise_free_theta_is_one_body_euler_map() {
        let sm = gas(
            2,
            0.5,
            0.0,
            [Potential::Table(vec![0.1, 0.2]), Potential::Zero],
        );
        let dt = 1e-3;
        let (tp, _) = theta_step(&sm, dt, &zeros_batch(0)).unwrap();
        let hop = 1.0 / (2.0 * 0.25);
        assert!((tp[[0, 0]] - (c(1.0, 0.0) + c(0.0, -dt) * (2.0 * hop + 0.1))).norm() < 1e-15);
        assert!((tp[[0, 1]] - c(0.0, -dt) * (-2.0 * hop)).norm() < 1e-15);
        assert_eq!(tp[[0, 2]], c(0.0, 0.0));
    }

    #[test]
    fn mean_theta_approaches_deterministic_map() {
        let sm = gas(1, 1.0, 0.8, [Potential::Zero, Potential::Zero]);
        let noise = NoiseSource::new(99);
        let dt = 1e-2;
        let n = 100_000u64;
        let mut mean = Array2::from_elem((2, 2), c(0.0, 0.0));
        for traj in 0..n {
            let w = noise.increments(traj, 0, sm.n_channels(), dt).unwrap();
            let (tp, _) = theta_step(&sm, dt, &w).unwrap();
            mean += &tp;
        }
        mean.mapv_inplace(|v| v / n as f64);
        let base = euler_base(&sm.drift_psi(), dt);
        let amp = (0.8f64 / 2.0).sqrt();
        let tol = 5.0 * amp * (dt / n as f64).sqrt();
        for r in 0..2 {
            for q in 0..2 {
                let d = mean[[r, q]] - base[[r, q]];
                assert!(d.re.abs() < tol && d.im.abs() < tol, "entry ({r},{q}): {d}");
            }
        }
    }

    #[test]
    fn single_euler_step_equals_theta() {
        let sm = gas(2, 0.5, 0.6, [Potential::Zero, Potential::Zero]);
        let scheme = StepScheme {
            variant: SchemeVariant::EulerMaruyama,
            dt: 1e-3,
            steps: 1,
        };
        let plan = StepperPlan::new(&sm, &scheme).unwrap();
        let noise = NoiseSource::new(5);
        let prop = propagate_trajectory(&plan, &noise, 0).unwrap();
        let w = noise.increments(0, 0, sm.n_channels(), 1e-3).unwrap();
        let (tp, tm) = theta_step(&sm, 1e-3, &w).unwrap();
        assert_eq!(prop.t_psi, tp);
        assert_eq!(prop.t_psi_plus, tm);
        assert_eq!(prop.steps, 1);
    }

    #[test]
    fn free_split_step_is_diagonal_in_k_and_unitary() {
        let sm = gas(8, 0.7, 0.0, [Potential::Zero, Potential::Zero]);
        let scheme = StepScheme {
            variant: SchemeVariant::SplitStepFourier,
            dt: 5e-2,
            steps: 40,
        };
        let plan = StepperPlan::new(&sm, &scheme).unwrap();
        let prop = propagate_trajectory(&plan, &NoiseSource::new(0), 0).unwrap();
        let t = &prop.t_psi;
        // Unitarity.
        let th = t.t().mapv(|v: C64| v.conj());
        let prod = th.dot(t);
        for r in 0..16 {
            for q in 0..16 {
                let want = if r == q { 1.0 } else { 0.0 };
                assert!((prod[[r, q]] - c(want, 0.0)).norm() < 1e-12);
            }
        }
        // Diagonal in the reciprocal basis with the exact free phases,
        // blockwise per component.
        let f = dft_unitary(8);
        let ks = wavenumbers(8, 0.7);
        let horizon = scheme.horizon();
        for alpha in 0..2 {
            let block = t.slice(ndarray::s![
                alpha * 8..(alpha + 1) * 8,
                alpha * 8..(alpha + 1) * 8
            ]);
            let fk = f.dot(&block.dot(&f.t().mapv(|v: C64| v.conj())));
            for (nu, &k) in ks.iter().enumerate() {
                let want = C64::new(0.0, -k * k / 2.0 * horizon).exp();
                for mu in 0..8 {
                    let have = fk[[nu, mu]];
                    if mu == nu {
                        assert!((have - want).norm() < 1e-12);
                    } else {
                        assert!(have.norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn euler_error_against_split_step_scales_linearly_in_dt() {
        // Put the spectral dispersion into the first-order model too, so
        // both step maps share one generator and the difference is pure
        // time-stepping error.
        let run = |dt: f64| -> f64 {
            let mut sm = gas(4, 0.8, 0.0, [Potential::Zero, Potential::Zero]);
            let grid = Grid::new(4, 0.8).unwrap();
            let hf =
                one_body_matrix(&grid, 1.0, 1.0, &Potential::Zero, Dispersion::Fourier).unwrap();
            for alpha in 0..2 {
                for r in 0..4 {
                    for q in 0..4 {
                        sm.one_body[[alpha * 4 + r, alpha * 4 + q]] = hf[[r, q]];
                    }
                }
            }
            let steps = (0.2 / dt).round() as usize;
            let euler = StepperPlan::new(
                &sm,
                &StepScheme {
                    variant: SchemeVariant::EulerMaruyama,
                    dt,
                    steps,
                },
            )
            .unwrap();
            let split = StepperPlan::new(
                &sm,
                &StepScheme {
                    variant: SchemeVariant::SplitStepFourier,
                    dt,
                    steps,
                },
            )
            .unwrap();
            let noise = NoiseSource::new(1);
            let a = propagate_trajectory(&euler, &noise, 0).unwrap();
            let b = propagate_trajectory(&split, &noise, 0).unwrap();
            (&a.t_psi - &b.t_psi)
                .iter()
                .map(|v| v.norm_sqr())
                .sum::<f64>()
                .sqrt()
        };
        let coarse = run(2e-3);
        let fine = run(1e-3);
        let ratio = coarse / fine;
        assert!(
            (1.4..=2.6).contains(&ratio),
            "error ratio {ratio} (coarse {coarse}, fine {fine})"
        );
    }

    #[test]
    fn band_basis_step_is_exact_for_lattice_potential() {
        let pot = Potential::SinSq {
            v0: 1.3,
            k_lattice: 2.0 * std::f64::consts::PI / (4.0 * 0.5),
        };
        let sm = gas(4, 0.5, 0.0, [pot.clone(), pot.clone()]);
        let scheme = StepScheme {
            variant: SchemeVariant::BlochBasis,
            dt: 1e-2,
            steps: 30,
        };
        let plan = StepperPlan::new(&sm, &scheme).unwrap();
        let prop = propagate_trajectory(&plan, &NoiseSource::new(0), 0).unwrap();
        let h = one_body_matrix(&sm.grid, 1.0, 1.0, &pot, Dispersion::Fourier).unwrap();
        let exact = crate::onebody::propagator_real(&h, 1.0, scheme.horizon()).unwrap();
        for r in 0..4 {
            for q in 0..4 {
                assert!((prop.t_psi[[r, q]] - exact[[r, q]]).norm() < 1e-12);
                assert!((prop.t_psi_plus[[r, q]] - exact[[r, q]].conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn lattice_step_places_exponential_noise_between_half_steps() {
        let sm = gas(2, 1.0, 0.7, [Potential::Zero, Potential::Zero]);
        let dt = 2e-3;
        for variant in [SchemeVariant::SplitStepFourier, SchemeVariant::BlochBasis] {
            let plan = StepperPlan::new(
                &sm,
                &StepScheme {
                    variant,
                    dt,
                    steps: 1,
                },
            )
            .unwrap();
            let noise = NoiseSource::new(21);
            let prop = propagate_trajectory(&plan, &noise, 0).unwrap();
            let w = noise.increments(0, 0, sm.n_channels(), dt).unwrap();
            let half = lattice_step_map(&sm, variant, 0.5 * dt).unwrap();
            let half_plus = half.mapv(|v| v.conj());
            // Product of full-size factors exp(Kδw − ½K²dt), first channel
            // applied first.
            let kick = |channels: &[Array2<C64>], dw: &[f64]| {
                let mut out = Array2::<C64>::eye(sm.n_modes());
                for (k, &wv) in channels.iter().zip(dw) {
                    let x = k.mapv(|v| v * wv) + &k.dot(k).mapv(|v| v * (-0.5 * dt));
                    let factor = exp_minus_identity(&x) + Array2::<C64>::eye(sm.n_modes());
                    out = factor.dot(&out);
                }
                out
            };
            let want_psi = half.dot(&kick(&sm.channels, &w.psi)).dot(&half);
            let want_plus = half_plus
                .dot(&kick(&sm.channels_psi_plus(), &w.psi_plus))
                .dot(&half_plus);
            for r in 0..4 {
                for q in 0..4 {
                    assert!(
                        (prop.t_psi[[r, q]] - want_psi[[r, q]]).norm() < 1e-13,
                        "{variant:?} psi ({r},{q})"
                    );
                    assert!(
                        (prop.t_psi_plus[[r, q]] - want_plus[[r, q]]).norm() < 1e-13,
                        "{variant:?} psi_plus ({r},{q})"
                    );
                }
            }
        }
    }

    #[test]
    fn exponential_noise_factor_mean_is_identity() {
        // E[exp(Kδw − ½K²dt)] = I exactly, because K and K² commute and a
        // Gaussian δw has E[exp(cδw)] = exp(½c²dt) along every eigendirection.
        let sm = gas(1, 1.0, 0.9, [Potential::Zero, Potential::Zero]);
        let dt = 4e-2;
        let ch = ChannelExp::build(&sm.channels[0], dt);
        let noise = NoiseSource::new(3);
        let n = 200_000u64;
        let mut mean = Array2::from_elem((2, 2), c(0.0, 0.0));
        for traj in 0..n {
            let w = noise.increments(traj, 0, sm.n_channels(), dt).unwrap();
            mean += &ch.factor_minus_identity(w.psi[0]);
        }
        mean.mapv_inplace(|v| v / n as f64);
        let amp = (0.9f64 / 2.0).sqrt();
        let tol = 5.0 * amp * (dt / n as f64).sqrt();
        for r in 0..2 {
            for q in 0..2 {
                assert!(
                    mean[[r, q]].norm() < tol,
                    "({r},{q}): {} vs tol {tol}",
                    mean[[r, q]]
                );
            }
        }
    }

    #[test]
    fn trajectories_are_deterministic_and_distinct() {
        let sm = gas(2, 1.0, 0.5, [Potential::Zero, Potential::Zero]);
        let scheme = StepScheme {
            variant: SchemeVariant::EulerMaruyama,
            dt: 1e-3,
            steps: 50,
        };
        let plan = StepperPlan::new(&sm, &scheme).unwrap();
        let noise = NoiseSource::new(7);
        let a = propagate_trajectory(&plan, &noise, 3).unwrap();
        let b = propagate_trajectory(&plan, &noise, 3).unwrap();
        assert_eq!(a, b);
        let other = propagate_trajectory(&plan, &noise, 4).unwrap();
        assert_ne!(a.t_psi, other.t_psi);
    }

    #[test]
    fn snapshots_compose_with_full_run() {
        let sm = gas(2, 1.0, 0.5, [Potential::Zero, Potential::Zero]);
        let scheme = StepScheme {
            variant: SchemeVariant::EulerMaruyama,
            dt: 1e-3,
            steps: 40,
        };
        let plan = StepperPlan::new(&sm, &scheme).unwrap();
        let noise = NoiseSource::new(11);
        let snaps = propagate_with_snapshots(&plan, &noise, 2, &[10, 40]).unwrap();
        assert_eq!(snaps.len(), 2);
        assert_eq!(snaps[0].steps, 10);
        assert!((snaps[0].elapsed - 0.01).abs() < 1e-15);
        let full = propagate_trajectory(&plan, &noise, 2).unwrap();
        assert_eq!(snaps[1], full);
        assert!(propagate_with_snapshots(&plan, &noise, 2, &[10, 10]).is_err());
        assert!(propagate_with_snapshots(&plan, &noise, 2, &[41]).is_err());
    }

    #[test]
    fn lattice_schemes_reject_nonperiodic_potentials() {
        let sm = gas(
            4,
            0.5,
            0.0,
            [
                Potential::Harmonic {
                    strength: 1.0,
                    center: 1.0,
                },
                Potential::Zero,
            ],
        );
        for variant in [SchemeVariant::SplitStepFourier, SchemeVariant::BlochBasis] {
            let scheme = StepScheme {
                variant,
                dt: 1e-3,
                steps: 10,
            };
            assert!(StepperPlan::new(&sm, &scheme).is_err());
        }
        let euler = StepScheme {
            variant: SchemeVariant::EulerMaruyama,
            dt: 1e-3,
            steps: 10,
        };
        assert!(StepperPlan::new(&sm, &euler).is_ok());
    }
}
