//! TOML experiment description: schema, validation, and construction of the
//! library objects a run needs.
//!
//! Section layout mirrors the pipeline: `[model]` and `[grid]` fix the
//! physics, `[scheme]` the time stepping, `[ensemble]` the sampling,
//! `[initial]` the state, `[[observables]]` what gets recorded, `[output]`
//! where results land. The ensemble seed is mandatory so a config file
//! always pins its noise stream; reruns of the same file are bitwise
//! reproducible.

use std::env;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use fermiphase::discretize::{
    discretize_multi_component, discretize_two_component, StochasticModel,
};
use fermiphase::grid::Grid;
use fermiphase::hamiltonian::{one_body_matrix, Dispersion, ModeHamiltonian};
use fermiphase::model::{
    InteractionKernel, MultiComponentModel, Potential, TwoComponentModel,
};
use fermiphase::moments::MomentTensor;
use fermiphase::observables::{ModeLayout, Observable};
use fermiphase::oracle::{fock_state_density, slater_density};
use fermiphase::propagate::{SchemeVariant, StepScheme, StepperPlan};
use fermiphase::C64;

use crate::error::{CliError, CliResult};

/// Environment variable overriding `[ensemble] workers`.
pub const WORKERS_ENV: &str = "FERMIPHASE_WORKERS";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub scheme: SchemeConfig,
    pub ensemble: EnsembleConfig,
    pub initial: InitialConfig,
    pub observables: Vec<ObservableConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelConfig {
    /// Spin-½ contact gas: two components with an interspecies coupling g.
    TwoComponent {
        hbar: f64,
        mass: f64,
        coupling: f64,
        potentials: Vec<PotentialConfig>,
    },
    /// General multi-component gas with a two-body kernel.
    MultiComponent {
        hbar: f64,
        mass: f64,
        n_components: usize,
        potentials: Vec<PotentialConfig>,
        kernel: KernelConfig,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialConfig {
    Zero,
    Harmonic { strength: f64, center: f64 },
    SinSq { v0: f64, k_lattice: f64 },
    Table { values: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelConfig {
    /// Contact interaction between distinct components.
    ZeroRange { strength: f64 },
    /// Contact interaction including same-component terms (which drop out
    /// for fermions but exercise the direct channel assembly).
    ZeroRangeDirect { strength: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub points: usize,
    pub dx: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeVariantConfig {
    EulerMaruyama,
    SplitStepFourier,
    BlochBasis,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub variant: SchemeVariantConfig,
    pub dt: f64,
    pub steps: usize,
    /// Step counts after which observables are recorded; strictly
    /// ascending, each between 1 and `steps`.
    pub checkpoints: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub trajectories: usize,
    /// Master seed for the counter-addressed noise streams. Required: runs
    /// never pick one implicitly.
    pub seed: u64,
    #[serde(default = "default_ceiling")]
    pub divergence_ceiling: f64,
    /// Worker threads; 0 lets the runtime decide. The FERMIPHASE_WORKERS
    /// environment variable overrides this field.
    #[serde(default)]
    pub workers: usize,
}

fn default_ceiling() -> f64 {
    0.01
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialConfig {
    /// Fock state with the listed (component, point) slots occupied.
    Fock { occupied: Vec<(usize, usize)> },
    /// Slater determinant; one inner list per orbital, one [re, im] pair
    /// per composite mode (component-major).
    Slater { orbitals: Vec<Vec<(f64, f64)>> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObservableConfig {
    pub id: String,
    #[serde(flatten)]
    pub spec: ObservableSpecConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ObservableSpecConfig {
    PositionPopulation { slots: Vec<(usize, usize)> },
    PositionCoherence { bra: Vec<(usize, usize)>, ket: Vec<(usize, usize)> },
    MomentumCoherence { bra: Vec<(usize, i64)>, ket: Vec<(usize, i64)> },
    TotalPopulation { order: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
    #[serde(default)]
    pub plot: bool,
}

fn default_dir() -> String {
    "out".to_string()
}

fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Csv, OutputFormat::Json]
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            formats: default_formats(),
            plot: false,
        }
    }
}

/// Read and parse a config file. Returns the parsed config together with
/// the SHA-256 of the raw file bytes, which stamps every result table.
pub fn load_config(path: &Path) -> CliResult<(ExperimentConfig, String)> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|e| CliError::validation(format!("{}: not UTF-8: {e}", path.display())))?;
    let config: ExperimentConfig = toml::from_str(&text)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok((config, hex(&hasher.finalize())))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl ExperimentConfig {
    pub fn n_components(&self) -> usize {
        match &self.model {
            ModelConfig::TwoComponent { .. } => 2,
            ModelConfig::MultiComponent { n_components, .. } => *n_components,
        }
    }

    pub fn layout(&self) -> ModeLayout {
        ModeLayout {
            n_components: self.n_components(),
            n_points: self.grid.points,
        }
    }

    /// Checkpoint times in physical units.
    pub fn times(&self) -> Vec<f64> {
        self.scheme
            .checkpoints
            .iter()
            .map(|&s| s as f64 * self.scheme.dt)
            .collect()
    }

    /// Effective worker count: environment variable first, then the config
    /// field.
    pub fn workers(&self) -> CliResult<usize> {
        match env::var(WORKERS_ENV) {
            Ok(v) => v.trim().parse().map_err(|_| {
                CliError::validation(format!("{WORKERS_ENV}={v:?} is not a worker count"))
            }),
            Err(_) => Ok(self.ensemble.workers),
        }
    }

    /// Kinetic representation the configured scheme actually integrates:
    /// the first-order stepper uses the second-difference stencil, the two
    /// spectral steppers the exact periodic dispersion. The reference
    /// solver must diagonalize the matching one-body operator for the
    /// comparison to test sampling rather than discretization choice.
    pub fn dispersion(&self) -> Dispersion {
        match self.scheme.variant {
            SchemeVariantConfig::EulerMaruyama => Dispersion::Stencil,
            SchemeVariantConfig::SplitStepFourier | SchemeVariantConfig::BlochBasis => {
                Dispersion::Fourier
            }
        }
    }
}

impl PotentialConfig {
    pub fn to_potential(&self) -> Potential {
        match self {
            PotentialConfig::Zero => Potential::Zero,
            PotentialConfig::Harmonic { strength, center } => Potential::Harmonic {
                strength: *strength,
                center: *center,
            },
            PotentialConfig::SinSq { v0, k_lattice } => Potential::SinSq {
                v0: *v0,
                k_lattice: *k_lattice,
            },
            PotentialConfig::Table { values } => Potential::Table(values.clone()),
        }
    }
}

impl SchemeConfig {
    pub fn to_scheme(&self) -> StepScheme {
        let variant = match self.variant {
            SchemeVariantConfig::EulerMaruyama => SchemeVariant::EulerMaruyama,
            SchemeVariantConfig::SplitStepFourier => SchemeVariant::SplitStepFourier,
            SchemeVariantConfig::BlochBasis => SchemeVariant::BlochBasis,
        };
        StepScheme {
            variant,
            dt: self.dt,
            steps: self.steps,
        }
    }

    fn validate(&self) -> CliResult<()> {
        if self.checkpoints.is_empty() {
            return Err(CliError::validation(
                "scheme.checkpoints: at least one checkpoint is required",
            ));
        }
        for w in self.checkpoints.windows(2) {
            if w[1] <= w[0] {
                return Err(CliError::validation(format!(
                    "scheme.checkpoints: must be strictly ascending, got {} after {}",
                    w[1], w[0]
                )));
            }
        }
        let first = self.checkpoints[0];
        let last = *self.checkpoints.last().unwrap();
        if first == 0 {
            return Err(CliError::validation(
                "scheme.checkpoints: checkpoints start at step 1",
            ));
        }
        if last > self.steps {
            return Err(CliError::validation(format!(
                "scheme.checkpoints: checkpoint {last} beyond scheme.steps = {}",
                self.steps
            )));
        }
        Ok(())
    }
}

fn build_grid(grid: &GridConfig) -> CliResult<Grid> {
    Grid::new(grid.points, grid.dx)
        .map_err(|e| CliError::from(e).context("grid"))
}

/// Discretize the configured model into stochastic trajectory form.
pub fn build_stochastic(config: &ExperimentConfig) -> CliResult<StochasticModel> {
    let grid = build_grid(&config.grid)?;
    match &config.model {
        ModelConfig::TwoComponent {
            hbar,
            mass,
            coupling,
            potentials,
        } => {
            if potentials.len() != 2 {
                return Err(CliError::validation(format!(
                    "model.potentials: two-component model needs exactly 2 potentials, got {}",
                    potentials.len()
                )));
            }
            let model = TwoComponentModel {
                grid,
                hbar: *hbar,
                mass: *mass,
                coupling: *coupling,
                potentials: [potentials[0].to_potential(), potentials[1].to_potential()],
            };
            discretize_two_component(&model).map_err(|e| CliError::from(e).context("model"))
        }
        ModelConfig::MultiComponent {
            hbar,
            mass,
            n_components,
            potentials,
            kernel,
        } => {
            let k = match kernel {
                KernelConfig::ZeroRange { strength } => {
                    InteractionKernel::zero_range(*strength, *n_components, &grid)
                }
                KernelConfig::ZeroRangeDirect { strength } => {
                    InteractionKernel::zero_range_direct(*strength, *n_components, &grid)
                }
            }
            .map_err(|e| CliError::from(e).context("model.kernel"))?;
            let model = MultiComponentModel {
                grid,
                hbar: *hbar,
                mass: *mass,
                n_components: *n_components,
                potentials: potentials.iter().map(|p| p.to_potential()).collect(),
                kernel: k,
            };
            discretize_multi_component(&model).map_err(|e| CliError::from(e).context("model"))
        }
    }
}

/// Initial Slater orbitals as columns of an n_modes × p matrix.
pub fn build_orbitals(config: &ExperimentConfig) -> CliResult<Array2<C64>> {
    let layout = config.layout();
    let n_modes = layout.n_modes();
    match &config.initial {
        InitialConfig::Fock { occupied } => {
            if occupied.is_empty() {
                return Err(CliError::validation(
                    "initial.occupied: at least one occupied slot is required",
                ));
            }
            let mut orbitals = Array2::from_elem((n_modes, occupied.len()), C64::new(0.0, 0.0));
            let mut seen = vec![false; n_modes];
            for (col, &(component, point)) in occupied.iter().enumerate() {
                let mode = layout
                    .composite(component, point)
                    .map_err(|e| CliError::from(e).context("initial.occupied"))?;
                if seen[mode] {
                    return Err(CliError::validation(format!(
                        "initial.occupied: slot ({component}, {point}) listed twice"
                    )));
                }
                seen[mode] = true;
                orbitals[[mode, col]] = C64::new(1.0, 0.0);
            }
            Ok(orbitals)
        }
        InitialConfig::Slater { orbitals } => {
            if orbitals.is_empty() {
                return Err(CliError::validation(
                    "initial.orbitals: at least one orbital is required",
                ));
            }
            let p = orbitals.len();
            let mut out = Array2::from_elem((n_modes, p), C64::new(0.0, 0.0));
            for (col, orbital) in orbitals.iter().enumerate() {
                if orbital.len() != n_modes {
                    return Err(CliError::validation(format!(
                        "initial.orbitals[{col}]: {} entries for {n_modes} modes",
                        orbital.len()
                    )));
                }
                for (mode, &(re, im)) in orbital.iter().enumerate() {
                    out[[mode, col]] = C64::new(re, im);
                }
            }
            Ok(out)
        }
    }
}

/// Observables in config order, ids checked unique.
pub fn build_observables(
    config: &ExperimentConfig,
) -> CliResult<Vec<(String, Observable)>> {
    if config.observables.is_empty() {
        return Err(CliError::validation(
            "observables: at least one observable is required",
        ));
    }
    let layout = config.layout();
    let mut out = Vec::with_capacity(config.observables.len());
    for (i, oc) in config.observables.iter().enumerate() {
        if oc.id.is_empty() {
            return Err(CliError::validation(format!(
                "observables[{i}].id: empty id"
            )));
        }
        if out.iter().any(|(id, _)| id == &oc.id) {
            return Err(CliError::validation(format!(
                "observables[{i}].id: duplicate id {:?}",
                oc.id
            )));
        }
        let obs = match &oc.spec {
            ObservableSpecConfig::PositionPopulation { slots } => Observable::PositionPopulation {
                slots: slots.clone(),
            },
            ObservableSpecConfig::PositionCoherence { bra, ket } => Observable::PositionCoherence {
                bra: bra.clone(),
                ket: ket.clone(),
            },
            ObservableSpecConfig::MomentumCoherence { bra, ket } => Observable::MomentumCoherence {
                bra: bra.clone(),
                ket: ket.clone(),
            },
            ObservableSpecConfig::TotalPopulation { order } => {
                Observable::TotalPopulation { order: *order }
            }
        };
        obs.validate(&layout)
            .map_err(|e| CliError::from(e).context(format!("observables[{i}] ({})", oc.id)))?;
        out.push((oc.id.clone(), obs));
    }
    Ok(out)
}

/// Everything a stochastic run needs, built and cross-checked.
#[derive(Debug)]
pub struct BuiltExperiment {
    pub plan: StepperPlan,
    pub layout: ModeLayout,
    pub m0: MomentTensor,
    pub observables: Vec<(String, Observable)>,
    pub times: Vec<f64>,
}

pub fn build_experiment(config: &ExperimentConfig) -> CliResult<BuiltExperiment> {
    config.scheme.validate()?;
    let stochastic = build_stochastic(config)?;
    let plan = StepperPlan::new(&stochastic, &config.scheme.to_scheme())
        .map_err(|e| CliError::from(e).context("scheme"))?;
    let layout = config.layout();
    let orbitals = build_orbitals(config)?;
    let m0 = MomentTensor::from_slater(&orbitals)
        .map_err(|e| CliError::from(e).context("initial"))?;
    let observables = build_observables(config)?;
    for (id, obs) in &observables {
        if obs.order() != m0.order() {
            return Err(CliError::validation(format!(
                "observable {id:?} reads order {} but the initial state has {} particles",
                obs.order(),
                m0.order()
            )));
        }
    }
    Ok(BuiltExperiment {
        plan,
        layout,
        m0,
        observables,
        times: config.times(),
    })
}

/// Reference Hamiltonian for the exact solver, with the one-body operator
/// matching the scheme's kinetic representation.
pub fn build_oracle_hamiltonian(config: &ExperimentConfig) -> CliResult<ModeHamiltonian> {
    let grid = build_grid(&config.grid)?;
    let (mut h, potentials) = match &config.model {
        ModelConfig::TwoComponent {
            hbar,
            mass,
            coupling,
            potentials,
        } => {
            if potentials.len() != 2 {
                return Err(CliError::validation(format!(
                    "model.potentials: two-component model needs exactly 2 potentials, got {}",
                    potentials.len()
                )));
            }
            let model = TwoComponentModel {
                grid: grid.clone(),
                hbar: *hbar,
                mass: *mass,
                coupling: *coupling,
                potentials: [potentials[0].to_potential(), potentials[1].to_potential()],
            };
            let h = ModeHamiltonian::from_two_component(&model)
                .map_err(|e| CliError::from(e).context("model"))?;
            (h, vec![model.potentials[0].clone(), model.potentials[1].clone()])
        }
        ModelConfig::MultiComponent {
            hbar,
            mass,
            n_components,
            potentials,
            kernel,
        } => {
            let k = match kernel {
                KernelConfig::ZeroRange { strength } => {
                    InteractionKernel::zero_range(*strength, *n_components, &grid)
                }
                KernelConfig::ZeroRangeDirect { strength } => {
                    InteractionKernel::zero_range_direct(*strength, *n_components, &grid)
                }
            }
            .map_err(|e| CliError::from(e).context("model.kernel"))?;
            let model = MultiComponentModel {
                grid: grid.clone(),
                hbar: *hbar,
                mass: *mass,
                n_components: *n_components,
                potentials: potentials.iter().map(|p| p.to_potential()).collect(),
                kernel: k,
            };
            let h = ModeHamiltonian::from_multi_component(&model)
                .map_err(|e| CliError::from(e).context("model"))?;
            (h, model.potentials)
        }
    };
    if config.dispersion() == Dispersion::Fourier {
        let m = grid.n_points();
        let mut one_body = Array2::from_elem((h.n_modes, h.n_modes), C64::new(0.0, 0.0));
        for (alpha, pot) in potentials.iter().enumerate() {
            let block = one_body_matrix(&grid, h.hbar, mass_of(config), pot, Dispersion::Fourier)
                .map_err(|e| CliError::from(e).context("model"))?;
            for j in 0..m {
                for l in 0..m {
                    one_body[[alpha * m + j, alpha * m + l]] = C64::new(block[[j, l]], 0.0);
                }
            }
        }
        h.one_body = one_body;
    }
    Ok(h)
}

fn mass_of(config: &ExperimentConfig) -> f64 {
    match &config.model {
        ModelConfig::TwoComponent { mass, .. } => *mass,
        ModelConfig::MultiComponent { mass, .. } => *mass,
    }
}

/// Initial density operator for the exact solver.
pub fn build_oracle_density(config: &ExperimentConfig) -> CliResult<Array2<C64>> {
    let layout = config.layout();
    let n_modes = layout.n_modes();
    match &config.initial {
        InitialConfig::Fock { occupied } => {
            let mut modes = Vec::with_capacity(occupied.len());
            for &(component, point) in occupied {
                modes.push(
                    layout
                        .composite(component, point)
                        .map_err(|e| CliError::from(e).context("initial.occupied"))?,
                );
            }
            fock_state_density(n_modes, &modes)
                .map_err(|e| CliError::from(e).context("initial"))
        }
        InitialConfig::Slater { .. } => {
            let orbitals = build_orbitals(config)?;
            slater_density(n_modes, &orbitals)
                .map_err(|e| CliError::from(e).context("initial"))
        }
    }
}

#[derive(Serialize)]
struct CanonicalModel<'a> {
    model: &'a ModelConfig,
    grid: &'a GridConfig,
    initial: &'a InitialConfig,
    dispersion: &'a str,
    times: Vec<f64>,
    observables: Vec<(&'a str, &'a ObservableSpecConfig)>,
}

/// Hash of everything a stochastic/exact comparison must agree on: model,
/// grid, initial state, kinetic representation, checkpoint times, and the
/// observable set. Scheme step counts and ensemble settings stay out, so
/// tables from different trajectory budgets of the same experiment still
/// match.
pub fn model_hash(config: &ExperimentConfig) -> CliResult<String> {
    let mut observables: Vec<(&str, &ObservableSpecConfig)> = config
        .observables
        .iter()
        .map(|o| (o.id.as_str(), &o.spec))
        .collect();
    observables.sort_by_key(|(id, _)| id.to_string());
    let canonical = CanonicalModel {
        model: &config.model,
        grid: &config.grid,
        initial: &config.initial,
        dispersion: match config.dispersion() {
            Dispersion::Stencil => "stencil",
            Dispersion::Fourier => "fourier",
        },
        times: config.times(),
        observables,
    };
    let text = serde_json::to_string(&canonical)
        .map_err(|e| CliError::validation(format!("model hash: {e}")))?;
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    Ok(hex(&hasher.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn sample_toml() -> String {
        r#"
[model]
kind = "two-component"
hbar = 1.0
mass = 1.0
coupling = 0.2
potentials = [{ kind = "zero" }, { kind = "zero" }]

[grid]
points = 2
dx = 1.0

[scheme]
variant = "euler-maruyama"
dt = 1e-3
steps = 100
checkpoints = [50, 100]

[ensemble]
trajectories = 64
seed = 7

[initial]
kind = "fock"
occupied = [[0, 0], [1, 0]]

[[observables]]
id = "n_up_0"
kind = "position-population"
slots = [[0, 0], [1, 0]]

[output]
dir = "results"
"#
        .to_string()
    }

    fn parse(text: &str) -> ExperimentConfig {
        toml::from_str(text).expect("config parses")
    }

    #[test]
    fn sample_config_roundtrips_and_builds() {
        let config = parse(&sample_toml());
        assert_eq!(config.n_components(), 2);
        assert_eq!(config.ensemble.seed, 7);
        assert_eq!(config.times(), vec![0.05, 0.1]);
        let built = build_experiment(&config).expect("builds");
        assert_eq!(built.layout.n_modes(), 4);
        assert_eq!(built.m0.order(), 2);
        assert_eq!(built.observables.len(), 1);
        assert_eq!(built.plan.steps(), 100);
    }

    #[test]
    fn missing_seed_is_rejected_with_field_path() {
        let text = sample_toml().replace("seed = 7\n", "");
        let err = toml::from_str::<ExperimentConfig>(&text).unwrap_err();
        assert!(err.to_string().contains("seed"), "{err}");
    }

    #[test]
    fn unknown_top_level_field_is_rejected() {
        let text = format!("{}\n[extra]\nx = 1\n", sample_toml());
        let err = toml::from_str::<ExperimentConfig>(&text).unwrap_err();
        assert!(err.to_string().contains("extra"), "{err}");
    }

    #[test]
    fn bad_checkpoint_order_names_the_field() {
        let text = sample_toml().replace("checkpoints = [50, 100]", "checkpoints = [100, 50]");
        let err = build_experiment(&parse(&text)).unwrap_err();
        assert_eq!(err.code, crate::error::EXIT_VALIDATION);
        assert!(err.message.contains("scheme.checkpoints"), "{}", err.message);
    }

    #[test]
    fn duplicate_observable_ids_are_rejected() {
        let text = format!(
            "{}\n[[observables]]\nid = \"n_up_0\"\nkind = \"total-population\"\norder = 2\n",
            sample_toml()
        );
        let err = build_experiment(&parse(&text)).unwrap_err();
        assert!(err.message.contains("duplicate id"), "{}", err.message);
    }

    #[test]
    fn occupied_slot_out_of_range_is_a_validation_error() {
        let text = sample_toml().replace("occupied = [[0, 0], [1, 0]]", "occupied = [[2, 0]]");
        let err = build_experiment(&parse(&text)).unwrap_err();
        assert_eq!(err.code, crate::error::EXIT_VALIDATION);
        assert!(err.message.contains("initial.occupied"), "{}", err.message);
    }

    #[test]
    fn observable_order_mismatch_is_reported() {
        let text = sample_toml().replace(
            "slots = [[0, 0], [1, 0]]",
            "slots = [[0, 0]]",
        );
        let err = build_experiment(&parse(&text)).unwrap_err();
        assert!(
            err.message.contains("order 1") && err.message.contains("2 particles"),
            "{}",
            err.message
        );
    }

    #[test]
    fn workers_env_var_overrides_config() {
        let config = parse(&sample_toml());
        assert_eq!(config.workers().unwrap(), 0);
        env::set_var(WORKERS_ENV, "4");
        assert_eq!(config.workers().unwrap(), 4);
        env::set_var(WORKERS_ENV, "moose");
        assert!(config.workers().is_err());
        env::remove_var(WORKERS_ENV);
    }

    #[test]
    fn model_hash_tracks_physics_not_sampling() {
        let config = parse(&sample_toml());
        let base = model_hash(&config).unwrap();

        let mut more_traj = parse(&sample_toml());
        more_traj.ensemble.trajectories = 128;
        more_traj.ensemble.seed = 99;
        assert_eq!(model_hash(&more_traj).unwrap(), base);

        let coupled = parse(&sample_toml().replace("coupling = 0.2", "coupling = 0.3"));
        assert_ne!(model_hash(&coupled).unwrap(), base);

        let spectral = parse(
            &sample_toml().replace("variant = \"euler-maruyama\"", "variant = \"split-step-fourier\""),
        );
        assert_ne!(model_hash(&spectral).unwrap(), base);
    }

    #[test]
    fn load_config_hashes_raw_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.toml");
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(sample_toml().as_bytes()).unwrap();
        drop(f);
        let (config, hash) = load_config(&path).unwrap();
        assert_eq!(config.grid.points, 2);
        assert_eq!(hash.len(), 64);
        let (_, again) = load_config(&path).unwrap();
        assert_eq!(hash, again);
    }

    #[test]
    fn oracle_builders_cover_both_dispersion_choices() {
        let config = parse(&sample_toml());
        let h_stencil = build_oracle_hamiltonian(&config).unwrap();
        let spectral = parse(
            &sample_toml().replace("variant = \"euler-maruyama\"", "variant = \"split-step-fourier\""),
        );
        let h_fourier = build_oracle_hamiltonian(&spectral).unwrap();
        assert_eq!(h_stencil.n_modes, 4);
        assert_eq!(h_stencil.quartic.len(), h_fourier.quartic.len());
        // At the zone edge the second difference underestimates ħ²k²/2m,
        // so the spectral one-body diagonal sits above the stencil one.
        let s = h_stencil.one_body[[1, 1]].re;
        let f = h_fourier.one_body[[1, 1]].re;
        assert!(f > s, "spectral diagonal {f} should exceed stencil {s}");

        let rho = build_oracle_density(&config).unwrap();
        assert_eq!(rho.nrows(), 16);
        let trace: C64 = (0..16).map(|i| rho[[i, i]]).sum();
        assert!((trace - C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn slater_initial_state_builds_orbitals() {
        let text = sample_toml().replace(
            "kind = \"fock\"\noccupied = [[0, 0], [1, 0]]",
            "kind = \"slater\"\norbitals = [[[0.7071067811865476, 0.0], [0.7071067811865476, 0.0], [0.0, 0.0], [0.0, 0.0]]]",
        );
        let mut config = parse(&text);
        config.observables[0].spec = ObservableSpecConfig::PositionPopulation {
            slots: vec![(0, 0)],
        };
        let built = build_experiment(&config).expect("slater builds");
        assert_eq!(built.m0.order(), 1);
    }
}
