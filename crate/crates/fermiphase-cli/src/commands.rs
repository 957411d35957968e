//! The four subcommands: run, exact, compare, selftest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use serde::Serialize;

use fermiphase::algebra::{GeneratorSet, GrassmannElement, Side};
use fermiphase::ensemble::{run_ensemble, EnsembleSpec};
use fermiphase::linalg::takagi_factor;
use fermiphase::moments::MomentTensor;
use fermiphase::oracle::evolve_exact;
use fermiphase::wiener::NoiseSource;
use fermiphase::C64;

use crate::compare::{compare_tables, CompareReport};
use crate::config::{
    build_experiment, build_oracle_density, build_oracle_hamiltonian, load_config, model_hash,
    ExperimentConfig, OutputFormat,
};
use crate::error::{CliError, CliResult, EXIT_NUMERICAL};
use crate::output::{write_plot_svg, Metadata, ResultTable, Row};

pub struct RunOptions {
    pub config: PathBuf,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub formats: Option<Vec<OutputFormat>>,
    pub plot: bool,
}

struct OutputPlan {
    dir: PathBuf,
    formats: Vec<OutputFormat>,
    plot: bool,
}

impl OutputPlan {
    fn new(config: &ExperimentConfig, options: &RunOptions) -> Self {
        Self {
            dir: options
                .out_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from(&config.output.dir)),
            formats: options
                .formats
                .clone()
                .unwrap_or_else(|| config.output.formats.clone()),
            plot: options.plot || config.output.plot,
        }
    }

    fn write(&self, table: &ResultTable, stem: &str) -> CliResult<Vec<PathBuf>> {
        fs::create_dir_all(&self.dir)
            .map_err(|e| CliError::validation(format!("{}: {e}", self.dir.display())))?;
        let mut written = Vec::new();
        if self.formats.contains(&OutputFormat::Csv) {
            let path = self.dir.join(format!("{stem}.csv"));
            table.write_csv(&path)?;
            written.push(path);
        }
        if self.formats.contains(&OutputFormat::Json) {
            let path = self.dir.join(format!("{stem}.json"));
            table.write_json(&path)?;
            written.push(path);
        }
        if self.plot {
            let path = self.dir.join(format!("{stem}.svg"));
            write_plot_svg(table, &path)?;
            written.push(path);
        }
        Ok(written)
    }
}

fn metadata(
    kind: &str,
    seed: u64,
    config_hash: &str,
    model_hash: &str,
    n_trajectories: usize,
    n_excluded: usize,
) -> Metadata {
    Metadata {
        kind: kind.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        config_hash: config_hash.to_string(),
        model_hash: model_hash.to_string(),
        n_trajectories,
        n_excluded,
    }
}

#[derive(Serialize)]
struct AbortReport {
    aborted: bool,
    partial_results: bool,
    error: String,
    config_hash: String,
    model_hash: String,
    seed: u64,
}

/// Stochastic ensemble run: discretize, propagate, reduce, write tables.
pub fn run(options: &RunOptions) -> CliResult<()> {
    let (config, config_hash) = load_config(&options.config)?;
    let seed = options.seed.unwrap_or(config.ensemble.seed);
    let hash = model_hash(&config)?;
    let built = build_experiment(&config)?;
    let spec = EnsembleSpec {
        n_trajectories: config.ensemble.trajectories,
        divergence_ceiling: config.ensemble.divergence_ceiling,
        workers: config.workers()?,
    };
    let noise = NoiseSource::new(seed);
    let observables: Vec<_> = built.observables.iter().map(|(_, o)| o.clone()).collect();

    println!(
        "run: {} modes, {} channels, {} steps of dt = {}, {} trajectories",
        built.plan.n_modes(),
        built.plan.n_channels(),
        built.plan.steps(),
        built.plan.dt(),
        spec.n_trajectories
    );
    let started = Instant::now();
    let result = run_ensemble(
        &built.plan,
        &noise,
        &built.m0,
        &built.layout,
        &observables,
        &config.scheme.checkpoints,
        &spec,
    );
    let outputs = OutputPlan::new(&config, options);
    let result = match result {
        Ok(r) => r,
        Err(err @ fermiphase::Error::DivergenceCeiling { .. }) => {
            // Leave a machine-readable trace of the abort so a driver can
            // distinguish "exceeded the ceiling" from "never ran".
            fs::create_dir_all(&outputs.dir)
                .map_err(|e| CliError::validation(format!("{}: {e}", outputs.dir.display())))?;
            let report = AbortReport {
                aborted: true,
                partial_results: false,
                error: err.to_string(),
                config_hash: config_hash.clone(),
                model_hash: hash.clone(),
                seed,
            };
            let path = outputs.dir.join("aborted.json");
            let mut text = serde_json::to_string_pretty(&report)
                .map_err(|e| CliError::numerical(e.to_string()))?;
            text.push('\n');
            fs::write(&path, text)
                .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
            eprintln!("aborted: {err} (marker written to {})", path.display());
            return Err(err.into());
        }
        Err(err) => return Err(err.into()),
    };
    let elapsed = started.elapsed();

    let mut table = ResultTable {
        metadata: metadata(
            "stochastic",
            seed,
            &config_hash,
            &hash,
            result.n_kept,
            result.n_excluded,
        ),
        rows: Vec::with_capacity(built.observables.len() * result.times.len()),
    };
    for (ob, (id, _)) in built.observables.iter().enumerate() {
        for (cp, &t) in result.times.iter().enumerate() {
            let mean = result.mean[[cp, ob]];
            let stderr = result.stderr[[cp, ob]];
            table.rows.push(Row {
                observable_id: id.clone(),
                t,
                re: mean.re,
                im: mean.im,
                stderr_re: stderr.re,
                stderr_im: stderr.im,
                n_traj: result.n_kept,
                n_excluded: result.n_excluded,
            });
        }
    }
    table.sort_rows();

    for path in outputs.write(&table, "results")? {
        println!("wrote {}", path.display());
    }
    println!(
        "done: {} kept, {} excluded, {:.1}s",
        result.n_kept,
        result.n_excluded,
        elapsed.as_secs_f64()
    );
    Ok(())
}

/// Exact reference: diagonalize the mode Hamiltonian, evolve the initial
/// density, and tabulate the same observables with zero quoted error.
pub fn exact(options: &RunOptions) -> CliResult<()> {
    let (config, config_hash) = load_config(&options.config)?;
    let seed = options.seed.unwrap_or(config.ensemble.seed);
    let hash = model_hash(&config)?;
    let built = build_experiment(&config)?;
    let h = build_oracle_hamiltonian(&config)?;
    let rho0 = build_oracle_density(&config)?;
    let order = built.m0.order();

    let states = evolve_exact(&h, &rho0, &built.times).map_err(CliError::from)?;
    let mut table = ResultTable {
        metadata: metadata("exact", seed, &config_hash, &hash, 0, 0),
        rows: Vec::with_capacity(built.observables.len() * built.times.len()),
    };
    for (rho, &t) in states.iter().zip(&built.times) {
        let tensor =
            MomentTensor::from_state(rho, built.layout.n_modes(), order).map_err(CliError::from)?;
        for (id, obs) in &built.observables {
            let value = obs.evaluate(&tensor, &built.layout).map_err(CliError::from)?;
            table.rows.push(Row {
                observable_id: id.clone(),
                t,
                re: value.re,
                im: value.im,
                stderr_re: 0.0,
                stderr_im: 0.0,
                n_traj: 0,
                n_excluded: 0,
            });
        }
    }
    table.sort_rows();

    let outputs = OutputPlan::new(&config, options);
    for path in outputs.write(&table, "exact")? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub struct CompareOptions {
    pub stochastic: PathBuf,
    pub exact: PathBuf,
    pub threshold: f64,
    pub force: bool,
    pub out: Option<PathBuf>,
}

fn write_report(report: &CompareReport, path: &Path) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::validation(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    Ok(())
}

/// Compare a stochastic table against an exact one row by row.
pub fn compare(options: &CompareOptions) -> CliResult<()> {
    let stochastic = ResultTable::read_json(&options.stochastic)?;
    let exact = ResultTable::read_json(&options.exact)?;
    let report = compare_tables(&stochastic, &exact, options.threshold, options.force)?;
    if let Some(path) = &options.out {
        write_report(&report, path)?;
        println!("wrote {}", path.display());
    }
    let mut worst: Vec<_> = report.rows.iter().collect();
    worst.sort_by(|a, b| b.z().total_cmp(&a.z()));
    for row in worst.iter().take(5) {
        println!(
            "  {} t = {}: z_re = {:.3}, z_im = {:.3}",
            row.observable_id, row.t, row.z_re, row.z_im
        );
    }
    if report.pass {
        println!(
            "comparison PASS: max z = {:.3} <= threshold {}",
            report.max_z, report.threshold
        );
        Ok(())
    } else {
        Err(CliError::comparison(format!(
            "comparison FAIL: max z = {:.3} > threshold {}",
            report.max_z, report.threshold
        )))
    }
}

struct Draws {
    noise: NoiseSource,
    trajectory: u64,
    buffer: Vec<f64>,
}

/// Deterministic stream of standard normals for the selftest, one batch
/// per trajectory counter.
impl Draws {
    fn new(seed: u64) -> Self {
        Self {
            noise: NoiseSource::new(seed),
            trajectory: 0,
            buffer: Vec::new(),
        }
    }

    fn normal(&mut self) -> f64 {
        if self.buffer.is_empty() {
            let w = self
                .noise
                .increments(self.trajectory, 0, 16, 1.0)
                .expect("selftest draw");
            self.trajectory += 1;
            self.buffer.extend(w.psi);
            self.buffer.extend(w.psi_plus);
        }
        self.buffer.pop().expect("nonempty buffer")
    }

    fn complex(&mut self) -> C64 {
        C64::new(self.normal(), self.normal())
    }

    fn index(&mut self, n: usize) -> usize {
        (self.normal().abs() * 1e6) as usize % n
    }
}

fn check(name: &str, ok: bool, detail: String, failures: &mut usize) {
    if ok {
        println!("selftest {name}: ok ({detail})");
    } else {
        println!("selftest {name}: FAILED ({detail})");
        *failures += 1;
    }
}

/// Quick internal consistency sweep: noise moments, Grassmann identities,
/// factorization residuals. Exits nonzero if anything is off.
pub fn selftest() -> CliResult<()> {
    let mut failures = 0usize;

    // Counter-addressed noise: mean, variance, and cross-sector
    // correlation of the increments over many trajectories.
    {
        let noise = NoiseSource::new(0x5e1f);
        let n = 100_000usize;
        let dt = 1e-3;
        let mut sum = [0.0f64; 2];
        let mut sum_sq = [0.0f64; 2];
        let mut cross = 0.0f64;
        for traj in 0..n {
            let w = noise.increments(traj as u64, 0, 1, dt).map_err(CliError::from)?;
            let a = w.psi[0];
            let b = w.psi_plus[0];
            sum[0] += a;
            sum[1] += b;
            sum_sq[0] += a * a;
            sum_sq[1] += b * b;
            cross += a * b;
        }
        let nf = n as f64;
        let se_mean = (dt / nf).sqrt();
        let mean_ok = sum.iter().all(|s| (s / nf).abs() < 5.0 * se_mean);
        let se_var = dt * (2.0 / nf).sqrt();
        let var_ok = sum_sq
            .iter()
            .zip(&sum)
            .all(|(sq, s)| ((sq - s * s / nf) / nf - dt).abs() < 5.0 * se_var);
        let cross_ok = (cross / nf).abs() < 5.0 * dt / nf.sqrt();
        check(
            "noise-moments",
            mean_ok && var_ok && cross_ok,
            format!("{n} samples, dt = {dt}"),
            &mut failures,
        );
    }

    // Generator anticommutation and nilpotency on random pairs.
    {
        let mut draws = Draws::new(0xa1);
        let gens = GeneratorSet::new(4).map_err(CliError::from)?;
        let mut ok = true;
        for _ in 0..200 {
            let i = draws.index(8);
            let j = draws.index(8);
            let gi = GrassmannElement::generator(gens, i).map_err(CliError::from)?;
            let gj = GrassmannElement::generator(gens, j).map_err(CliError::from)?;
            let anti = gi.clone() * gj.clone() + gj * gi;
            if !anti.is_zero() {
                ok = false;
            }
        }
        check(
            "grassmann-anticommutation",
            ok,
            "200 generator pairs, 4 modes".to_string(),
            &mut failures,
        );
    }

    // Left-derivative product rule on homogeneous random elements.
    {
        let mut draws = Draws::new(0xb2);
        let gens = GeneratorSet::new(3).map_err(CliError::from)?;
        let mut ok = true;
        for _ in 0..200 {
            let f = random_monomial(&mut draws, gens).map_err(CliError::from)?;
            let g = random_element(&mut draws, gens).map_err(CliError::from)?;
            let gen = draws.index(6);
            let lhs = f
                .product(&g)
                .and_then(|fg| fg.derivative(gen, Side::Left))
                .map_err(CliError::from)?;
            let sign = f.parity().map(|p| p.sign()).unwrap_or(1.0);
            let term1 = f
                .derivative(gen, Side::Left)
                .and_then(|df| df.product(&g))
                .map_err(CliError::from)?;
            let term2 = g
                .derivative(gen, Side::Left)
                .and_then(|dg| f.product(&dg))
                .map_err(CliError::from)?;
            let rhs = term1 + term2 * sign;
            if !(lhs - rhs).is_zero() {
                ok = false;
            }
        }
        check(
            "grassmann-product-rule",
            ok,
            "200 random products, 3 modes".to_string(),
            &mut failures,
        );
    }

    // Takagi factorization residual on random complex symmetric matrices.
    {
        let mut draws = Draws::new(0xc3);
        let mut worst = 0.0f64;
        let mut ok = true;
        for trial in 0..20 {
            let d = 2 + trial % 15;
            let mut q = Array2::from_elem((d, d), C64::new(0.0, 0.0));
            for r in 0..d {
                for c in r..d {
                    let v = draws.complex();
                    q[[r, c]] = v;
                    q[[c, r]] = v;
                }
            }
            let k = takagi_factor(&q).map_err(CliError::from)?;
            let rebuilt = k.dot(&k.t());
            let mut num = 0.0f64;
            let mut den = 0.0f64;
            for r in 0..d {
                for c in 0..d {
                    num += (rebuilt[[r, c]] - q[[r, c]]).norm_sqr();
                    den += q[[r, c]].norm_sqr();
                }
            }
            let rel = (num / den.max(1e-300)).sqrt();
            worst = worst.max(rel);
            if rel > 1e-10 {
                ok = false;
            }
        }
        check(
            "takagi-residual",
            ok,
            format!("20 matrices, worst relative residual {worst:.2e}"),
            &mut failures,
        );
    }

    if failures > 0 {
        Err(CliError {
            code: EXIT_NUMERICAL,
            message: format!("{failures} selftest check(s) failed"),
        })
    } else {
        println!("selftest: all checks passed");
        Ok(())
    }
}

fn random_monomial(draws: &mut Draws, gens: GeneratorSet) -> fermiphase::Result<GrassmannElement> {
    let len = draws.index(3) + 1;
    let mut indices = Vec::new();
    while indices.len() < len {
        let g = draws.index(gens.n_generators());
        if !indices.contains(&g) {
            indices.push(g);
        }
    }
    Ok(GrassmannElement::monomial(gens, &indices)? * draws.complex())
}

fn random_element(draws: &mut Draws, gens: GeneratorSet) -> fermiphase::Result<GrassmannElement> {
    let mut out = GrassmannElement::scalar(gens, draws.complex());
    for _ in 0..3 {
        out = out + random_monomial(draws, gens)?;
    }
    Ok(out)
}
