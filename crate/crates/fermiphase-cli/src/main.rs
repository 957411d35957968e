//! `fermiphase`: stochastic phase-space simulation of lattice Fermi gases
//! from a TOML experiment description, with an exact small-system reference
//! and a statistical comparison between the two.
//!
//! Exit codes: 0 success, 1 invalid configuration or input, 2 numerical
//! abort, 3 comparison failure.

mod commands;
mod compare;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{CompareOptions, RunOptions};
use config::OutputFormat;
use error::CliError;

#[derive(Parser)]
#[command(name = "fermiphase", version, about = "Grassmann phase-space simulator for Fermi gases")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the stochastic ensemble described by a config file.
    Run(RunArgs),
    /// Evolve the same experiment with the exact Fock-space reference.
    Exact(RunArgs),
    /// Compare a stochastic result table against an exact one.
    Compare(CompareArgs),
    /// Check noise moments, algebra identities, and factorization health.
    Selftest,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment description (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Directory for result files; defaults to `[output] dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated formats to write (csv, json); defaults to
    /// `[output] formats`.
    #[arg(long, value_delimiter = ',')]
    format: Option<Vec<String>>,
    /// Also write an SVG plot of each observable.
    #[arg(long)]
    plot: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// Stochastic result table (JSON).
    #[arg(long)]
    stochastic: PathBuf,
    /// Exact result table (JSON).
    #[arg(long)]
    exact: PathBuf,
    /// Largest tolerated z-score.
    #[arg(long, default_value_t = compare::DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Compare even if the tables' model hashes differ.
    #[arg(long)]
    force: bool,
    /// Write the per-row report here (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_formats(raw: &Option<Vec<String>>) -> Result<Option<Vec<OutputFormat>>, CliError> {
    let Some(names) = raw else { return Ok(None) };
    let mut formats = Vec::with_capacity(names.len());
    for name in names {
        match name.trim().to_ascii_lowercase().as_str() {
            "csv" => formats.push(OutputFormat::Csv),
            "json" => formats.push(OutputFormat::Json),
            other => {
                return Err(CliError::validation(format!(
                    "--format: unknown format {other:?} (expected csv or json)"
                )))
            }
        }
    }
    if formats.is_empty() {
        return Err(CliError::validation("--format: no formats given"));
    }
    Ok(Some(formats))
}

fn run_args_to_options(args: &RunArgs) -> Result<RunOptions, CliError> {
    Ok(RunOptions {
        config: args.config.clone(),
        out_dir: args.out_dir.clone(),
        seed: args.seed,
        formats: parse_formats(&args.format)?,
        plot: args.plot,
    })
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(args) => commands::run(&run_args_to_options(args)?),
        Command::Exact(args) => commands::exact(&run_args_to_options(args)?),
        Command::Compare(args) => commands::compare(&CompareOptions {
            stochastic: args.stochastic.clone(),
            exact: args.exact.clone(),
            threshold: args.threshold,
            force: args.force,
            out: args.out.clone(),
        }),
        Command::Selftest => commands::selftest(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.code.clamp(1, 255) as u8)
        }
    }
}
