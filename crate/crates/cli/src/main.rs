//! `aura`: curate evaluation test sets from clip embeddings and per-model
//! quality scores.

mod commands;
mod config;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{RunArgs, RunConfig};
use error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "aura", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a manifest and embedding file and print a summary.
    Ingest(RunArgs),
    /// Pick k by Davies-Bouldin over the grid and write the cluster sidecar.
    Cluster(RunArgs),
    /// Draw a test set and write its sample manifest.
    Sample(RunArgs),
    /// Rank models on the full collection or a sample, optionally with
    /// bootstrapped ranking fidelity.
    Rank(RunArgs),
    /// Difficulty, coverage, OOD and ranking report for a sample.
    Report(RunArgs),
    /// Generate a synthetic workload with known ground truth.
    Simulate(SimulateArgs),
    /// Cluster, sample and evaluate in one run.
    Pipeline(RunArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Workload spec (JSON or TOML); the desk-scale defaults otherwise.
    #[arg(long, value_name = "FILE")]
    workload: Option<PathBuf>,
    #[arg(long)]
    n_clips: Option<usize>,
    #[arg(long)]
    k_true: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    n_models: Option<usize>,
    #[arg(long)]
    clean_fraction: Option<f64>,
    #[arg(long)]
    noise_std: Option<f64>,
}

fn run(command: &Command) -> CliResult<()> {
    match command {
        Command::Ingest(a) => commands::ingest(&RunConfig::resolve(a)?),
        Command::Cluster(a) => commands::cluster(&RunConfig::resolve(a)?),
        Command::Sample(a) => commands::sample(&RunConfig::resolve(a)?),
        Command::Rank(a) => commands::rank(&RunConfig::resolve(a)?),
        Command::Report(a) => commands::report(&RunConfig::resolve(a)?),
        Command::Simulate(a) => commands::simulate(&RunConfig::resolve(&a.run)?, a),
        Command::Pipeline(a) => commands::pipeline(&RunConfig::resolve(a)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
