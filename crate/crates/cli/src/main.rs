mod commands;
mod run_config;

use clap::{Parser, Subcommand};
use commands::Invocation;
use enkf_lab_core::Backend;
use enkf_lab_harness::{HarnessError, Result, StudyKind};
use run_config::{Overrides, RunConfig, SEED_ENV};
use std::path::PathBuf;
use std::process::ExitCode;

/// Ensemble Kalman filter experiments: simulation, exact and ensemble
/// filtering, Riccati analysis and Monte Carlo studies.
#[derive(Parser, Debug)]
#[command(name = "enkf-lab", version)]
struct Cli {
    /// Master seed (falls back to the config, then ENKF_LAB_SEED, then 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for study replicas.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

fn parse_backend(s: &str) -> std::result::Result<Backend, String> {
    Backend::parse(s).ok_or_else(|| format!("unknown backend '{s}' (expected particle, perturbation or wishart-chain)"))
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a signal and observation path from the model.
    Simulate {
        /// Number of steps.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Run the exact Kalman filter on a simulated observation path.
    Kalman {
        #[arg(long)]
        n: Option<usize>,
    },
    /// Run an ensemble filter next to the exact Kalman filter.
    Enkf {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_parser = parse_backend)]
        backend: Option<Backend>,
        /// Ensemble size N.
        #[arg(long = "ensemble-size", short = 'N')]
        ensemble_size: Option<usize>,
    },
    /// Solve for the Riccati fixed point and dump its summary.
    Riccati,
    /// Run a Monte Carlo study and write its report.
    Study {
        #[arg(long)]
        study: Option<StudyKind>,
        #[arg(long, value_parser = parse_backend)]
        backend: Option<Backend>,
    },
}

fn run(cli: Cli) -> Result<i32> {
    let path = cli.config.as_ref().ok_or_else(commands::missing_config)?;
    let mut config = RunConfig::load(path)?;
    let mut overrides = Overrides { seed: cli.seed, ..Default::default() };
    let command = match &cli.command {
        Command::Simulate { n } => {
            overrides.steps = *n;
            "simulate"
        }
        Command::Kalman { n } => {
            overrides.steps = *n;
            "kalman"
        }
        Command::Enkf { n, backend, ensemble_size } => {
            overrides.steps = *n;
            overrides.backend = *backend;
            overrides.ensemble_size = *ensemble_size;
            "enkf"
        }
        Command::Riccati => "riccati",
        Command::Study { study, backend } => {
            overrides.study = *study;
            overrides.backend = *backend;
            "study"
        }
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    let applied = overrides.apply(&mut config, env_seed.as_deref())?;
    let jobs = cli
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if jobs == 0 {
        return Err(HarnessError::Config("--jobs must be at least 1".into()));
    }
    let inv = Invocation { command, config, overrides: applied, out: cli.out, jobs };
    match cli.command {
        Command::Simulate { .. } => commands::simulate(&inv),
        Command::Kalman { .. } => commands::kalman(&inv),
        Command::Enkf { .. } => commands::enkf(&inv),
        Command::Riccati => commands::riccati(&inv),
        Command::Study { .. } => commands::study(&inv),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
