//! `sli`: simulate, fit, predict and cross-validate space-time SLI models.
//!
//! Exit status is 0 on success, 1 when a computation fails and 2 for
//! invalid arguments, configuration or input files.

mod commands;
mod config;
mod error;
mod io;
mod model;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{CvArgs, FitArgs, PredictArgs, SimulateArgs};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "sli", version, about = "Stochastic local interaction models for space-time interpolation")]
struct Cli {
    /// Worker threads for parallel sections; defaults to one per core.
    #[arg(long, global = true, env = "SLI_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a Gaussian random field sample and write it to the data path.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output file instead of `data.path`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replaces the configured seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate model parameters by maximum likelihood.
    Fit {
        #[arg(long)]
        config: PathBuf,
        /// Model file; defaults to `model.toml` beside the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict at target points from a fitted model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Config whose `prediction` section supplies targets and settings.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Target file with header `s1,...,sd,t`.
        #[arg(long)]
        targets: Option<PathBuf>,
        /// Coverage of the prediction intervals.
        #[arg(long)]
        level: Option<f64>,
        /// Prediction CSV; standard output by default.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One-slice-out cross validation.
    Cv {
        #[arg(long)]
        config: PathBuf,
        /// Take fixed parameters from this fitted model.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Metrics CSV with one row per slice and a pooled row.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print every slice in the table, not only the pooled row.
        #[arg(long)]
        per_slice: bool,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::compute(format!("cannot start thread pool: {e}")))?;
    }
    match cli.command {
        Command::Simulate { config, out, seed } => commands::simulate(&SimulateArgs { config, out, seed }),
        Command::Fit { config, out } => commands::fit_model(&FitArgs { config, out }),
        Command::Predict { model, config, targets, level, out } => {
            commands::predict(&PredictArgs { model, config, targets, level, out })
        }
        Command::Cv { config, model, out, per_slice } => commands::cross_validate(&CvArgs { config, model, out, per_slice }),
    }
}

fn main() -> ExitCode {
    // Clap exits with status 2 on malformed arguments.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
