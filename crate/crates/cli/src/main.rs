//! `lgrowth`: simulate cohorts, fit the latent growth model, score recovery
//! and build reports. Every command writes a `manifest.json` with the
//! resolved configuration and a sha256 digest of each emitted file.

mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "lgrowth", version, about = "Bayesian latent growth curve models for multi-outcome panels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a cohort from the configured truth.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Fit the model to a panel CSV.
    Fit {
        /// Input panel CSV.
        data: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        mcmc: McmcArgs,
    },
    /// Simulate, fit and score the posterior against the truth.
    Recover {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        mcmc: McmcArgs,
    },
    /// Build summaries, trajectory bands, covariate table and Spearman
    /// matrix from a fit directory.
    Report {
        /// Directory written by `fit` or `recover`.
        fit_dir: PathBuf,
        /// Defaults to `<fit_dir>/report`.
        #[arg(long, env = "LGROWTH_OUT")]
        out: Option<PathBuf>,
        #[arg(long, env = "LGROWTH_FORCE")]
        force: bool,
    },
    /// Per-outcome missingness and Spearman matrix of a panel CSV.
    Summarize {
        data: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON run configuration; built-in defaults when absent.
    #[arg(long, env = "LGROWTH_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, env = "LGROWTH_SEED")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "LGROWTH_OUT")]
    pub out: PathBuf,
    /// Write into a non-empty output directory.
    #[arg(long, env = "LGROWTH_FORCE")]
    pub force: bool,
}

#[derive(Debug, Args, Default)]
pub struct McmcArgs {
    #[arg(long, env = "LGROWTH_CHAINS")]
    pub chains: Option<usize>,
    #[arg(long, env = "LGROWTH_ITERATIONS")]
    pub iterations: Option<usize>,
    #[arg(long = "burnin", env = "LGROWTH_BURNIN")]
    pub burn_in: Option<usize>,
    #[arg(long, env = "LGROWTH_THIN")]
    pub thin: Option<usize>,
    /// Worker threads for concurrent chains; defaults to the chain count.
    #[arg(long, env = "LGROWTH_THREADS")]
    pub threads: Option<usize>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { run } => commands::simulate(&run),
        Command::Fit { data, run, mcmc } => commands::fit(&data, &run, &mcmc),
        Command::Recover { run, mcmc } => commands::recover(&run, &mcmc),
        Command::Report { fit_dir, out, force } => {
            let out = out.unwrap_or_else(|| fit_dir.join("report"));
            commands::report(&fit_dir, &out, force)
        }
        Command::Summarize { data, run } => commands::summarize(&data, &run),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
