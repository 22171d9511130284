//! `qg`: instance generation, optimization runs, the Max-Cut suite, verification and reports.

mod commands;
mod manifest;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_VERIFY: u8 = 2;
pub const EXIT_DIVERGENCE: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] qg::Error),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("verification failed: {0}")]
    Verify(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Verify(_) => EXIT_VERIFY,
            CliError::Core(qg::Error::Divergence { .. }) => EXIT_DIVERGENCE,
            _ => EXIT_CONFIG,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qg", version, about = "Exponential-family solution generators for small combinatorial problems")]
pub struct Cli {
    /// JSON configuration for the subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,

    /// Worker cap; overrides `QG_WORKERS` and the configuration.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Verification depth: `default` or `deep`.
    #[arg(long, global = true, default_value = "default")]
    pub level: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded G(n, p) graph as instance JSON.
    GenGraph {
        #[arg(long, default_value_t = 15)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        p: f64,
    },
    /// Encode an instance and report its norms, variance floor and optimum.
    Encode {
        instance: PathBuf,
        /// maxcut, mincut, csp, mwbm or tsp.
        #[arg(long)]
        problem: String,
    },
    /// Run projected descent on one instance.
    Optimize {
        instance: PathBuf,
        #[arg(long)]
        problem: String,
    },
    /// Vanilla versus regularized training over random Max-Cut graphs.
    SuiteMaxcut,
    /// Loss grids of the vanilla, entropy and entropy+mixture objectives on a 2-D domain.
    Landscape,
    /// Run the lemma and identity battery.
    Verify,
    /// Summarize a finished run directory.
    Report {
        /// Defaults to `--out-dir`.
        dir: Option<PathBuf>,
    },
}

impl Cli {
    pub fn workers(&self) -> Result<Option<usize>, CliError> {
        if self.workers.is_some() {
            return Ok(self.workers);
        }
        match std::env::var("QG_WORKERS") {
            Ok(v) => v
                .trim()
                .parse()
                .map(Some)
                .map_err(|_| CliError::Config(format!("QG_WORKERS must be a positive integer, got {v:?}"))),
            Err(_) => Ok(None),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
