//! `riskalloc` — stochastic capital-allocation runs from a JSON config.
//!
//! Exit codes: 0 success, 2 configuration error, 3 infeasible calibration,
//! 4 numerical failure.

// validation guards reject NaN by negation, as in the core crate
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use riskalloc_core::estimators::EstimatorError;
use riskalloc_core::oracle::OracleError;
use riskalloc_core::sa::SaError;
use riskalloc_core::samplers::SamplerError;
use thiserror::Error;

use config::ExperimentConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("infeasible calibration: {0}")]
    Infeasible(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Io(_) | CliError::Json(_) => 1,
        }
    }
}

impl From<SamplerError> for CliError {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::InfeasibleCorrelation { .. }
            | SamplerError::CalibratedMatrixNotPsd { .. } => CliError::Infeasible(e.to_string()),
            SamplerError::Uncalibrated => CliError::Config(e.to_string()),
            SamplerError::NotSquare { .. }
            | SamplerError::NotSymmetric { .. }
            | SamplerError::NotPositiveSemiDefinite { .. }
            | SamplerError::DimensionMismatch { .. }
            | SamplerError::InvalidCorrelation(_)
            | SamplerError::InvalidProbability(_)
            | SamplerError::InvalidIntensity(_)
            | SamplerError::InvalidSpec(_) => CliError::Config(format!("sampler: {e}")),
        }
    }
}

impl From<SaError> for CliError {
    fn from(e: SaError) -> Self {
        match &e {
            SaError::InvalidConfig(_)
            | SaError::Z0OutsideRect { .. }
            | SaError::AveragingRequiresGammaBelowOne { .. }
            | SaError::WindowNotRecorded { .. } => CliError::Config(format!("run: {e}")),
            SaError::ReplicationFailed { source, .. } => {
                let inner: CliError = (**source).clone_kind();
                match inner {
                    CliError::Config(msg) => CliError::Config(msg),
                    _ => CliError::Numerical(e.to_string()),
                }
            }
            SaError::FieldFailure { .. } | SaError::Estimator(_) | SaError::Loss(_) => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}

trait CloneKind {
    fn clone_kind(&self) -> CliError;
}

impl CloneKind for SaError {
    fn clone_kind(&self) -> CliError {
        match self {
            SaError::InvalidConfig(msg) => CliError::Config(format!("run: {msg}")),
            SaError::Z0OutsideRect { .. } | SaError::AveragingRequiresGammaBelowOne { .. } => {
                CliError::Config(format!("run: {self}"))
            }
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::InvalidParams(_) => CliError::Config(format!("oracle: {e}")),
            OracleError::Sampler(inner) => inner.into(),
            OracleError::NewtonFailed { .. } | OracleError::Loss(_) => {
                CliError::Numerical(format!("oracle: {e}"))
            }
        }
    }
}

impl From<EstimatorError> for CliError {
    fn from(e: EstimatorError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "riskalloc",
    version,
    about = "Stochastic root-finding engine for systemic risk capital allocations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the run seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for replication batches (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory (overrides output.dir from the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate the compound Poisson count-correlation copula.
    Calibrate,
    /// One projected Robbins-Monro run with trajectory and results artifacts.
    Run,
    /// Independent replication batch with distribution artifacts.
    Replicate,
    /// Print the configured oracle's reference solution as JSON.
    Oracle,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let mut config = ExperimentConfig::load(config_path)?;
    if let Some(seed) = cli.seed {
        config.run.seed = seed;
    }

    let out_dir = cli
        .out
        .clone()
        .or_else(|| {
            config
                .output
                .as_ref()
                .and_then(|o| o.dir.as_ref().map(PathBuf::from))
        })
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)?;

    let run = |config: &mut ExperimentConfig| match cli.command {
        Command::Calibrate => commands::cmd_calibrate(config, &out_dir),
        Command::Run => commands::cmd_run(config, &out_dir),
        Command::Replicate => commands::cmd_replicate(config, &out_dir),
        Command::Oracle => commands::cmd_oracle(config, &out_dir),
    };

    match cli.workers {
        Some(workers) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| CliError::Config(format!("--workers: {e}")))?;
            pool.install(|| run(&mut config))
        }
        None => run(&mut config),
    }
}
