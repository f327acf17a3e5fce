//! `selfaware` command-line driver.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] selfaware_core::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "selfaware", version, about = "Shared-level self-awareness: scenario generation, training, filtering and fusion")]
pub struct Cli {
    /// TOML file with flat `key = value` settings; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base seed, fanned out into per-module streams.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScenarioKind {
    Perimeter,
    Uturn,
    Stop,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labelled synthetic trajectory CSV.
    Gen(commands::GenArgs),
    /// Train a shared-level vocabulary from normal trajectories.
    TrainSl(commands::TrainArgs),
    /// Run the particle filter and write the anomaly series.
    RunSl(commands::RunArgs),
    /// Align two anomaly series and derive joint verdicts.
    Fuse(commands::FuseArgs),
    /// Write plot-ready TSV files for anomaly series.
    ExportPlots(commands::ExportArgs),
    /// Set fusion thresholds from the score percentile of normal runs.
    CalibrateThresholds(commands::CalibrateArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
