//! Command-line driver: equilibrium | simulate | distance | verify.
//!
//! Exit codes: 0 pass, 1 property failure, 2 config error, 3 equilibrium
//! failure, 4 solver failure, 5 transport non-convergence.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("equilibrium failure: {0}")]
    Equilibrium(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("transport non-convergence: {0}")]
    Transport(String),
    #[error("property failure: {0}")]
    Property(String),
    #[error("io error: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Property(_) => 1,
            CliError::Config(_) => 2,
            CliError::Equilibrium(_) => 3,
            CliError::Solver(_) | CliError::Io(_) => 4,
            CliError::Transport(_) => 5,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "hkflow",
    about = "Entropy gradient flows and dynamic transport distances in 1D",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Path to the JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.directory from the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker pool size for sweeps.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for pseudo-random families (overrides config.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress progress notes on stderr.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize the model equilibrium and write it out.
    Equilibrium,
    /// Integrate a gradient flow and write the trajectory.
    Simulate,
    /// Solve dynamic-formulation transport distances.
    Distance,
    /// Run a named property suite.
    Verify,
}

/// Everything a command needs beyond the parsed config.
pub struct Context {
    pub out_dir: PathBuf,
    pub jobs: usize,
    pub seed: Option<u64>,
    pub quiet: bool,
}

impl Context {
    pub fn note(&self, text: &str) {
        if !self.quiet {
            eprintln!("{text}");
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let config = RunConfig::load(config_path)?;
    let out_dir = cli
        .out
        .clone()
        .or_else(|| config.output.as_ref().and_then(|o| o.directory.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    let ctx = Context {
        out_dir,
        jobs: cli
            .jobs
            .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
        seed: cli.seed.or(config.seed),
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Equilibrium => commands::equilibrium::run(&config, &ctx),
        Command::Simulate => commands::simulate::run(&config, &ctx),
        Command::Distance => commands::distance::run(&config, &ctx),
        Command::Verify => commands::verify::run(&config, &ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
