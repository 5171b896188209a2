//! The `circulate` command line: simulate environments, train and evaluate
//! linear policies, compute circularity series and verify integrator step
//! sizes. Series are written as CSV and reports as JSON; every output file
//! carries the seed and an echo of the effective configuration.

pub mod commands;
pub mod config;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "circulate", version, about = "Circularity metrics and control environments for material networks")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config's `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides the config's `out`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the available environments.
    ListEnvs,
    /// Run one episode and write its trajectory.
    Simulate {
        /// Policy record; overrides `[simulate] policy`.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Train a linear policy with the configured trainer.
    Train {
        /// Worker threads for rollouts. Results do not depend on it.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Fill the wall_time column of the history.
        #[arg(long)]
        log_wall_time: bool,
    },
    /// Mean return of a saved policy over seeded episodes.
    Evaluate {
        /// Policy record; overrides `[evaluate] policy`.
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Overrides `[evaluate] episodes`.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Circularity series.
    #[command(subcommand)]
    Circularity(CircularityCommand),
    /// Compare the fixed-step integrator with an adaptive reference.
    VerifyIntegrator,
}

#[derive(Debug, Subcommand)]
pub enum CircularityCommand {
    /// λ of a network from batch events and continuous flows (`[ledger]`).
    Ledger,
    /// Closed-form λ of the solid-waste scenario (`[solid_scenario]`).
    SolidScenario,
    /// Net-zero λ from an emitter and a remover flow (`[netzero]`).
    Netzero,
}

/// Why a command failed; decides the exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad usage, configuration or input files.
    Usage(anyhow::Error),
    /// The computation ran but hit a numerical failure.
    Numerical(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            Self::Numerical(_) => 2,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Self::Usage(e)
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(e) | Self::Numerical(e) => write!(f, "{e:#}"),
        }
    }
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    commands::dispatch(cli)
}

/// Parses `args` and runs the command, printing errors to stderr.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
