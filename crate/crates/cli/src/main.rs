//! `dqlab`: train, diagnose, solve and compare runs with file-based artifacts.
//!
//! Exit codes: 0 success, 1 input error, 2 divergence, 3 property failure.

mod commands;
mod config;
mod manifest;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "dqlab", version, about = "Deep Q-learning runs with occupation-measure diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train from a run config and write the record, checkpoints and manifest.
    Train(CommonArgs),
    /// Diagnose a completed run (`--run`); `--config` may supply a `[diagnose]` table.
    Diagnose(CommonArgs),
    /// Solve an MDP exactly; `--config` is an MDP JSON file or a run config.
    Oracle(CommonArgs),
    /// Train the config with and without replay and compare the tail measures.
    ReplayCompare(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run id; names the output directory under `--out`.
    #[arg(long)]
    pub run: Option<String>,
    /// Output root.
    #[arg(long, env = "DQLAB_OUT", default_value = "runs")]
    pub out: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Bad config, missing artifacts or unusable arguments (exit 1).
#[derive(Debug)]
pub struct InputError(String);

impl InputError {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }

    pub fn from_core(e: dqlab::Error) -> Self {
        Self(e.to_string())
    }
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

/// How a command finished when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Diverged,
    PropertyFailure,
}

impl Outcome {
    fn code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::Diverged => 2,
            Outcome::PropertyFailure => 3,
        }
    }
}

fn error_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<dqlab::Error>() {
        Some(dqlab::Error::Diverged { .. } | dqlab::Error::Numerical(_)) => 2,
        Some(dqlab::Error::Property(_)) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Train(args) => commands::train(&args),
        Command::Diagnose(args) => commands::diagnose(&args),
        Command::Oracle(args) => commands::oracle(&args),
        Command::ReplayCompare(args) => commands::replay_compare(&args),
    };
    match result {
        Ok(outcome) => ExitCode::from(outcome.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(error_code(&e))
        }
    }
}
