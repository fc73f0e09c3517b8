//! `predtest`: prediction-based tests of treatment effects on many outcomes.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "predtest", version, about = "Test for any treatment effect on a group of outcomes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a hold-out or cross-validation prediction test on a CSV file.
    Test(Invocation),
    /// Run a power study on the move/stretch design.
    Simulate(Invocation),
    /// Implied effects and an outcome-space partition for a test run.
    Interpret(Invocation),
}

#[derive(Debug, clap::Args)]
struct Invocation {
    /// TOML file of settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: RunConfig,
}

impl Invocation {
    fn resolve(self) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        Ok(file.merged(self.overrides))
    }
}

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Degenerate(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Degenerate(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Degenerate(m) => write!(f, "degenerate design: {m}"),
        }
    }
}

impl From<predtest::Error> for CliError {
    fn from(e: predtest::Error) -> Self {
        if e.is_degenerate_design() || matches!(e, predtest::Error::Undefined(_) | predtest::Error::Fit(_)) {
            CliError::Degenerate(e.to_string())
        } else if matches!(e, predtest::Error::InvalidArgument(_)) {
            CliError::Config(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Test(inv) => inv.resolve().and_then(commands::test),
        Command::Simulate(inv) => inv.resolve().and_then(commands::simulate),
        Command::Interpret(inv) => inv.resolve().and_then(commands::interpret),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("predtest: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
