//! Command-line front end: every command reads one TOML config, writes
//! delimited or JSON outputs into `--out`, and records a run manifest.

mod commands;
mod config;
mod manifest;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "trendskew", version, about = "Skewness term structures of trend-following strategies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Exact skewness term structure of a linear filter strategy.
    SkewLinear(CommonArgs),
    /// Skewness term structure of a nonlinear (activation) strategy.
    SkewNonlinear(CommonArgs),
    /// Positivity constraint for a fast/slow filter blend.
    Hybrid(CommonArgs),
    /// Monte Carlo term structure with standard errors.
    Simulate(CommonArgs),
    /// Empirical term structures and summary from a price file.
    Backtest(CommonArgs),
    /// Eigenvalues, trace moments and MGF cumulants of the quadratic form.
    Spectral(CommonArgs),
    /// Cumulative P&L of several activations on one price path.
    Scenario(CommonArgs),
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Overrides the seed of the config.
    #[arg(long, value_name = "INT")]
    pub seed: Option<u64>,
    /// Worker threads for parallel stages.
    #[arg(long, value_name = "INT")]
    pub workers: Option<usize>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(trendskew::Error),
    Output(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Core(e) => match e.category() {
                trendskew::ErrorCategory::Config => write!(f, "config error: {e}"),
                trendskew::ErrorCategory::Data => write!(f, "data error: {e}"),
                trendskew::ErrorCategory::Numerical => write!(f, "numerical failure: {e}"),
            },
            CliError::Output(m) => write!(f, "output error: {m}"),
        }
    }
}

impl From<trendskew::Error> for CliError {
    fn from(e: trendskew::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Output(_) => 3,
            CliError::Core(e) => match e.category() {
                trendskew::ErrorCategory::Config => 2,
                trendskew::ErrorCategory::Data => 3,
                trendskew::ErrorCategory::Numerical => 4,
            },
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("trendskew: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
