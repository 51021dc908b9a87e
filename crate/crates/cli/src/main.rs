//! `cmdplab`: run constrained-MDP learning experiments, tabulate the
//! feasibility boundary of the two-state family, self-verify the numerical
//! core and print analysis reports.
//!
//! Exit codes: 0 success, 1 runtime failure (including failed checks),
//! 2 configuration error, 3 true CMDP infeasible.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::CliError;

#[derive(Parser)]
#[command(name = "cmdplab", version, about = "Constrained-MDP learning laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a learner for several seeds and write regret tables.
    Run(RunArgs),
    /// Minimal achievable cost of the two-state family over a θ grid.
    Boundary(BoundaryArgs),
    /// Check the numerical core against independent oracles.
    Verify(VerifyArgs),
    /// Oracle solution, duality, η and regret bounds for one instance.
    Report(ReportArgs),
}

/// Experiment selection shared by `run` and `report`. Flags override the
/// config file; without a file the two-state builtin is used.
#[derive(Args, Debug, Clone)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub learner: Option<String>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub cub: Option<f64>,
    #[arg(long = "T", value_name = "T")]
    pub horizon: Option<u64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Regret budgets b_i, comma separated; implies modified-ucrl-cmdp.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub budgets: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Use seeds 0..N.
    #[arg(long, conflicts_with = "seed_list")]
    pub seeds: Option<u64>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub seed_list: Option<Vec<u64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BoundaryArgs {
    #[arg(long, default_value_t = 0.0)]
    pub theta_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub theta_max: f64,
    /// Number of grid intervals; the grid has steps + 1 points.
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.5)]
    pub cub: f64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Comma-separated subset of checks.
    #[arg(long, value_delimiter = ',')]
    pub only: Option<Vec<String>>,
    /// Multiplies every check's tolerance.
    #[arg(long, default_value_t = 1.0)]
    pub tolerance_scale: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// List the available checks and exit.
    #[arg(long)]
    pub list: bool,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Strict-feasibility margin ε used for η.
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(a) => commands::run(a),
        Command::Boundary(a) => commands::boundary(a),
        Command::Verify(a) => commands::verify(a),
        Command::Report(a) => commands::report(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("cmdplab: {e}");
            ExitCode::from(match e {
                CliError::Config(_) => 2,
                CliError::Infeasible(_) => 3,
                CliError::Runtime(_) => 1,
            })
        }
    }
}
