//! `fishmonger`: simulate the committed pricing mechanism, verify its
//! guarantees, and serve live play sessions.
//!
//! Exit status: 0 success, 1 runtime error or failed check, 2 bad
//! configuration or usage.

mod audit;
mod config;
mod oracle;
mod output;
mod serve;
mod simulate;
mod sweep;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{ConfigError, Overrides};

#[derive(Parser)]
#[command(name = "fishmonger", version, about = "Committed pricing for the repeated posted-price auction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug, Default)]
pub struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub rounds: Option<u64>,
    #[arg(long)]
    pub replications: Option<u64>,
    /// Cook's valuation.
    #[arg(long)]
    pub q: Option<f64>,
    /// Naive acceptance threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

impl RunArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            rounds: self.rounds,
            replications: self.replications,
            q: self.q,
            threshold: self.threshold,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Play one game (or a Monte Carlo batch) and write its artifacts.
    Simulate(RunArgs),
    /// Run verification suites; exits 1 if any check fails.
    Verify(verify::VerifyArgs),
    /// Distortion or threshold tables as CSV.
    Sweep(sweep::SweepArgs),
    /// Finite-horizon best response of the cook by expectimax.
    Oracle(oracle::OracleArgs),
    /// Serve the play API over HTTP.
    Serve(serve::ServeArgs),
    /// Audit a play session log or a simulated history.
    Audit(audit::AuditArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => simulate::run(&args),
        Command::Verify(args) => verify::run(&args),
        Command::Sweep(args) => sweep::run(&args),
        Command::Oracle(args) => oracle::run(&args),
        Command::Serve(args) => serve::run(&args),
        Command::Audit(args) => audit::run(&args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) if err.downcast_ref::<ConfigError>().is_some() => {
            eprintln!("config error: {err:#}");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
