//! Command-line front end: argument and config handling, experiment
//! orchestration, CSV/JSON emission.
//!
//! Exit status: 0 success, 2 bad parameters, 3 construction failure,
//! 4 verification failure. Errors are reported on stderr as
//! `{"error": <kind>, "reason": <text>}`.

mod commands;
pub mod config;
pub mod reproduce;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

use config::{DofRegionArgs, ExperimentConfig, FeasibleBetaArgs, RateSweepArgs, ReproduceArgs, ScheduleArgs, VerifyArgs};

#[derive(Debug, Parser)]
#[command(name = "ccsched", version, about = "Build, verify and evaluate multicast delivery schedules")]
pub struct Cli {
    /// TOML file with a `seed` key and one table per command.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Global seed; every random stream derives from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the feasible symmetric per-user stream counts.
    FeasibleBeta(FeasibleBetaArgs),
    /// Build a symmetric or asymmetric table.
    Schedule(ScheduleArgs),
    /// Check a table symbolically and, optionally, with random channels.
    Verify(VerifyArgs),
    /// Enumerate achievable DoF values with witness tables.
    DofRegion(DofRegionArgs),
    /// Sweep the symmetric rate over SNR.
    RateSweep(RateSweepArgs),
    /// Run the reference cases and print a pass/fail summary.
    Reproduce(ReproduceArgs),
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Core(ccsched_core::Error),
    /// A check ran to completion and failed; artifacts were still written.
    Failed(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        use ccsched_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Io(_) => 2,
            CliError::Failed(_) => 4,
            CliError::Core(e) => match e {
                E::RejectedParameters(_) | E::MalformedTable(_) | E::InfeasibleM { .. } | E::NoDonor => 2,
                E::ConstructionFailure(_) | E::SearchFailure(_) | E::AssemblyFailure { .. } => 3,
                E::NullityDeficient { .. } | E::Verification(_) => 4,
            },
        }
    }

    pub fn kind(&self) -> &str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io",
            CliError::Failed(_) => "verification-failure",
            CliError::Core(e) => e.kind(),
        }
    }

    pub fn to_json(&self) -> String {
        let reason = match self {
            CliError::Usage(s) | CliError::Io(s) | CliError::Failed(s) => s.clone(),
            CliError::Core(e) => e.to_string(),
        };
        json!({ "error": self.kind(), "reason": reason }).to_string()
    }
}

impl From<ccsched_core::Error> for CliError {
    fn from(e: ccsched_core::Error) -> Self {
        CliError::Core(e)
    }
}

/// Parses `args` (program name first), runs the command, returns the exit
/// status.
pub fn run<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 0,
                _ => 2,
            };
            let _ = e.print();
            if code != 0 {
                eprintln!("{}", CliError::Usage(e.kind().to_string()).to_json());
            }
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    let mut resolved = ExperimentConfig {
        seed: Some(seed),
        ..Default::default()
    };
    match cli.command {
        Command::FeasibleBeta(args) => {
            let args = args.overlay(file.feasible_beta).resolve()?;
            resolved.feasible_beta = Some(args.clone());
            commands::feasible_beta(&args)
        }
        Command::Schedule(args) => {
            let args = args.overlay(file.schedule).resolve()?;
            resolved.schedule = Some(args.clone());
            commands::schedule(&args, &resolved)
        }
        Command::Verify(args) => {
            let args = args.overlay(file.verify).resolve()?;
            resolved.verify = Some(args.clone());
            commands::verify(&args, seed, &resolved)
        }
        Command::DofRegion(args) => {
            let args = args.overlay(file.dof_region).resolve()?;
            resolved.dof_region = Some(args.clone());
            commands::dof_region(&args, seed, &resolved)
        }
        Command::RateSweep(args) => {
            let args = args.overlay(file.rate_sweep).resolve()?;
            resolved.rate_sweep = Some(args.clone());
            commands::rate_sweep(&args, seed, &resolved)
        }
        Command::Reproduce(args) => {
            let args = args.overlay(file.reproduce).resolve()?;
            resolved.reproduce = Some(args.clone());
            reproduce::run(&args, seed, &resolved)
        }
    }
}
