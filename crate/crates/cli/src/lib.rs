//! Command-line driver for the jumplab experiments.
//!
//! Exit status: 0 when every requested check passes, 1 when a check fails
//! (failing ids go to standard error), 2 for invalid input or a missing
//! archive, 3 when a linear solve does not converge.

pub mod commands;
pub mod config;
pub mod experiments;
pub mod output;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "jumplab", version, about = "Interface transmission problem experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scenario/config file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Seed for all randomness; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Target mesh size; overrides the config.
    #[arg(long = "mesh-h")]
    pub mesh_h: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Safety factor applied to calibrated constants; overrides the config.
    #[arg(long)]
    pub safety: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one scenario and write the solution.
    Solve(Common),
    /// Three-region inequality across the interface, calibrated on an ensemble.
    VerifyThreeRegion(Common),
    /// Three-sphere inequality inside one subdomain, calibrated on an ensemble.
    VerifyThreeSphere(Common),
    /// Carleman ratio curves for analytic test pairs.
    VerifyCarleman(Common),
    /// Propagation of smallness constant over the ensemble.
    Propagate(Common),
    /// Calibrate size constants on a disk family and write the archive.
    Calibrate(Common),
    /// Bound the size of the configured inclusion from a calibration archive.
    SizeEstimate {
        #[command(flatten)]
        common: Common,
        /// Archive path; defaults to the config's archive name inside --out.
        #[arg(long)]
        archive: Option<PathBuf>,
    },
    /// Summarize report ledgers (files, or directories of *.reports.jsonl).
    Report {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Directory for report.csv.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match commands::dispatch(&cli.command) {
        Ok(failures) if failures.is_empty() => EXIT_OK,
        Ok(failures) => {
            eprintln!("failing: {}", failures.join(" "));
            EXIT_CHECK_FAILED
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &jumplab::Error) -> i32 {
    match e {
        jumplab::Error::NonConvergence { .. } => EXIT_NONCONVERGENCE,
        _ => EXIT_INVALID,
    }
}
