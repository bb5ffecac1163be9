//! `hillband` — batch driver for band-structure computations and the
//! inverse problem of recovering a periodic potential from band samples.
//!
//! Subcommands:
//! - `run`: a descent run (fixed discretization or adaptive refinement);
//! - `oracle`: comb dispersion sweep, checked against the closed form;
//! - `validate-estimator`: a posteriori error bounds for a target's bands;
//! - `compare`: relative timing of two finished runs.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 on numerical
//! failures. Runs are deterministic for a fixed configuration at any
//! thread count.

mod config;
mod exec;

use clap::{Parser, Subcommand};
use config::{Mode, Overrides, RunConfig};
use exec::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "hillband", version, about = "Band structure and inverse-problem batch runs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Execute a configured run (default mode: fixed-discretization descent).
    Run(Overrides),
    /// Sweep comb amplitudes against the closed-form dispersion relation.
    Oracle(Overrides),
    /// Certify band energies of the target with a posteriori bounds.
    ValidateEstimator(Overrides),
    /// Print J, N, elapsed time, and their ratio tau for two summaries.
    Compare {
        /// summary.json of the run in the numerator.
        a: PathBuf,
        /// summary.json of the run in the denominator.
        b: PathBuf,
    },
}

/// Resolves the configuration and runs it; subcommands other than `run`
/// force their mode over whatever the file or flags say.
fn run_with(ov: &Overrides, forced_mode: Option<Mode>) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(ov, forced_mode).map_err(CliError::Config)?;
    exec::execute(&cfg)
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Run(ov) => run_with(ov, None),
        Cmd::Oracle(ov) => run_with(ov, Some(Mode::Oracle)),
        Cmd::ValidateEstimator(ov) => run_with(ov, Some(Mode::EstimatorValidate)),
        Cmd::Compare { a, b } => exec::compare(a, b),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ CliError::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
