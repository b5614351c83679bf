//! `tvcert` — drive the total-variation certification toolkit from the
//! command line: ROF solves with self-certification, verification of
//! claimed subgradient pairs and interval certificates, TV flow runs,
//! calibrability checks of parametric shapes, boundary-aware mollification,
//! and the sampling subgradient oracle.
//!
//! Exit codes triage the outcome, not just success:
//!
//! * 0 — the requested verification verdict holds (certified/calibrable);
//! * 2 — refuted: some checked condition demonstrably fails;
//! * 3 — inconclusive: the grid or the mollification ladder cannot decide
//!   (failed Cauchy convergence, iteration caps);
//! * 1 — configuration or I/O errors.
//!
//! Refuted and inconclusive are deliberately distinct: a non-converged
//! trace diagnosis says the resolution is insufficient, not that the
//! certificate is wrong.

use clap::{Parser, Subcommand};
use std::fmt;
use std::process::ExitCode;

mod commands;
mod report;

use commands::{
    CalibrateArgs, CertifyArgs, DenoiseArgs, FlowArgs, MollifyArgs, OracleArgs,
};

/// What the command prints on stdout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportFormat {
    /// Human-readable condition-by-condition lines.
    Text,
    /// The full report document.
    Json,
    /// Tabular per-step rows (flow only).
    Csv,
}

#[derive(Parser, Debug)]
#[command(
    name = "tvcert",
    version,
    about = "Total-variation subgradient certificates on pixel grids",
    propagate_version = true
)]
pub struct RunConfig {
    #[command(subcommand)]
    command: Command,

    /// Report format printed to stdout.
    #[arg(long, global = true, value_enum, default_value_t = ReportFormat::Text)]
    pub(crate) report: ReportFormat,

    /// Seed determining every randomized sample of the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub(crate) seed: u64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve min TV(u) + λ‖u − u0‖² and certify the solution.
    Denoise(DenoiseArgs),
    /// Verify a claimed subgradient pair or interval certificate.
    Certify(CertifyArgs),
    /// Run the TV flow by minimizing movements.
    Flow(FlowArgs),
    /// Check a parametric shape for calibrability.
    Calibrate(CalibrateArgs),
    /// Mollify a dual field with the boundary-aware kernel.
    Mollify(MollifyArgs),
    /// Sample the subgradient inequality for a claimed pair.
    Oracle(OracleArgs),
}

/// A command that did not produce a verdict: configuration trouble or a
/// core error, each with its own exit code.
pub enum Failure {
    Config(String),
    Core(tvcert_core::Error),
}

impl From<tvcert_core::Error> for Failure {
    fn from(e: tvcert_core::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Config(format!("JSON: {e}"))
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(tvcert_core::Error::Io(e))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(msg) => write!(f, "{msg}"),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

impl Failure {
    /// Config and I/O problems exit 1. Core errors that mean "could not
    /// decide at this resolution" — iteration caps, non-Cauchy traces —
    /// exit 3, and an interval violation refutes the certificate outright.
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Core(e) => match e {
                tvcert_core::Error::IterationLimit { .. }
                | tvcert_core::Error::TraceNotConverged { .. } => 3,
                tvcert_core::Error::IntervalViolation { .. } => 2,
                _ => 1,
            },
        }
    }
}

fn validate_thread_cap() -> Result<(), Failure> {
    match std::env::var("TVCERT_THREADS") {
        Err(std::env::VarError::NotPresent) => Ok(()),
        Ok(v) => match v.parse::<usize>() {
            // The numerics are sequential; any positive cap is honored.
            Ok(n) if n >= 1 => Ok(()),
            _ => Err(Failure::Config(format!(
                "TVCERT_THREADS must be a positive integer, got {v:?}"
            ))),
        },
        Err(e) => Err(Failure::Config(format!("TVCERT_THREADS: {e}"))),
    }
}

fn main() -> ExitCode {
    // Command-line misuse is a configuration error (exit 1); clap's
    // default exit code of 2 would collide with "refuted". Help and
    // version requests surface here too and stay successful.
    let config = match RunConfig::try_parse() {
        Ok(config) => config,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = validate_thread_cap().and_then(|()| match &config.command {
        Command::Denoise(args) => args.run(&config),
        Command::Certify(args) => args.run(&config),
        Command::Flow(args) => args.run(&config),
        Command::Calibrate(args) => args.run(&config),
        Command::Mollify(args) => args.run(&config),
        Command::Oracle(args) => args.run(&config),
    });
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
