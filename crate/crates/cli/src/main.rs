//! `magicrect`: simulation, bound catalogs, norm verification and the
//! networked referee/prover harness.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or configuration
//! error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "magicrect", version, about = "Magic-rectangle self-tests of n Bell pairs")]
struct Cli {
    /// JSON run configuration; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: $MAGICRECT_OUT_DIR, then `.`).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// More log output; repeat for more.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct DeviceArgs {
    /// honest, noisy, padded or standard-square.
    #[arg(long)]
    pub device: Option<String>,
    /// Device descriptor file (overrides --device).
    #[arg(long)]
    pub device_file: Option<PathBuf>,
    /// Uniform Y-rotation angle applied to every pair.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    /// Per-pair rotation angles, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub angles: Option<Vec<f64>>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the protocol in process; write a transcript and an ε report.
    Simulate(commands::SimulateArgs),
    /// Evaluate the bound catalog for given deficits.
    Bounds(commands::BoundsArgs),
    /// Measure every bound's left-hand side over a rotation grid.
    VerifyNorms(commands::VerifyArgs),
    /// Exact classical value of a game spec file.
    ClassicalValue(commands::ClassicalArgs),
    /// Print and verify the pair-check edge colouring.
    Coloring(commands::ColoringArgs),
    /// Referee a session between two connecting provers.
    ServeReferee(commands::RefereeArgs),
    /// Answer referee questions through a state service.
    Prover(commands::ProverArgs),
    /// Hold the joint state and answer both provers' measurement requests.
    StateService(commands::ServiceArgs),
}

/// Marker error for exit code 1.
#[derive(Debug)]
pub struct VerificationFailed(pub String);

impl std::fmt::Display for VerificationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "verification failed: {}", self.0)
    }
}

impl std::error::Error for VerificationFailed {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = RunConfig::load(cli.config.as_deref()).and_then(|cfg| {
        let out_dir = cfg.out_dir(cli.out_dir.clone());
        let ctx = commands::Ctx { cfg, out_dir };
        match cli.command {
            Command::Simulate(a) => commands::simulate(&ctx, a),
            Command::Bounds(a) => commands::bounds(&ctx, a),
            Command::VerifyNorms(a) => commands::verify_norms(&ctx, a),
            Command::ClassicalValue(a) => commands::classical_value(&ctx, a),
            Command::Coloring(a) => commands::coloring(&ctx, a),
            Command::ServeReferee(a) => commands::serve_referee(&ctx, a),
            Command::Prover(a) => commands::prover(&ctx, a),
            Command::StateService(a) => commands::state_service(&ctx, a),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<VerificationFailed>() => {
            eprintln!("magicrect: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("magicrect: {e:#}");
            ExitCode::from(2)
        }
    }
}
