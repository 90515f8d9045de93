//! Command-line front end for the star-network QKD lab: state
//! characterization, threshold verification, protocol simulation, and
//! region sweeps that emit figure data as CSV.
//!
//! Exit codes: 0 success / useful state, 1 criteria failure, 2 input error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod sweep;

#[derive(Parser)]
#[command(
    name = "fnn-qkd-lab",
    version,
    about = "Star-network QKD simulation and security analysis"
)]
pub struct Cli {
    /// Emit machine-readable JSON where applicable.
    #[arg(long, global = true)]
    pub json: bool,

    /// Random seed override.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Grid step override for the threshold oracle.
    #[arg(long, global = true)]
    pub grid_step: Option<f64>,

    /// Output file (sweep CSV, simulation result JSON).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Evaluate all security criteria and classify states.
    Characterize(CharacterizeArgs),
    /// Re-derive every QBER threshold by grid search and compare to the
    /// closed forms.
    VerifyThresholds,
    /// Run a protocol simulation from a JSON config.
    Simulate(SimulateArgs),
    /// Sweep a state family and emit per-point margins as CSV.
    Sweep(SweepArgs),
    /// Print the quantum maximum of the trilocal inequality for given states.
    Bound(BoundArgs),
}

#[derive(Args)]
pub struct CharacterizeArgs {
    /// State descriptor: inline JSON or @file. Give one (identical states)
    /// or three.
    #[arg(long = "state", required = true)]
    pub states: Vec<String>,

    /// Protocol whose classification drives the exit code.
    #[arg(long, default_value = "trilocal")]
    pub protocol: String,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Path to a protocol config JSON.
    #[arg(long)]
    pub config: PathBuf,

    /// Estimate the witness from sampled rounds instead of exact statistics.
    #[arg(long)]
    pub sampled: bool,

    /// Continue through sifting even if the witness test fails.
    #[arg(long)]
    pub force_continue: bool,

    /// Override the protocol variant ("trilocal" or "chsh").
    #[arg(long)]
    pub variant: Option<String>,
}

#[derive(Args)]
pub struct SweepArgs {
    /// Family: identical-plane, ext1, ext2, ext3 or ext4.
    #[arg(long)]
    pub family: String,

    /// Grid step for every free coordinate.
    #[arg(long)]
    pub step: Option<f64>,

    /// Lower bound for every free coordinate.
    #[arg(long, default_value_t = 0.0)]
    pub min: f64,

    /// Upper bound for every free coordinate (clamped per coordinate).
    #[arg(long, default_value_t = 1.0)]
    pub max: f64,
}

#[derive(Args)]
pub struct BoundArgs {
    /// State descriptor: inline JSON or @file. Give one or three.
    #[arg(long = "state", required = true)]
    pub states: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Characterize(args) => commands::characterize(&cli, args),
        Command::VerifyThresholds => commands::verify_thresholds(&cli),
        Command::Simulate(args) => commands::simulate(&cli, args),
        Command::Sweep(args) => sweep::run_sweep(&cli, args),
        Command::Bound(args) => commands::bound(&cli, args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
