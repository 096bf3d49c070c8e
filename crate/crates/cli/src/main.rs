//! `devissage`: runs the simulation experiments and writes per-path CSV
//! records plus a JSON summary of every checked claim.

mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{boundary, coupling, dudley, harmonic, rotsym, toy};
use error::CliError;

const THREADS_ENV: &str = "DEVISSAGE_THREADS";

#[derive(Parser, Debug)]
#[command(name = "devissage", version, about = "Reproducible Monte Carlo experiments on diffusions and their boundaries")]
struct Cli {
    /// Worker threads (overrides DEVISSAGE_THREADS); never changes results.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dudley's relativistic diffusion: drift rates, boundary, remark link.
    Dudley(dudley::Args),
    /// Brownian motion on a warped product: conditions and escape angles.
    Rotsym(rotsym::Args),
    /// The three toy systems: tail variables and equivariance residuals.
    Toy(toy::Args),
    /// Three-stage shift-coupling of the (α, β, γ) sub-diffusion.
    Coupling(coupling::Args),
    /// Two-sample test of boundary-law equivariance.
    BoundaryLaw(boundary::Args),
    /// Monte Carlo harmonic functions and the tower check.
    Harmonic(harmonic::Args),
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(raw) => Some(
                raw.trim()
                    .parse::<usize>()
                    .map_err(|e| CliError::Config(format!("invalid value for `{THREADS_ENV}`: {e}")))?,
            ),
            Err(_) => None,
        },
    };
    if n == Some(0) {
        return Err(CliError::Config("threads must be at least 1".into()));
    }
    Ok(n)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = thread_count(cli.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    match &cli.command {
        Command::Dudley(a) => dudley::run(a),
        Command::Rotsym(a) => rotsym::run(a),
        Command::Toy(a) => toy::run(a),
        Command::Coupling(a) => coupling::run(a),
        Command::BoundaryLaw(a) => boundary::run(a),
        Command::Harmonic(a) => harmonic::run(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("devissage: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
