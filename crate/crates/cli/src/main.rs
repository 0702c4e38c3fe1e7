mod commands;
mod config;
mod table;

use clap::{Parser, Subcommand};
use config::{RunArgs, RunConfig};
use igabem::geometry::GeometryError;
use igabem::scattering::ScatteringError;
use std::process::ExitCode;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("unknown geometry `{0}` (expected torus, sphere or a geometry file)")]
    UnknownGeometry(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Scattering(#[from] ScatteringError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("geometry failed validation")]
    InvalidGeometry,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::UnknownGeometry(_) | CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "igabem", version, about = "Isogeometric BEM for acoustic scattering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scattering problem and evaluate the scattered field.
    Solve(RunArgs),
    /// Errors over a range of degrees and refinement levels.
    Convergence(RunArgs),
    /// Assembly and solve time per refinement level.
    Scaling(RunArgs),
    /// Direct against clustered potential evaluation for doubling point counts.
    PotentialBench(RunArgs),
    /// Interface conformity report for a geometry.
    ValidateGeometry(RunArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, args) = match &cli.command {
        Command::Solve(a) => ("solve", a),
        Command::Convergence(a) => ("convergence", a),
        Command::Scaling(a) => ("scaling", a),
        Command::PotentialBench(a) => ("potential-bench", a),
        Command::ValidateGeometry(a) => ("validate-geometry", a),
    };
    let cfg = RunConfig::from_args(args)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Solve(_) => commands::solve(&cfg, name),
        Command::Convergence(_) => commands::convergence(&cfg, name),
        Command::Scaling(_) => commands::scaling(&cfg, name),
        Command::PotentialBench(_) => commands::potential_bench(&cfg, name),
        Command::ValidateGeometry(_) => commands::validate_geometry(&cfg, name),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
