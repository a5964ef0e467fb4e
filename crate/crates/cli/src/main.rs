//! `nlvc <command> --config <file> [--out <dir>] [--seed <u64>] [--tol <f64>] [--threads <n>]`

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Continuum symbol on a log-polar frequency grid, as CSV.
    Symbol,
    /// Seeded identity and inequality suite.
    Verify,
    /// Discrete Poincaré constant, optionally with a refinement study.
    Poincare,
    /// Convection–diffusion Dirichlet problem.
    SolveCd,
    /// Linear elasticity Dirichlet problem.
    SolveElasticity,
    /// Helmholtz split of a constrained vector field.
    Helmholtz,
    /// Convergence of the operators to their local counterparts.
    Localize,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Symbol => "symbol",
            Command::Verify => "verify",
            Command::Poincare => "poincare",
            Command::SolveCd => "solve-cd",
            Command::SolveElasticity => "solve-elasticity",
            Command::Helmholtz => "helmholtz",
            Command::Localize => "localize",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nlvc", version, about = "Nonlocal half-ball vector calculus on periodic lattices")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Run configuration, or a manifest from an earlier run.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "nlvc-out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    pub tol: Option<f64>,
    /// Worker threads; falls back to NLVC_THREADS.
    #[arg(long, env = "NLVC_THREADS")]
    pub threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
