//! Scenario files, sweeps and result tables for the `vacdec` command.

pub mod config;
pub mod run;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "vacdec", version, about = "Vacuum decoherence near a conducting plate")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate a scenario file, optionally over a sweep.
    Run(run::RunArgs),
    /// Print the canonical form of a scenario file and its hash.
    Canonicalize { scenario: std::path::PathBuf },
    /// Evaluate a closed-form limit, e.g. `adiabatic:1,0.01`.
    Limit { case: String },
}

/// Dispatches a parsed command line; returns the exit code.
pub fn main_with(cli: Cli) -> i32 {
    match cli.command {
        Command::Run(args) => run::run(&args),
        Command::Canonicalize { scenario } => match config::ScenarioFile::read(&scenario) {
            Ok(f) => {
                print!("{}", config::canonicalize(&f.raw));
                eprintln!("config_hash {}", config::config_hash(&f.raw));
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                2
            }
        },
        Command::Limit { case } => match case.parse::<vacdec_core::oracle::LimitCase>().and_then(vacdec_core::oracle::analytic_limits) {
            Ok(v) => {
                println!("{v:e}");
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                2
            }
        },
    }
}
