//! `linssl`: simulate the SG, EMA and gradient flows of the linear model,
//! solve and classify scalar-data equilibria, and reproduce the convergence
//! statistics.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numerical failure,
//! 3 failed verification.

mod args;
mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use config::ConfigFile;
use error::{CliResult, EXIT_OK, EXIT_USAGE};

fn run(cli: Cli) -> CliResult<()> {
    let cfg = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let path = cfg.path.as_deref();
    match cli.command {
        Command::Simulate(a) => commands::simulate(a, cfg.simulate, path),
        Command::Equilibria(a) => commands::equilibria(a, cfg.equilibria),
        Command::Stability(a) => commands::stability(a, cfg.stability),
        Command::MonteCarlo(a) => commands::monte_carlo(a, cfg.montecarlo, path),
        Command::Verify(a) => commands::verify(a, cfg.verify),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
