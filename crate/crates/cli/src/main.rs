//! `shiftcov`: random-shift covariate tests from the command line.
//!
//! Every run is described by one TOML document; flags only choose the
//! config, the seed, the output and the verbosity. Exit codes: 0 success,
//! 1 internal error, 2 input or data error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{CliError, Output};

#[derive(Parser)]
#[command(name = "shiftcov", version, about = "Nonparametric covariate tests for spatial point patterns")]
struct Cli {
    /// Log progress to stderr; repeat for more detail.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Random-shift test of one covariate given nuisance covariates.
    Test(Common),
    /// τ̂ and τ̂ₚ for every covariate.
    Corr(Common),
    /// Backward elimination by shift-test p-values.
    Select(Common),
    /// Simulate a catalog model; `--out` names the output directory.
    Simulate(Common),
    /// Rejection fractions of a list of tests over replicated simulations;
    /// an `--out` ending in `.csv` writes the table instead of JSON.
    Replicate(Common),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Test(c) => commands::cmd_test(&c.config, c.seed, &Output { path: c.out }),
        Command::Corr(c) => commands::cmd_corr(&c.config, c.seed, &Output { path: c.out }),
        Command::Select(c) => commands::cmd_select(&c.config, c.seed, &Output { path: c.out }),
        Command::Simulate(c) => {
            let dir = c.out.ok_or_else(|| CliError::Data("simulate needs --out <DIR>".into()))?;
            commands::cmd_simulate(&c.config, c.seed, &dir)
        }
        Command::Replicate(c) => commands::cmd_replicate(&c.config, c.seed, &Output { path: c.out }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(CliError::Data(m))) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Ok(Err(CliError::Internal(m))) => {
            eprintln!("internal error: {m}");
            ExitCode::from(1)
        }
        Err(_) => ExitCode::from(1),
    }
}
