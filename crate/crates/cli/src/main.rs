//! `topoflock`: simulations and verification studies from a config file.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

type CommandFn = fn(&RunConfig, &std::path::Path, u64) -> anyhow::Result<i32>;

#[derive(Parser, Debug)]
#[command(name = "topoflock", version, about = "Topological Euler-alignment solver and verification studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the time integrator and write diagnostics.
    Simulate(Args),
    /// Check the coercivity inequalities of the alignment operator.
    Coercivity(Args),
    /// Check the fractional Sobolev inequalities on random polynomials.
    AppendixChecks(Args),
    /// Vanishing-viscosity convergence study.
    ViscStudy(Args),
}

#[derive(clap::Args, Debug)]
struct Args {
    /// Configuration file (TOML sections grid, kernel, domain, evolution, output).
    #[arg(long)]
    config: PathBuf,
    /// Override a key, e.g. `--set kernel.alpha=0.5`. Repeatable; applied after the file.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
    /// Output directory; created if missing, must be empty otherwise.
    #[arg(long)]
    out: PathBuf,
    /// Seed for the random test families.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { commands::EXIT_MISUSE } else { commands::EXIT_OK };
            return ExitCode::from(code as u8);
        }
    };
    let (args, run): (&Args, CommandFn) = match &cli.command {
        Command::Simulate(a) => (a, commands::simulate),
        Command::Coercivity(a) => (a, commands::coercivity),
        Command::AppendixChecks(a) => (a, commands::appendix_checks),
        Command::ViscStudy(a) => (a, commands::visc_study),
    };
    let result = RunConfig::load(&args.config, &args.set)
        .map_err(anyhow::Error::from)
        .and_then(|config| run(&config, &args.out, args.seed));
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::EXIT_MISUSE as u8)
        }
    }
}
