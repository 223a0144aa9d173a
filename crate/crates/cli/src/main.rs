//! `modeforge <modes|design|scan|simulate|fit> --config <path> [--out <dir>]`
//!
//! Exit codes: 0 success, 1 I/O, 2 config, 3 design infeasible,
//! 4 simulation, 5 fit.

mod commands;
mod config;
mod output;
mod pipeline;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use output::OutDir;

#[derive(Parser)]
#[command(name = "modeforge", version, about = "Mode-engineered XX gate workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mode frequencies, participation and Lamb–Dicke matrices.
    Modes(Args),
    /// Gate time, tone index and Rabi frequency for each gate.
    Design(Args),
    /// Residual coupling and odd population against a common detuning offset.
    Scan(Args),
    /// Populations, parity curve and fidelity of each gate.
    Simulate(Args),
    /// Collective fit of the mode frequencies to scan files.
    Fit(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    pub fn io(error: anyhow::Error) -> Self {
        Self { code: 1, error }
    }
    pub fn config(error: anyhow::Error) -> Self {
        Self { code: 2, error }
    }
    pub fn infeasible(error: anyhow::Error) -> Self {
        Self { code: 3, error }
    }
    pub fn simulation(error: anyhow::Error) -> Self {
        Self { code: 4, error }
    }
    pub fn fit(error: anyhow::Error) -> Self {
        Self { code: 5, error }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (Command::Modes(args)
    | Command::Design(args)
    | Command::Scan(args)
    | Command::Simulate(args)
    | Command::Fit(args)) = &cli.command;
    let cfg = ExperimentConfig::load(&args.config).map_err(Failure::config)?;
    let dir = args.out.clone().unwrap_or_else(|| cfg.output.directory.clone());
    let out = OutDir::create(&dir).map_err(Failure::io)?;
    match &cli.command {
        Command::Modes(_) => commands::modes(&cfg, &out),
        Command::Design(_) => commands::design(&cfg, &out),
        Command::Scan(_) => commands::scan(&cfg, &out),
        Command::Simulate(_) => commands::simulate(&cfg, &out),
        Command::Fit(_) => {
            let base = args.config.parent().unwrap_or(Path::new("."));
            commands::fit(&cfg, base, &out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("modeforge: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
