//! `klyshko`: simulated heralded-photon calibration runs from a TOML config.
//!
//! ```text
//! klyshko curve --config run.toml --out out/
//! klyshko sweep --seed 7 && klyshko fit
//! ```

mod commands;
mod config;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::fit::FitArgs;
use commands::simulate::SimulateArgs;
use commands::Context;
use config::RunConfig;
use error::{CliError, Result};

const DEFAULT_OUT_DIR: &str = "klyshko-out";

#[derive(Debug, Parser)]
#[command(name = "klyshko", version, about = "Heralded detector-efficiency calibration workbench")]
struct Cli {
    /// TOML run configuration. Built-in defaults are used when absent.
    #[arg(short, long, global = true, value_name = "TOML")]
    config: Option<PathBuf>,
    /// Master seed, overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overrides `output_dir` in the config.
    #[arg(short, long, global = true, env = "KLYSHKO_OUT", value_name = "DIR")]
    out: Option<PathBuf>,
    /// Simulation worker threads. Results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Conditional click probability versus squeezing, both directions.
    Curve,
    /// Simulate one pair run; write tags, counts and the delay histogram.
    Simulate(SimulateArgs),
    /// Simulate a pump-power sweep and write the sweep CSV.
    Sweep,
    /// Fit total efficiencies to a sweep CSV.
    Fit(FitArgs),
    /// Heralded g2 across the configured pump grid.
    G2,
    /// Accidental coincidences versus coincidence window.
    Accidentals,
}

fn context(cli: &Cli) -> Result<Context> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    cfg.validate()?;
    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    std::fs::create_dir_all(&out_dir).map_err(|source| CliError::OutputDir {
        path: out_dir.clone(),
        source,
    })?;
    Ok(Context { cfg, out_dir })
}

fn run(cli: &Cli) -> Result<()> {
    let ctx = context(cli)?;
    match &cli.command {
        Command::Curve => commands::curve::run(&ctx),
        Command::Simulate(args) => commands::simulate::run(&ctx, args),
        Command::Sweep => commands::sweep::run(&ctx),
        Command::Fit(args) => commands::fit::run(&ctx, args),
        Command::G2 => commands::g2::run(&ctx),
        Command::Accidentals => commands::accidentals::run(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
