//! `delaydiff`: reproducible stability experiments driven by JSON configs.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Compute(#[from] delaydiff_core::Error),
    #[error("certification mismatch: roots found = {found}, argument principle count = {counted}")]
    Mismatch { found: usize, counted: i64 },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Compute(_) | CliError::Io(_) => 3,
            CliError::Mismatch { .. } => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "delaydiff", version, about = "Stability experiments for delay-difference equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Strong-stability verdict for a measure (JSON on stdout).
    Analyze(Common),
    /// Simulate from an initial condition; writes trajectory.csv, windows.csv, decay.json.
    Simulate(Common),
    /// Simulate a perturbed system; also writes phi.json.
    Perturb(Common),
    /// Stability map of the affine family; writes region.csv and region.svg.
    Sweep(Common),
    /// Zeros of a quasi-polynomial in a rectangle; writes roots.csv.
    Roots(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the config `out`, default `.`).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("DELAYDIFF_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Config(format!("DELAYDIFF_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Analyze(c) => commands::analyze(&c),
        Command::Simulate(c) => commands::simulate(&c),
        Command::Perturb(c) => commands::perturb(&c),
        Command::Sweep(c) => commands::sweep(&c),
        Command::Roots(c) => commands::roots(&c),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
