//! `bubblespec` command-line front end.
//!
//! Exit status: 0 on success, 1 on invalid input or I/O problems, 2 when a
//! numerical procedure fails.

mod commands;
mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use output::Emitter;

#[derive(Debug)]
pub enum CliError {
    Core(bubblespec::Error),
    Config(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => e.exit_code() as u8,
            CliError::Config(_) | CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<bubblespec::Error> for CliError {
    fn from(e: bubblespec::Error) -> Self {
        CliError::Core(e)
    }
}

#[derive(Parser)]
#[command(
    name = "bubblespec",
    version,
    about = "Spectral analysis and simulation of a thermally damped gas bubble"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Flat TOML config with the physical parameters and run settings.
    config: PathBuf,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Equilibrium radius, density and derived constants.
    Equilibrium(RunArgs),
    /// Roots of the characteristic function and the truncated abscissa.
    Spectrum(RunArgs),
    /// Rigorous decay-rate lower bound.
    RateBound(RunArgs),
    /// Linearized evolution from a radial displacement.
    SimulateLinear(RunArgs),
    /// Nonlinear Galerkin evolution, optionally forced.
    SimulateNonlinear(RunArgs),
    /// Periodic orbit under periodic forcing and its Floquet multipliers.
    Periodic(RunArgs),
    /// Sweep over thermal diffusivity comparing all decay-rate estimates.
    CompareRates(RunArgs),
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("BUBBLESPEC_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n >= 1).ok_or_else(|| {
        CliError::Config(format!(
            "BUBBLESPEC_THREADS must be a positive integer, got `{v}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size thread pool: {e}")))
}

type Handler = fn(&RunConfig, &mut Emitter) -> Result<(), CliError>;

fn run(command: Command) -> Result<Vec<PathBuf>, CliError> {
    configure_threads()?;
    let (args, f): (&RunArgs, Handler) = match &command {
        Command::Equilibrium(a) => (a, commands::equilibrium),
        Command::Spectrum(a) => (a, commands::spectrum),
        Command::RateBound(a) => (a, commands::rate_bound),
        Command::SimulateLinear(a) => (a, commands::simulate_linear),
        Command::SimulateNonlinear(a) => (a, commands::simulate_nonlinear),
        Command::Periodic(a) => (a, commands::periodic),
        Command::CompareRates(a) => (a, commands::compare_rates),
    };
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", args.config.display())))?;
    let cfg = RunConfig::from_toml_str(&text)?;
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let mut emitter = Emitter::new(&dir, &cfg.hash)?;
    f(&cfg, &mut emitter)?;
    Ok(emitter.written)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
