//! Command-line front end for the boosted ground-state laboratory.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{Writer, EXIT_INVALID, EXIT_NOT_CONVERGED};
use crate::config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] boostedgs::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(boostedgs::Error::NotConverged(_)) => EXIT_NOT_CONVERGED,
            _ => EXIT_INVALID,
        }
    }
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Build the reference bundle (Q, Q_v, subcritical optimiser, constants).
    Reference,
    /// Minimise the energy at the configured mass.
    Solve,
    /// Run the configured ladders and fit their scaling laws.
    Sweep,
    /// Evaluate the regime bounds and nonexistence traces.
    Bounds,
    /// Run the invariant suites on dumps, a bundle and the gradient.
    Verify,
    /// Summarise the reports already present in the output directory.
    Report,
}

#[derive(Debug, Parser)]
#[command(name = "boostedgs", version, about = "Boosted ground states on a periodic spectral grid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the solver and reference seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for concurrent ladders.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Write binary field dumps next to the reports.
    #[arg(long, global = true)]
    dump_fields: bool,
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    if cli.workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    if let Command::Report = cli.command {
        return commands::report(&Writer::new(&cli.out, false)?);
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let cfg = RunConfig::load(path)?.with_seed(cli.seed);
    let grid = cfg.validate()?;
    let w = Writer::new(&cli.out, cli.dump_fields)?;
    match cli.command {
        Command::Reference => commands::reference(&cfg, &grid, &w),
        Command::Solve => commands::solve(&cfg, &grid, &w),
        Command::Sweep => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cli.workers)
                .build()
                .map_err(|e| CliError::Usage(e.to_string()))?;
            commands::sweep(&cfg, &grid, &w, &pool)
        }
        Command::Bounds => commands::bounds(&cfg, &grid, &w),
        Command::Verify => commands::verify(&cfg, &grid, &w),
        Command::Report => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INVALID as u8 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
