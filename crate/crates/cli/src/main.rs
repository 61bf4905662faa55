mod config;
mod emit;
mod error;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{parse_config, ExperimentConfig};
use crate::emit::Format;
use crate::error::CliError;
use crate::run::{CompareMode, RunOptions};

/// Entwined-pair random walks, their charge-density stencils and continuum
/// references.
#[derive(Debug, Parser)]
#[command(name = "entwine", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (JSON, schema 1).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides walker.master_seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for ensembles; results do not depend on it.
    #[arg(long, global = true, env = "ENTWINE_THREADS")]
    threads: Option<usize>,

    /// Output directory (default: output.dir, then the working directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Table format for evolve, pde and dispersion.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo ensemble, written as a tally in NDJSON.
    Walk,
    /// Stencil slices.
    Evolve,
    /// Continuum reference slices.
    Pde,
    /// Scores one route against another; writes a report in NDJSON.
    Compare {
        #[arg(long, value_enum, default_value = "walk-evolve")]
        mode: CompareMode,
    },
    /// Frequencies and Klein-Gordon residuals over the configured (k, c) grid.
    Dispersion,
    /// δ-refinement study of the diffusive limit.
    Convergence,
    /// Parses the config and prints it with defaults filled.
    ValidateConfig,
}

fn load(path: &Option<PathBuf>) -> Result<ExperimentConfig, CliError> {
    let path = path.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if cli.threads == Some(0) {
        return Err(CliError::Config("--threads: must be positive".into()));
    }
    let cfg = load(&cli.config)?;
    let opts = RunOptions {
        seed: cli.seed,
        threads: cli.threads,
        out: cli.out,
        format: cli.format,
    };
    let written = match cli.command {
        Command::ValidateConfig => {
            print!("{}", cfg.echo());
            return Ok(());
        }
        Command::Walk => run::walk(&cfg, &opts)?,
        Command::Evolve => run::evolve(&cfg, &opts)?,
        Command::Pde => run::pde(&cfg, &opts)?,
        Command::Compare { mode } => run::compare(&cfg, &opts, mode)?,
        Command::Dispersion => run::dispersion(&cfg, &opts)?,
        Command::Convergence => run::convergence(&cfg, &opts)?,
    };
    eprintln!("wrote {}", written.display());
    Ok(())
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
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("entwine: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
