//! Experiment driver: builds propagator tables, simulates observation paths,
//! runs the chaos filter and compares it with reference filters.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use commands::MetadataMismatch;
use config::{ConfigError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "zakai-chaos", version, about = "Wiener-chaos filtering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble the Galerkin system and write the propagator table.
    Precompute {
        #[arg(long)]
        config: PathBuf,
        /// Table file; a `.bin` extension selects the binary form.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate `run.paths` signal/observation paths.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Run the filter on one observation file.
    Filter {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        obs: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Filter one observation file and compare the estimate with the oracle.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Precomputed table; built from the config when omitted.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        obs: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Error against the oracle for every value of `run.sweep_values`.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed_override: Option<u64>,
    },
}

fn load(path: &PathBuf, seed_override: Option<u64>) -> Result<ExperimentConfig, ConfigError> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = seed_override {
        config.run.seed = seed;
    }
    Ok(config)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Precompute { config, out } => commands::precompute(&load(&config, None)?, out),
        Command::Simulate { config, out, seed_override } => {
            commands::simulate_paths(&load(&config, None)?, out, seed_override)
        }
        Command::Filter { config, table, obs, out } => commands::filter(&load(&config, None)?, &table, &obs, out),
        Command::Compare { config, table, obs, out } => {
            commands::compare(&load(&config, None)?, table.as_deref(), &obs, out)
        }
        Command::Sweep { config, out, seed_override } => commands::sweep(&load(&config, seed_override)?, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let invalid = err.chain().any(|e| e.is::<ConfigError>() || e.is::<MetadataMismatch>());
            ExitCode::from(if invalid { 2 } else { 1 })
        }
    }
}
