//! Experiment driver for the `noisyvqe` command-line tool.

use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::{de::DeserializeOwned, Serialize};

pub mod commands;
pub mod config;
pub mod output;

use config::{read_config, Validate};
use output::{emit, RunInfo, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(#[from] noisyvqe::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "noisyvqe", version, about = "Noisy VQE density-matrix experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// CSV output path; sibling tables and `<stem>.json` metadata go next to it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Minimal noiseless depth reaching the energy-ratio threshold.
    DepthTable,
    /// Relative energy against noise probability for each noise family.
    NoiseSweep,
    /// Depolarizing probability where noisy VQE meets the mean-field energy.
    Crossover,
    /// Two-qubit runs under calibrated device noise.
    IbmCompare,
    /// Effective global depolarizing strength against depth.
    Accumulation,
    /// Product-state energies.
    Meanfield,
    /// Shot-based gradient descent with readout mitigation.
    SampledVqe,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::DepthTable => "depth-table",
            Command::NoiseSweep => "noise-sweep",
            Command::Crossover => "crossover",
            Command::IbmCompare => "ibm-compare",
            Command::Accumulation => "accumulation",
            Command::Meanfield => "meanfield",
            Command::SampledVqe => "sampled-vqe",
        }
    }
}

trait Seeded {
    fn seed(&self) -> u64;
}

macro_rules! seeded {
    ($($t:ty),*) => {$(impl Seeded for $t { fn seed(&self) -> u64 { self.seed } })*};
}
seeded!(
    config::DepthTableConfig,
    config::NoiseSweepConfig,
    config::CrossoverConfig,
    config::IbmCompareConfig,
    config::AccumulationConfig,
    config::MeanFieldConfig,
    config::SampledVqeConfig
);

fn execute<T, F>(cli: &Cli, run: F) -> Result<Vec<PathBuf>, CliError>
where
    T: DeserializeOwned + Serialize + Validate + Seeded,
    F: FnOnce(&T, u64) -> Result<Vec<Table>, CliError>,
{
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let (cfg, text): (T, String) = read_config(path)?;
    cfg.validate()?;
    let seed = cli.seed.unwrap_or(cfg.seed());
    let info = RunInfo::new(cli.command.name(), &text, seed);
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    let clock = Instant::now();
    let tables = run(&cfg, seed)?;
    let echo = serde_json::to_value(&cfg).map_err(|e| CliError::Io(e.to_string()))?;
    emit(cli.out.as_deref(), &info, echo, &tables, started, clock.elapsed().as_secs_f64())
}

/// Runs one subcommand; returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Config("--workers must be positive".into()));
        }
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    match cli.command {
        Command::DepthTable => execute(cli, commands::depth_table),
        Command::NoiseSweep => execute(cli, commands::noise_sweep_cmd),
        Command::Crossover => execute(cli, commands::crossover),
        Command::IbmCompare => execute(cli, commands::ibm_compare),
        Command::Accumulation => execute(cli, commands::accumulation),
        Command::Meanfield => execute(cli, commands::meanfield),
        Command::SampledVqe => execute(cli, commands::sampled_vqe_cmd),
    }
}
