//! Command-line experiment runner for random walks in random scenery.

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit status for a run whose verdicts failed.
pub const EXIT_TEST_FAILURE: i32 = 1;
/// Exit status for usage and configuration errors.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] rwrs_core::Error),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "rwrs", version, about = "Random walks in random scenery: exceedance experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the escape probability q two ways and compare.
    EstimateQ(EstimateQArgs),
    /// Run a replicated experiment and the Poisson-limit verdicts.
    Poisson(RunArgs),
    /// Compute the D', D^(k), O'Brien, extremal-index and ε diagnostics.
    Diagnostics(RunArgs),
    /// Dump one walk path, and optionally exceedance patterns.
    SimulateWalk(WalkArgs),
    /// Print the tool version.
    Version,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LawKind {
    Zipf,
    Unit,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Master seed (overrides the config).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateQArgs {
    #[arg(long, value_enum, default_value_t = LawKind::Zipf)]
    pub law: LawKind,
    /// Stable index α ∈ (0,1); required for zipf.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Horizon of the return-based estimator.
    #[arg(long, default_value_t = 10_000)]
    pub horizon: u64,
    #[arg(long, default_value_t = 100_000)]
    pub reps: u64,
    /// Horizon of the range-slope estimator; defaults to 10 × horizon.
    #[arg(long)]
    pub range_n: Option<u64>,
    #[arg(long, default_value_t = 500)]
    pub range_reps: u64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Replications (overrides the config).
    #[arg(long)]
    pub reps: Option<u64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct WalkArgs {
    #[arg(long, value_enum, default_value_t = LawKind::Zipf)]
    pub law: LawKind,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 1_000)]
    pub n: u64,
    /// Also write exceedance patterns for this config's law and scenery.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Pattern replications written with --config.
    #[arg(long, default_value_t = 1)]
    pub reps: u64,
    #[command(flatten)]
    pub common: Common,
}

/// Runs a parsed command line and returns the process exit status.
pub fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Version => {
            println!("rwrs {}", env!("CARGO_PKG_VERSION"));
            Ok(0)
        }
        Command::EstimateQ(a) => with_threads(a.common.threads, || commands::estimate_q(&a)),
        Command::Poisson(a) => with_threads(a.common.threads, || commands::poisson(&a)),
        Command::Diagnostics(a) => with_threads(a.common.threads, || commands::diagnostics(&a)),
        Command::SimulateWalk(a) => with_threads(a.common.threads, || commands::simulate_walk(&a)),
    }
}

#[cfg(feature = "parallel")]
fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_threads<T: Send>(_threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    f()
}
