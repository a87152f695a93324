mod commands;
mod config;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error {0}")]
    Config(String),
    #[error("inconclusive study: {0}")]
    Inconclusive(String),
    #[error(transparent)]
    Run(#[from] sweuler::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Inconclusive(_) | Self::Run(sweuler::Error::Inconclusive(_)) => 3,
            Self::Run(_) | Self::Io { .. } => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sweuler", version, about = "Weak Euler schemes for stable-driven SDEs")]
struct Cli {
    /// Worker threads (all cores when absent); results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw stable increments and tabulate their empirical characteristic function.
    Sample(SampleArgs),
    /// Weak-error ladder and convergence-rate fit.
    RateStudy(StudyArgs),
    /// Fourier oracle for constant-coefficient models.
    Oracle(StudyArgs),
    /// One-step decay of `E f(Y_delta) - f(x)`.
    OneStep(StudyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Law {
    /// Exact isotropic law with characteristic function `exp(-dt |xi|^alpha)`.
    Isotropic,
    /// Truncated compound-Poisson sampler with direction modulation `1 + (s, w)`.
    Truncated,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, value_enum, default_value = "isotropic")]
    pub law: Law,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub dt: f64,
    /// Slope `s` of the modulation `1 + (s, w)` (truncated law only).
    #[arg(long, value_delimiter = ',')]
    pub h_slope: Option<Vec<f64>>,
    #[arg(long, default_value = "samples.csv")]
    pub out: PathBuf,
    /// Empirical CF table; `<out stem>_cf.csv` when absent.
    #[arg(long)]
    pub cf_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// TOML experiment file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in model family (instead of, or overriding, the file's model).
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub n_paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let workers = cli.workers;
    let result = sweuler::euler::with_workers(workers, move || match cli.command {
        Command::Sample(a) => commands::sample(&a),
        Command::RateStudy(a) => commands::rate_study(&a),
        Command::Oracle(a) => commands::oracle(&a),
        Command::OneStep(a) => commands::one_step(&a),
    })
    .map_err(CliError::from)
    .and_then(|r| r);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
