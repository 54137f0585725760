use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tvss_core::{Accumulation, LipschitzMode, ResidualMode};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "tvss", version, about = "Semi-supervised learning of graph signals by total-variation minimization")]
struct Cli {
    /// Worker threads for Monte-Carlo runs.
    #[arg(long, env = "TVSS_THREADS", global = true, hide_env_values = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a two-cluster graph, its ground truth and a sampling set.
    Generate(GenerateArgs),
    /// Run one method on one instance.
    Solve(SolveArgs),
    /// Monte-Carlo comparison of the solver against label propagation.
    Compare(CompareArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Tuning {
    #[arg(long)]
    pub iters: Option<usize>,
    /// Error level. Defaults to 1e-5 times the norm of the ground truth when
    /// one is available.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub mu0: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub partitions: Option<usize>,
    #[arg(long = "consensus-k")]
    pub consensus_k: Option<usize>,
    #[arg(long = "lipschitz-mode")]
    pub lipschitz_mode: Option<LipschitzMode>,
    #[arg(long = "residual-mode")]
    pub residual_mode: Option<ResidualMode>,
    #[arg(long)]
    pub accumulation: Option<Accumulation>,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Fixed smoothing parameter.
    Nesterov,
    /// Geometrically decreasing smoothing parameter.
    Accel,
    /// Label propagation.
    Lp,
    /// Message-passing simulation.
    Sim,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub tuning: Tuning,
    #[arg(long, value_enum, default_value_t = Method::Accel)]
    pub method: Method,
    /// Edge list; without it an instance is generated from the config.
    #[arg(long, requires = "labels")]
    pub graph: Option<PathBuf>,
    #[arg(long, requires = "graph")]
    pub labels: Option<PathBuf>,
    /// Ground truth used for NMSE columns.
    #[arg(long, requires = "graph")]
    pub truth: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub tuning: Tuning,
    #[arg(long)]
    pub runs: Option<usize>,
    /// Also run the message-passing simulator.
    #[arg(long)]
    pub sim: bool,
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Generate(args) => commands::generate(&args).map(|_| true),
        Command::Solve(args) => commands::solve(&args).map(|_| true),
        Command::Compare(args) => commands::compare(&args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
