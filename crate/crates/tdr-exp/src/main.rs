//! Experiment driver for time-delay reservoir memory-capacity studies:
//! model-vs-simulation error surfaces, robustness distributions under random
//! parameters and random tasks, capacity-driven parameter search, and
//! single-point evaluation. All results are CSV, deterministic per seed.

mod commands;
mod config;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::RunOptions;
use config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "tdr-exp",
    version,
    about = "Time-delay reservoir capacity experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic and Monte Carlo error surfaces over a (d, eta) grid
    Surface(RunArgs),
    /// Error distributions under random reservoir parameters and masks
    RobustParams(RunArgs),
    /// Error distributions of frozen reservoirs under random quadratic tasks
    RobustTask(RunArgs),
    /// Grid search over (d, eta, gamma, mask seed) maximizing capacity
    Optimize(RunArgs),
    /// Single-point capacity evaluation
    Capacity(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Master seed (overrides the config's seed; default 0)
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for grid points and draws
    #[arg(long)]
    workers: Option<usize>,
    /// Force Monte Carlo columns on
    #[arg(long, overrides_with = "no_mc")]
    mc: bool,
    /// Skip Monte Carlo columns
    #[arg(long = "no-mc")]
    no_mc: bool,
}

impl RunArgs {
    fn options(&self, config: &ExperimentConfig) -> RunOptions {
        RunOptions {
            seed: self.seed.or(config.seed).unwrap_or(0),
            out: self.out.clone(),
            workers: self.workers,
            mc: if self.no_mc {
                Some(false)
            } else if self.mc {
                Some(true)
            } else {
                None
            },
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args = match &cli.command {
        Command::Surface(a)
        | Command::RobustParams(a)
        | Command::RobustTask(a)
        | Command::Optimize(a)
        | Command::Capacity(a) => a,
    };

    let config = match ExperimentConfig::load(&args.config) {
        Ok(config) => config,
        Err(message) => {
            eprintln!("tdr-exp: {message}");
            return ExitCode::from(2);
        }
    };
    let opts = args.options(&config);

    let outcome = match &cli.command {
        Command::Surface(_) => commands::surface::run(&config, &opts),
        Command::RobustParams(_) => commands::robust::run_params(&config, &opts),
        Command::RobustTask(_) => commands::robust::run_task(&config, &opts),
        Command::Optimize(_) => commands::optimize::run(&config, &opts),
        Command::Capacity(_) => commands::capacity::run(&config, &opts),
    };

    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("tdr-exp: {}", failure.message());
            ExitCode::from(failure.exit_code() as u8)
        }
    }
}
