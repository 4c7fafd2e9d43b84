//! `dgsp`: world generation, training, evaluation, sweeps and audits for Deep GSP auctions.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "dgsp", version, about = "Deep GSP auction lab")]
pub struct Cli {
    /// TOML file with optional [world], [train], [evaluate], [audit], [pareto] and [transition] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the world seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for sweeps and evaluation (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Directory of cached trained models (default: <out>/cache).
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Reproduce the three-ad worked example and compare with the printed values.
    Table1,
    /// Draw the synthetic market and write its description.
    GenWorld,
    /// Train one model with the [train] section.
    Train,
    /// Score GSP over the sigma grid, the toy score and any given checkpoints.
    Evaluate {
        /// Actor checkpoint, optionally `label=path`. Repeatable.
        #[arg(long = "model")]
        models: Vec<String>,
    },
    /// Trade-off curves of trained models against GSP and uGSP.
    Pareto,
    /// Utility/objective trade-off across the smooth-transition tolerance.
    Transition,
    /// Monotonicity, payment-error and incentive audits.
    Audit {
        /// Actor checkpoint, optionally `label=path`. Repeatable. Without any,
        /// the [audit].configs objectives are trained (or loaded from cache).
        #[arg(long = "model")]
        models: Vec<String>,
    },
}

#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Runtime(anyhow::Error),
    Golden(Vec<String>),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<dgsp_core::Error>() {
            Some(dgsp_core::Error::Config(msg)) => Failure::Validation(msg.clone()),
            _ => Failure::Runtime(e),
        }
    }
}

impl From<dgsp_core::Error> for Failure {
    fn from(e: dgsp_core::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be positive");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("configuration error:\n{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Golden(bad)) => {
            for b in bad {
                eprintln!("mismatch: {b}");
            }
            ExitCode::from(3)
        }
    }
}
