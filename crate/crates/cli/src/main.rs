//! `shapx`: exact and sampled Shapley values, amortized explainer training and
//! evaluation reports from the command line.

mod args;
mod commands;
mod config;
mod error;
mod output;
mod source;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::error::CliError;

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(workers) = cli.workers {
        if workers == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| CliError::Internal(format!("cannot start {workers} workers: {e}")))?;
    }
    let file = cli.config.as_deref().map(config::load).transpose()?;
    match cli.command {
        Command::Exact(a) => commands::exact(config::resolve(a, file.as_ref(), "exact")?),
        Command::Estimate(a) => commands::estimate(config::resolve(a, file.as_ref(), "estimate")?),
        Command::Train(a) => commands::train(config::resolve(a, file.as_ref(), "train")?),
        Command::Eval(a) => commands::eval(config::resolve(a, file.as_ref(), "eval")?),
        Command::Bench(a) => commands::bench(config::resolve(a, file.as_ref(), "bench")?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("shapx: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
