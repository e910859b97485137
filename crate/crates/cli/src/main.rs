mod args;
mod commands;
mod manifest;
mod model_file;

use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use args::{Cli, Command};

/// Caps the worker pool when `LCROLL_THREADS` is set.
fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("LCROLL_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .with_context(|| format!("LCROLL_THREADS must be a positive integer, got '{v}'"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Train(a) => commands::train_cmd(a),
        Command::Rollout(a) => commands::rollout_cmd(a),
        Command::Evaluate(a) => commands::evaluate_cmd(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
