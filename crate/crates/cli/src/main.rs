mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::{ExperimentConfig, Overrides};

/// Multi-fidelity Bayesian inversion experiments.
#[derive(Parser)]
#[command(name = "mfbayes", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Stage {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Sample designs and evaluate both fidelities.
    Generate(Stage),
    /// Train the surrogates (and flows) of each method.
    Fit(Stage),
    /// Evaluate posteriors and comparison metrics.
    Posterior(Stage),
    /// Aggregate run manifests into a table on stdout.
    Report {
        /// Manifest files or directories to search.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Also write the table to this file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    let stage = |s: &Stage| ExperimentConfig::load(s.config.as_deref(), &s.overrides);
    let written = match &cli.command {
        Command::Generate(s) => commands::generate(&stage(s)?)?,
        Command::Fit(s) => commands::fit(&stage(s)?)?,
        Command::Posterior(s) => commands::posterior(&stage(s)?)?,
        Command::Report { paths, output } => {
            let table = commands::report(paths)?;
            print!("{table}");
            if let Some(o) = output {
                std::fs::write(o, &table)?;
            }
            return Ok(());
        }
    };
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<mfbayes::Error>()) {
        Some(mfbayes::Error::Config(_) | mfbayes::Error::Parse(_)) => 2,
        Some(e) if e.is_numerical() => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
