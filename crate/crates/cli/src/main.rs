//! Batch front end: `rspde <command> [--config PATH] [--seed N] [--out DIR] [--mode M] [--key=value ...]`.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::CliError;
use config::{ConfigError, RawConfig, RunConfig, KEYS};

#[derive(Parser)]
#[command(name = "rspde", version, about = "Reflected stochastic heat equations between two walls")]
#[command(after_help = "Any config key may also be given as --key=value; run `rspde keys` for the list.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat key = value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// reflected, clipped or single-wall.
    #[arg(long, global = true)]
    mode: Option<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Check the wall conditions and coefficients.
    Validate,
    /// One path: trajectory CSV, gap series and summary JSON.
    Simulate,
    /// Deterministic obstacle problem for a given input.
    Obstacle,
    /// Hitting probabilities over a list of exponents.
    Hitting,
    /// Kernel checks and the power-integral exponent study.
    GreenCheck,
    /// Picard iteration against direct simulation.
    Picard,
    /// List the config keys with their defaults.
    Keys,
}

const FLAGS: &[&str] = &["config", "seed", "out", "mode"];

/// Splits `--key=value` overrides for config keys from clap arguments.
fn split_overrides(args: Vec<String>) -> (Vec<String>, Vec<(String, String)>) {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    for a in args {
        if let Some((k, v)) = a.strip_prefix("--").and_then(|s| s.split_once('=')) {
            if !FLAGS.contains(&k) {
                overrides.push((k.to_owned(), v.to_owned()));
                continue;
            }
        }
        rest.push(a);
    }
    (rest, overrides)
}

fn build_config(cli: &Cli, overrides: &[(String, String)]) -> Result<RunConfig, ConfigError> {
    let mut raw = match &cli.config {
        Some(p) => RawConfig::load(p)?,
        None => RawConfig::default(),
    };
    for (k, v) in overrides {
        raw.set(k, v)?;
    }
    if let Some(s) = cli.seed {
        raw.set("seed", &s.to_string())?;
    }
    if let Some(o) = &cli.out {
        raw.set("out", &o.to_string_lossy())?;
    }
    if let Some(m) = &cli.mode {
        raw.set("mode", m)?;
    }
    RunConfig::from_raw(&raw)
}

fn main() -> ExitCode {
    let (args, overrides) = split_overrides(std::env::args().collect());
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    if let Command::Keys = cli.command {
        for (k, d, doc) in KEYS {
            println!("{k:<20} {d:<14} {doc}");
        }
        return ExitCode::SUCCESS;
    }
    let cfg = match build_config(&cli, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let outcome = match cli.command {
        Command::Validate => commands::validate(&cfg),
        Command::Simulate => commands::simulate(&cfg),
        Command::Obstacle => commands::obstacle(&cfg),
        Command::Hitting => commands::hitting(&cfg),
        Command::GreenCheck => commands::green_check(&cfg),
        Command::Picard => commands::picard(&cfg),
        Command::Keys => unreachable!(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Failure(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
