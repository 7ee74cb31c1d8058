//! `markovest`: stability regions, analytic and simulated MSE, and bound
//! checks for remote estimation over Markov fading channels.
//!
//! Exit codes: 0 success (stable, agreement, all checks pass), 2 a negative
//! verdict, 1 input or runtime error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "markovest", version, about)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
pub struct Global {
    /// Config file, or the name of a bundled fixture.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Comma-separated seeds; replaces `simulation.seeds`.
    #[arg(long, global = true, value_delimiter = ',')]
    seed: Option<Vec<u64>>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Relative tolerance of the MSE series; replaces `tolerances.series`.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Subcommand)]
enum Command {
    /// Stability verdicts, margins and the analytic MSE.
    Stability,
    /// Stability region over a grid of dropout probabilities.
    Region,
    /// Analytic and/or simulated average MSE.
    Mse(commands::MseArgs),
    /// Matrix-power envelope checks.
    Bounds,
    /// Per-state dropout probabilities from SNRs.
    ChannelFromSnr(commands::SnrArgs),
    /// Prints the parsed config with all defaults filled in.
    Config,
    /// Lists the bundled fixtures.
    Fixtures,
}

fn init_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("ME_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("ME_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<commands::Outcome, String> {
    init_threads()?;
    let g = &cli.global;
    match &cli.command {
        Command::ChannelFromSnr(args) => return commands::channel_from_snr(g, args),
        Command::Fixtures => return Ok(commands::fixtures()),
        _ => {}
    }
    let mut config = config::load(g.config.as_deref())?;
    if let Some(seeds) = &g.seed {
        config.simulation.seeds = seeds.clone();
    }
    if let Some(tol) = g.tol {
        if !(tol > 0.0) {
            return Err(format!("--tol must be positive, got {tol}"));
        }
        config.tolerances.series = tol;
    }
    match &cli.command {
        Command::Stability => commands::stability(g, &config),
        Command::Region => commands::region(g, &config),
        Command::Mse(args) => commands::mse(g, &config, args),
        Command::Bounds => commands::bounds(g, &config),
        Command::Config => commands::echo(&config),
        Command::ChannelFromSnr(_) | Command::Fixtures => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.global.out.clone();
    let outcome = match run(cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let written = match &out {
        Some(path) => {
            std::fs::write(path, &outcome.body).map_err(|e| format!("{}: {e}", path.display()))
        }
        None => {
            print!("{}", outcome.body);
            Ok(())
        }
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    if let Some(extra) = &outcome.note {
        eprintln!("{extra}");
    }
    ExitCode::from(outcome.code)
}
