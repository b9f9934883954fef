//! `vrslice`: trace analysis, predictor fitting, slicing simulation and
//! Pareto extraction. Every subcommand writes CSV/JSON files into
//! `--out-dir`.
//!
//! Exit codes: 0 success, 2 input error, 3 numerical failure.

mod analyze;
mod fit;
mod io;
mod pareto;
mod simulate;
mod synth;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "vrslice",
    version,
    about = "Frame-size modeling and predictive slicing for VR streams"
)]
struct Cli {
    /// Base seed; overrides the seed of a scenario file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rate distributions, overflow percentiles and autocorrelation of a trace.
    Analyze(analyze::Args),
    /// Fit frame-size predictors over a grid of (N, T, τ).
    Fit(fit::Args),
    /// Run slicing simulations over a (scheme × p_s) sweep.
    Simulate(simulate::Args),
    /// Pareto frontiers and matched bandwidth reductions from a sweep summary.
    Pareto(pareto::Args),
    /// Write a synthetic surrogate trace with its metadata sidecar.
    Synth(synth::Args),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = std::fs::create_dir_all(&cli.out_dir)
        .map_err(vrslice_core::Error::from)
        .and_then(|()| match &cli.command {
            Command::Analyze(a) => analyze::run(a, &cli.out_dir),
            Command::Fit(a) => fit::run(a, &cli.out_dir),
            Command::Simulate(a) => simulate::run(a, cli.seed, &cli.out_dir),
            Command::Pareto(a) => pareto::run(a, &cli.out_dir),
            Command::Synth(a) => synth::run(a, cli.seed, &cli.out_dir),
        });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
