//! Command-line front end for the experiment runners.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sbltomo::experiment::{self, ExperimentConfig, ExperimentKind, RawConfig};

#[derive(Debug, Parser)]
#[command(
    name = "sbltomo",
    version,
    about = "SAR tomography by sparse Bayesian learning"
)]
struct Cli {
    /// Flat `key = value` configuration file; flags below override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Base seed of the per-sample random streams.
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,

    /// Number of worker threads.
    #[arg(long, global = true, value_name = "INT")]
    workers: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Angular bias of SBL, PCA and KPCA steering-vector estimates.
    AngularBias,
    /// Detection rate of two close scatterers versus their separation.
    Superres,
    /// Per-iteration trace of the learned prior on a noise-free scene.
    TracePrior,
    /// Invert every pixel of a measurement file.
    Invert {
        /// CSV with header `pixel_id, re_1, im_1, …, re_N, im_N`.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
    },
}

fn config(cli: &Cli) -> Result<ExperimentConfig, sbltomo::Error> {
    let (kind, input) = match &cli.command {
        Command::AngularBias => (ExperimentKind::AngularBias, None),
        Command::Superres => (ExperimentKind::Superres, None),
        Command::TracePrior => (ExperimentKind::TracePrior, None),
        Command::Invert { input } => (ExperimentKind::Invert, input.clone()),
    };
    let mut raw = match &cli.config {
        Some(path) => RawConfig::load(path)?,
        None => RawConfig::default(),
    };
    raw.push("command line", "experiment", kind.name());
    if let Some(seed) = cli.seed {
        raw.push("--seed", "seed", seed.to_string());
    }
    if let Some(workers) = cli.workers {
        raw.push("--workers", "workers", workers.to_string());
    }
    if let Some(out) = &cli.out {
        raw.push("--out", "out", out.display().to_string());
    }
    if let Some(input) = input {
        raw.push("--input", "input", input.display().to_string());
    }
    Ok(ExperimentConfig::from_raw(&raw, kind)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = config(&cli).and_then(|cfg| {
        let bundle = experiment::run(&cfg)?;
        print!("{}", bundle.summary);
        println!("results written to {}", cfg.out.display());
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
