//! `dualprobe`: builds dual-format datasets, traces a tiny model, extracts key
//! neurons and reports scores, gaps, proportions and masking ablations.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{Context, Outcome};
use crate::config::{is_config_error, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "dualprobe", version, about)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "dualprobe.toml")]
    config: PathBuf,
    /// Root seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread cap; overrides `jobs`.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory; overrides `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Assemble the dataset and dual-pair index.
    BuildDataset,
    /// Generate responses and activation traces for every model.
    GenTraces,
    /// Extract per-question key neurons and per-cell unions.
    ExtractNeurons,
    /// Specialized-neuron proportions against the pivot-language rendering.
    Proportions,
    /// Score responses and write quadrant and gap reports.
    Eval,
    /// Masking ablation on the configured models.
    Ablate,
    /// Merge every prior output into one report.
    Report,
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let mut config = RunConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out = match cli.out {
        Some(out) => out,
        None => config.resolve(&config.out),
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            config::config_bail!("--jobs must be at least 1");
        }
        config.jobs = Some(jobs);
    }
    if let Some(jobs) = config.jobs {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let ctx = Context::new(config, out)?;
    match cli.command {
        Command::BuildDataset => commands::dataset::run(&ctx),
        Command::GenTraces => commands::traces::run(&ctx),
        Command::ExtractNeurons => commands::neurons::run(&ctx),
        Command::Proportions => commands::proportions::run(&ctx),
        Command::Eval => commands::eval::run(&ctx),
        Command::Ablate => commands::ablate::run(&ctx),
        Command::Report => commands::report::run(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Complete) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(2),
        Err(err) => {
            let code = if is_config_error(&err) { 1 } else { 3 };
            let kind = if code == 1 { "config error" } else { "error" };
            eprintln!("{kind}: {err:#}");
            ExitCode::from(code)
        }
    }
}
