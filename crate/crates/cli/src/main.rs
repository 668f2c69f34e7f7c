// SPDX-License-Identifier: MIT OR Apache-2.0

//! `reasonlens` experiment runner.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use error::CliError;
use output::Output;

#[derive(Parser, Debug)]
#[command(name = "reasonlens", version, about = "Reasons-based interpretability experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; defaults apply to anything it omits.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long, global = true, env = "REASONLENS_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone)]
enum Command {
    /// Train a model (or a paired reasons/comparison pair) and write checkpoints.
    Train,
    /// Strength tables, layerwise beliefs, PCA coordinates and purity.
    Analyze,
    /// pos2neg and neg2pos activation patching.
    Intervene,
    /// FGSM robustness curve.
    Attack,
    /// Paired fairness training and the Acc/F1/DI/EoO/RD table.
    Fair,
    /// Strength ranking of an external activation dump.
    Ingest {
        /// Dump to read; overrides `ingest.path`.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Analyze => "analyze",
            Command::Intervene => "intervene",
            Command::Attack => "attack",
            Command::Fair => "fair",
            Command::Ingest { .. } => "ingest",
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if let Command::Ingest { dump: Some(p) } = &cli.command {
        cfg.ingest.path = Some(p.clone());
    }
    cfg.experiment = Some(cli.command.name().to_string());
    cfg.validate()?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("threads: {e}")))?;
    }
    let mut out = Output::new(&cfg.out, cfg.hash(), cfg.seed, cli.command.name())?;
    match cli.command {
        Command::Train => commands::train(&cfg, &mut out)?,
        Command::Analyze => commands::analyze(&cfg, &mut out)?,
        Command::Intervene => commands::intervene(&cfg, &mut out)?,
        Command::Attack => commands::attack(&cfg, &mut out)?,
        Command::Fair => commands::fair(&cfg, &mut out)?,
        Command::Ingest { .. } => commands::ingest(&cfg, &mut out)?,
    }
    out.finish(&cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("reasonlens: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
