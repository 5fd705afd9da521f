//! `csprobe`: runs code-switching probing experiments from a config file.

mod commands;
mod config;
mod run;
mod svg;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use crate::config::LoadedConfig;
use crate::run::Run;

/// A missing, unreadable or malformed input or config. Exit code 2.
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

#[derive(Parser, Debug)]
#[command(name = "csprobe", version, about = "Probing experiments on code-switched text")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Single seed; overrides `seeds` in the config.
    #[arg(long, global = true, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Comma-separated seeds; overrides `seeds` in the config.
    #[arg(long, global = true, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Token-language statistics of labelled corpora.
    Stats,
    /// Synthetic code-switched corpora (random and noun-phrase replacement).
    Generate,
    /// Train one linear probe on one embedding container.
    TrainProbe,
    /// Layer-by-layer probe sweep with CSV, JSON summary and SVG chart.
    Sweep,
    /// Train a structural distance probe on treebanks.
    TrainStructural,
    /// Induce parses from word embeddings with a trained structural probe.
    Parse,
    /// Tree edit distance between parses and its correlation across languages.
    Ged,
    /// train-structural, parse and ged in one run.
    Syntax,
    /// Cosine-similarity consistency report.
    Semantics,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Stats => "stats",
            Command::Generate => "generate",
            Command::TrainProbe => "train-probe",
            Command::Sweep => "sweep",
            Command::TrainStructural => "train-structural",
            Command::Parse => "parse",
            Command::Ged => "ged",
            Command::Syntax => "syntax",
            Command::Semantics => "semantics",
        }
    }
}

fn execute(cli: Cli) -> Result<PathBuf> {
    let path = cli
        .config
        .clone()
        .ok_or_else(|| InputError("--config is required".into()))?;
    let LoadedConfig {
        mut config,
        raw,
        base_dir,
    } = config::load(&path)?;

    let mut overrides = String::new();
    if let Some(seed) = cli.seed {
        config.seeds = vec![seed];
    }
    if let Some(seeds) = &cli.seeds {
        if seeds.is_empty() {
            return Err(InputError("--seeds must not be empty".into()).into());
        }
        config.seeds = seeds.clone();
    }
    if cli.seed.is_some() || cli.seeds.is_some() {
        overrides = format!("seeds={:?}", config.seeds);
    }
    if let Some(jobs) = cli.jobs.or(config.jobs) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| InputError(format!("cannot start {jobs} worker threads: {e}")))?;
    }
    let out_dir = match (&cli.out, &config.out) {
        (Some(out), _) => out.clone(),
        (None, Some(out)) if out.is_absolute() => out.clone(),
        (None, Some(out)) => base_dir.join(out),
        (None, None) => PathBuf::from("out"),
    };
    let loaded = LoadedConfig { config, raw, base_dir };
    let mut run = Run::new(cli.command.name(), &loaded, out_dir, &overrides)?;
    let cfg = &loaded.config;
    match cli.command {
        Command::Stats => commands::stats(cfg, &mut run)?,
        Command::Generate => commands::generate(cfg, &mut run)?,
        Command::TrainProbe => commands::train_probe(cfg, &mut run)?,
        Command::Sweep => commands::sweep(cfg, &mut run)?,
        Command::TrainStructural => {
            commands::train_structural(cfg, &mut run)?;
        }
        Command::Parse => commands::parse(cfg, &mut run)?,
        Command::Ged => commands::ged(cfg, &mut run)?,
        Command::Syntax => commands::syntax(cfg, &mut run)?,
        Command::Semantics => commands::semantics(cfg, &mut run)?,
    }
    run.finish()
}

/// 2 for input and configuration failures, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<InputError>() || cause.is::<std::io::Error>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<csprobe::Error>() {
            return if e.is_input_error() { 2 } else { 1 };
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(manifest) => {
            log::info!("wrote {}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
