use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use rvl_core::{Combination, ExperimentConfig, Pipeline, RunDir, RvlError, Variant};

/// Reinforcement virtual learning experiments on the fed-batch reactor.
#[derive(Debug, Parser)]
#[command(name = "rvl", version)]
struct Cli {
    /// Experiment config (TOML). Defaults to the run directory's stored
    /// config, then to the built-in default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Run directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Policy to train, combine or evaluate.
    #[arg(long, global = true)]
    variant: Option<String>,

    /// Total surrogate training epochs for both predictors.
    #[arg(long, global = true)]
    epochs: Option<usize>,

    /// Number of dataset episodes.
    #[arg(long, global = true)]
    n: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate excitation batches into data/dataset.jsonl.
    GenData,
    /// Fit the C and D predictors, resuming any stored checkpoint.
    TrainSurrogate,
    /// Train one learner, or every learner when --variant is absent.
    Train,
    /// Elementwise maximum of two policies.
    Combine {
        /// Two stored policy names; alternative to --variant.
        policies: Vec<String>,
        /// Output policy name for positional combinations.
        #[arg(long)]
        name: Option<String>,
    },
    /// Greedy control batch with a stored policy.
    Evaluate,
    /// Tables and plot series under report/.
    Report,
    /// Whole pipeline at reduced size.
    Smoke,
}

const DEFAULT_OUT: &str = "run";

fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let stored = RunDir::new(&out).config();
    let mut cfg = match (&cli.config, stored.exists()) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, true) if !matches!(cli.command, Command::Smoke) => ExperimentConfig::load(&stored)?,
        (None, _) => ExperimentConfig::default_config(),
    };
    if matches!(cli.command, Command::Smoke) {
        cfg = cfg.smoke();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = cli.n {
        if cfg.dataset.train_n >= n {
            cfg.dataset.train_n = (n * 3 / 4).max(1);
        }
        cfg.dataset.n = n;
    }
    if let Some(epochs) = cli.epochs {
        cfg.surrogate.c.epochs = epochs;
        cfg.surrogate.d.epochs = epochs;
    }
    cfg.out = Some(cli.out.clone().or(cfg.out).unwrap_or_else(|| out.clone()));
    cfg.validate()?;
    Ok(cfg)
}

fn open(cli: &Cli) -> Result<Pipeline> {
    let cfg = resolve_config(cli)?;
    let root = cfg.out.clone().expect("resolved above");
    Ok(Pipeline::open(cfg, RunDir::new(root))?)
}

fn parse_variant(text: &str) -> Result<Variant> {
    Ok(text.parse::<Variant>()?)
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn run(cli: &Cli) -> Result<()> {
    if let Command::Report = cli.command {
        // Read-only: the run directory supplies its own config and manifest.
        let root = cli.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        let bundle = rvl_core::report::write_report(&root)?;
        for f in &bundle.files {
            println!("{}", display(f));
        }
        return Ok(());
    }
    // Usage errors surface before the run directory is touched.
    let variant = match (&cli.command, &cli.variant) {
        (Command::Train, Some(v)) => Some(parse_variant(v)?),
        _ => None,
    };
    let combination = match (&cli.command, &cli.variant) {
        (Command::Combine { .. }, Some(v)) => Some(v.parse::<Combination>()?),
        _ => None,
    };
    let p = open(cli)?;
    let started = Instant::now();
    match &cli.command {
        Command::GenData => {
            let ds = p.gen_data()?;
            eprintln!("wrote {} episodes to {}", ds.episodes.len(), display(&p.run.dataset()));
        }
        Command::TrainSurrogate => {
            let ck = p.train_surrogate()?;
            eprintln!(
                "surrogate at {} (C {} epochs, D {} epochs)",
                display(&p.run.surrogate()),
                ck.model_c.trainer.epochs_done,
                ck.model_d.trainer.epochs_done
            );
        }
        Command::Train => {
            let variants = match variant {
                Some(v) => vec![v],
                None => Variant::all(&p.cfg),
            };
            for ck in p.train_variants(&variants)? {
                eprintln!("trained {}", display(&p.run.policy(&ck.name)));
            }
        }
        Command::Combine { policies, name } => {
            let written = match (combination, policies.as_slice()) {
                (Some(c), []) => vec![p.combine_named(c)?],
                (None, [a, b]) => {
                    let out = name.clone().unwrap_or_else(|| format!("{a}+{b}"));
                    vec![p.combine(&out, a, b)?]
                }
                (None, []) => Combination::ALL
                    .into_iter()
                    .map(|c| p.combine_named(c))
                    .collect::<rvl_core::Result<_>>()?,
                _ => {
                    return Err(RvlError::Config(
                        "combine takes either --variant or two policy names".into(),
                    )
                    .into())
                }
            };
            for ck in written {
                eprintln!("combined {}", display(&p.run.policy(&ck.name)));
            }
        }
        Command::Evaluate => {
            let names = match &cli.variant {
                Some(v) => vec![v.clone()],
                None => p
                    .policy_names()
                    .into_iter()
                    .filter(|n| p.run.policy(n).exists())
                    .collect(),
            };
            if names.is_empty() {
                bail!("no policies under {}", display(&p.run.root));
            }
            for name in names {
                let r = p.evaluate(&name)?;
                println!(
                    "{name}: C {:.4} D {:.4} V {:.4} objective {:.4} benefits {}",
                    r.c, r.d, r.v, r.objective, r.total_benefits
                );
            }
        }
        Command::Report => unreachable!("handled above"),
        Command::Smoke => {
            let bundle = p.run_all()?;
            eprintln!(
                "smoke run complete in {:.1}s, {} report files in {}",
                started.elapsed().as_secs_f64(),
                bundle.files.len(),
                display(&bundle.dir)
            );
        }
    }
    Ok(())
}

fn init_threads() -> Result<()> {
    let Ok(text) = std::env::var("RVL_THREADS") else {
        return Ok(());
    };
    let n: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| RvlError::Config(format!("RVL_THREADS must be a positive integer, got {text:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| anyhow!(e))
        .context("configuring worker threads")
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<RvlError>() {
        Some(e) if e.is_config_error() || matches!(e, RvlError::Provenance(_)) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match init_threads().and_then(|()| run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
