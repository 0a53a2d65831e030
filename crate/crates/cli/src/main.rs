use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use stgrn::datakit::{load_annotations, stats_report};
use stgrn::decode::DecodeMode;
use stgrn::lang::QueryMode;
use stgrn::runner::{decode_cmd, eval_cmd, generate_cmd, train_cmd, RunConfig, Split};

#[derive(Parser)]
#[command(name = "stgrn", version, about = "Spatio-temporal grounding of sentences in video")]
struct Cli {
    #[command(flatten)]
    global: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Args)]
struct Overrides {
    /// Flat TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Feature manifest (resolved against $STGRN_FEATURE_ROOT when relative and missing).
    #[arg(long, global = true)]
    features: Option<PathBuf>,
    /// Feature manifest of the validation split.
    #[arg(long, global = true)]
    val_features: Option<PathBuf>,
    /// greedy or dynamic.
    #[arg(long, global = true)]
    decode: Option<DecodeMode>,
    #[arg(long, global = true)]
    disable_implicit: bool,
    #[arg(long, global = true)]
    disable_explicit: bool,
    #[arg(long, global = true)]
    disable_temporal: bool,
    #[arg(long, global = true)]
    layers: Option<usize>,
    /// entity_attention or last_hidden.
    #[arg(long, global = true)]
    query_mode: Option<QueryMode>,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic train/val annotations and feature stores.
    Generate {
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and write checkpoint, metrics log and effective config.
    Train {
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long)]
        val_annotations: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Evaluate a checkpoint and print the report as JSON.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "val")]
        split: Split,
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long)]
        val_annotations: Option<PathBuf>,
    },
    /// Write one predicted tube per sample as JSON lines.
    Decode {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "val")]
        split: Split,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long)]
        val_annotations: Option<PathBuf>,
    },
    /// Per-split sentence and video counts of annotation files.
    Stats {
        /// `name=path` pairs, e.g. `train=train.json`.
        #[arg(required = true)]
        splits: Vec<String>,
    },
}

fn base_config(o: &Overrides) -> Result<RunConfig> {
    let mut cfg = match &o.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(f) = &o.features {
        cfg.features = Some(f.clone());
    }
    if let Some(f) = &o.val_features {
        cfg.val_features = Some(f.clone());
    }
    if let Some(d) = o.decode {
        cfg.decode = d;
    }
    cfg.disable_implicit |= o.disable_implicit;
    cfg.disable_explicit |= o.disable_explicit;
    cfg.disable_temporal |= o.disable_temporal;
    if let Some(l) = o.layers {
        cfg.layers = l;
    }
    if let Some(q) = o.query_mode {
        cfg.query_mode = q;
    }
    Ok(cfg)
}

fn set_paths(cfg: &mut RunConfig, annotations: Option<PathBuf>, val: Option<PathBuf>) {
    if annotations.is_some() {
        cfg.annotations = annotations;
    }
    if val.is_some() {
        cfg.val_annotations = val;
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let mut cfg = base_config(&cli.global)?;
    match cli.command {
        Command::Generate { out } => {
            let files = generate_cmd(&cfg, &out)?;
            log::info!("annotations: {}", files.annotations.display());
            log::info!("features: {}", files.manifest.display());
            log::info!("val annotations: {}", files.val_annotations.display());
            log::info!("val features: {}", files.val_manifest.display());
        }
        Command::Train {
            annotations,
            val_annotations,
            epochs,
            output_dir,
        } => {
            set_paths(&mut cfg, annotations, val_annotations);
            if let Some(e) = epochs {
                cfg.epochs = e;
            }
            if let Some(d) = output_dir {
                cfg.output_dir = d;
            }
            let (_, artifacts) = train_cmd(&cfg)?;
            log::info!("checkpoint: {}", artifacts.checkpoint.display());
            log::info!("metrics: {}", artifacts.metrics.display());
        }
        Command::Eval {
            checkpoint,
            split,
            annotations,
            val_annotations,
        } => {
            set_paths(&mut cfg, annotations, val_annotations);
            let report = eval_cmd(&cfg, &checkpoint, split)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Decode {
            checkpoint,
            split,
            out,
            annotations,
            val_annotations,
        } => {
            set_paths(&mut cfg, annotations, val_annotations);
            let lines = decode_cmd(&cfg, &checkpoint, split, &out)?;
            log::info!("{} predictions written to {}", lines.len(), out.display());
        }
        Command::Stats { splits } => {
            let mut loaded = Vec::with_capacity(splits.len());
            for pair in &splits {
                let (name, path) = pair
                    .split_once('=')
                    .with_context(|| format!("expected name=path, got {pair:?}"))?;
                loaded.push((name.to_string(), load_annotations(path)?));
            }
            let report = stats_report(loaded.iter().map(|(n, r)| (n.as_str(), r.as_slice())));
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}
