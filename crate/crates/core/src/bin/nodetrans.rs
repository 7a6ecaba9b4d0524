use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, ValueEnum};
use nodetrans::harness::{run, ExperimentConfig, Mode};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Pretrain,
    Finetune,
    Scratch,
    Evaluate,
    Synth,
    Gradcheck,
    ClusterReport,
}

impl From<Cmd> for Mode {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Pretrain => Mode::Pretrain,
            Cmd::Finetune => Mode::Finetune,
            Cmd::Scratch => Mode::Scratch,
            Cmd::Evaluate => Mode::Evaluate,
            Cmd::Synth => Mode::Synth,
            Cmd::Gradcheck => Mode::Gradcheck,
            Cmd::ClusterReport => Mode::ClusterReport,
        }
    }
}

/// Node-embedding transfer for traffic forecasting on data-scarce road
/// networks.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    mode: Cmd,
    /// JSON experiment config; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replaces the config's seed list.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Regularizer weight; repeat for a fine-tuning sweep.
    #[arg(long)]
    alpha: Vec<f64>,
    #[arg(long, value_parser = ["1", "3", "7"])]
    train_days: Option<String>,
    /// `dotted.key=value`, value parsed as JSON when possible.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn build_config(args: &Args) -> anyhow::Result<ExperimentConfig> {
    let overrides = args
        .overrides
        .iter()
        .map(|o| {
            o.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.to_string()))
                .with_context(|| format!("override {o:?} is not key=value"))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let text = match &args.config {
        Some(p) => {
            std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?
        }
        None => "{}".into(),
    };
    let mut cfg = ExperimentConfig::from_json_str(&text, &overrides)?;
    cfg.mode = args.mode.into();
    if let Some(seed) = args.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    match args.alpha.as_slice() {
        [] => {}
        [a] => {
            cfg.model.alpha = *a;
            cfg.alphas = None;
        }
        many => cfg.alphas = Some(many.to_vec()),
    }
    if let Some(days) = &args.train_days {
        cfg.split.train_days = days.parse()?;
    }
    if !cfg.model.alpha.is_finite() || cfg.model.alpha < 0.0 {
        bail!("alpha must be a finite value >= 0");
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let result = build_config(&args).and_then(|cfg| Ok(run(&cfg)?));
    match result {
        Ok(outcome) => {
            if let Some(err) = outcome.max_rel_error {
                println!("max relative gradient error {err:.3e}");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
