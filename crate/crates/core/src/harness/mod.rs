//! Config-driven experiment runs with deterministic on-disk artifacts.

mod cluster_report;
mod config;
mod manifest;

use std::path::{Path, PathBuf};

use log::info;

pub use cluster_report::{cluster_report, ClusterReport};
pub use config::{
    apply_override, DatasetRef, ExperimentConfig, GradcheckConfig, Mode, SplitConfig,
};
pub use manifest::{ManifestEntry, RunManifest, MANIFEST_NAME};

use crate::data::{
    generate_synthetic, split_source, split_target, write_dataset, RoadNetworkDataset, SplitRanges,
};
use crate::error::{Error, Result};
use crate::eval::{
    evaluate_checkpoint, historical_average_baseline, write_series_csv, write_text, MetricsReport,
};
use crate::rng::SeedStream;
use crate::training::{gradcheck_random, pretrain, train_from_scratch, Checkpoint, TrainReport};
use crate::transfer::finetune;

/// What a run produced, besides its files.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    /// `false` only for a gradcheck whose error exceeded the tolerance.
    pub passed: bool,
    /// Largest relative gradient error, for gradcheck runs.
    pub max_rel_error: Option<f64>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

struct Loaded {
    dataset: RoadNetworkDataset,
    labels: Option<Vec<usize>>,
}

fn load(dref: &DatasetRef, run_seed: u64, role: &str) -> Result<Loaded> {
    if let DatasetRef::Dir { dir } = dref {
        return Ok(Loaded {
            dataset: DatasetRef::load_dir(dir)?,
            labels: read_labels(dir)?,
        });
    }
    let (spec, seed) = dref.synthetic_spec()?.expect("not a directory");
    let seed = seed.unwrap_or_else(|| SeedStream::new(run_seed).child("synth").child(role).seed());
    let synth = generate_synthetic(&spec, seed)?;
    Ok(Loaded {
        dataset: synth.dataset,
        labels: Some(synth.labels),
    })
}

const LABELS_FILE: &str = "labels.csv";

fn read_labels(dir: &Path) -> Result<Option<Vec<usize>>> {
    let path = dir.join(LABELS_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let mut r = csv::Reader::from_path(&path).map_err(|e| Error::csv(&path, e))?;
    let mut labels = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(&path, e))?;
        let label = rec
            .get(1)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Parse {
                path: path.clone(),
                row: row + 2,
                column: "label".into(),
                message: "expected a non-negative integer".into(),
            })?;
        labels.push(label);
    }
    Ok(Some(labels))
}

fn write_labels(labels: &[usize], dir: &Path) -> Result<()> {
    let mut text = String::from("node,label\n");
    for (i, l) in labels.iter().enumerate() {
        text.push_str(&format!("{i},{l}\n"));
    }
    write_text(&dir.join(LABELS_FILE), &text)
}

fn source_splits(cfg: &ExperimentConfig, ds: &RoadNetworkDataset) -> Result<SplitRanges> {
    split_source(ds.len(), cfg.split.source_ratios)
}

fn target_splits(cfg: &ExperimentConfig, ds: &RoadNetworkDataset) -> Result<SplitRanges> {
    split_target(
        ds,
        cfg.split.train_days,
        cfg.split.val_days,
        cfg.split.test_fraction,
    )
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_metrics(dir: &Path, stem: &str, m: &MetricsReport) -> Result<()> {
    m.write_csv(dir.join(format!("{stem}.csv")))?;
    m.write_json(dir.join(format!("{stem}.json")))?;
    write_series_csv(
        dir.join(format!("{stem}_horizon_rmse.csv")),
        "horizon",
        &m.horizon_series("rmse"),
    )
}

/// Checkpoint, training report, test metrics and the historical-average
/// baseline on the same test windows.
fn write_trained(
    dir: &Path,
    checkpoint: &Checkpoint,
    report: &TrainReport,
    ds: &RoadNetworkDataset,
    splits: &SplitRanges,
) -> Result<()> {
    create_dir(dir)?;
    checkpoint.save(dir.join("checkpoint"))?;
    report.write_csv(dir.join("train_report.csv"))?;
    write_series_csv(
        dir.join("val_rmse.csv"),
        "epoch",
        &report.series("val_rmse"),
    )?;
    let metrics = evaluate_checkpoint(checkpoint, ds, splits.test.clone())?;
    write_metrics(dir, "test_metrics", &metrics)?;
    let cfg = &checkpoint.config;
    let ha = historical_average_baseline(
        ds,
        splits.train.clone(),
        splits.test.clone(),
        cfg.history,
        cfg.horizon,
    )?;
    write_metrics(dir, "baseline_metrics", &ha)?;
    info!(
        "{}: test rmse {:.4} (historical average {:.4})",
        dir.display(),
        metrics.rmse,
        ha.rmse
    );
    Ok(())
}

fn alpha_dir_name(alpha: f64) -> String {
    format!("alpha_{alpha}")
}

fn run_seed(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<Option<f64>> {
    create_dir(dir)?;
    match cfg.mode {
        Mode::Synth => {
            for (role, dref) in [("source", &cfg.source), ("target", &cfg.target)] {
                let Some(dref @ (DatasetRef::Synthetic { .. } | DatasetRef::SyntheticFile { .. })) =
                    dref
                else {
                    continue;
                };
                let loaded = load(dref, seed, role)?;
                let out = dir.join(role);
                write_dataset(&loaded.dataset, &out)?;
                write_labels(loaded.labels.as_deref().unwrap_or_default(), &out)?;
            }
        }
        Mode::Pretrain => {
            let src = load(cfg.source.as_ref().expect("validated"), seed, "source")?;
            let splits = source_splits(cfg, &src.dataset)?;
            let (ckpt, report) = pretrain(&cfg.model, &cfg.pretrain, &src.dataset, &splits, seed)?;
            write_trained(dir, &ckpt, &report, &src.dataset, &splits)?;
        }
        Mode::Scratch => {
            let tgt = load(cfg.target.as_ref().expect("validated"), seed, "target")?;
            let splits = target_splits(cfg, &tgt.dataset)?;
            let (ckpt, report) =
                train_from_scratch(&cfg.model, &cfg.finetune, &tgt.dataset, &splits, seed)?;
            write_trained(dir, &ckpt, &report, &tgt.dataset, &splits)?;
        }
        Mode::Finetune => {
            let source = match (&cfg.checkpoint, &cfg.source) {
                (Some(path), _) => Checkpoint::load(path)?,
                (None, Some(dref)) => {
                    let src = load(dref, seed, "source")?;
                    let splits = source_splits(cfg, &src.dataset)?;
                    let (ckpt, report) =
                        pretrain(&cfg.model, &cfg.pretrain, &src.dataset, &splits, seed)?;
                    write_trained(&dir.join("source"), &ckpt, &report, &src.dataset, &splits)?;
                    ckpt
                }
                (None, None) => unreachable!("validated"),
            };
            let tgt = load(cfg.target.as_ref().expect("validated"), seed, "target")?;
            let splits = target_splits(cfg, &tgt.dataset)?;
            for alpha in cfg.alpha_values() {
                let model = crate::model::ModelConfig {
                    alpha,
                    ..cfg.model.clone()
                };
                let (ckpt, report) =
                    finetune(&tgt.dataset, &splits, &source, &model, &cfg.finetune, seed)?;
                let out = if cfg.alphas.is_some() {
                    dir.join(alpha_dir_name(alpha))
                } else {
                    dir.to_path_buf()
                };
                write_trained(&out, &ckpt, &report, &tgt.dataset, &splits)?;
            }
        }
        Mode::Gradcheck => {
            let g = &cfg.gradcheck;
            let report = gradcheck_random(&cfg.model, g.batch_size, g.samples, g.step, seed)?;
            let max = report.max_rel_error;
            let summary = serde_json::json!({
                "max_rel_error": max,
                "tolerance": g.tolerance,
                "checked": report.entries.len(),
                "skipped": report.skipped,
                "tensors": report.tensors_covered(),
                "passed": report.passes(g.tolerance),
            });
            write_text(
                &dir.join("gradcheck.json"),
                &(serde_json::to_string_pretty(&summary).expect("json") + "\n"),
            )?;
            println!("seed {seed}: max relative gradient error {max:.3e}");
            return Ok(Some(max));
        }
        Mode::Evaluate | Mode::ClusterReport => unreachable!("seedless modes"),
    }
    Ok(None)
}

fn run_seedless(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let seed = cfg.seeds[0];
    let checkpoint = Checkpoint::load(cfg.checkpoint.as_ref().expect("validated"))?;
    match cfg.mode {
        Mode::Evaluate => {
            let (loaded, splits) = match (&cfg.source, &cfg.target) {
                (Some(s), None) => {
                    let l = load(s, seed, "source")?;
                    let sp = source_splits(cfg, &l.dataset)?;
                    (l, sp)
                }
                (None, Some(t)) => {
                    let l = load(t, seed, "target")?;
                    let sp = target_splits(cfg, &l.dataset)?;
                    (l, sp)
                }
                _ => unreachable!("validated"),
            };
            let ds = &loaded.dataset;
            let metrics = evaluate_checkpoint(&checkpoint, ds, splits.test.clone())?;
            write_metrics(dir, "test_metrics", &metrics)?;
            let c = &checkpoint.config;
            let ha = historical_average_baseline(
                ds,
                splits.train.clone(),
                splits.test.clone(),
                c.history,
                c.horizon,
            )?;
            write_metrics(dir, "baseline_metrics", &ha)?;
            println!("test rmse {:.4}, mae {:.4}", metrics.rmse, metrics.mae);
        }
        Mode::ClusterReport => {
            let src = load(cfg.source.as_ref().expect("validated"), seed, "source")?;
            let splits = source_splits(cfg, &src.dataset)?;
            let report = cluster_report(
                &checkpoint,
                &src.dataset,
                splits.train,
                src.labels.as_deref(),
            )?;
            report.write(dir)?;
            if let Some(ari) = report.adjusted_rand_index {
                println!("adjusted rand index vs labels: {ari:.4}");
            }
        }
        _ => unreachable!("seeded modes"),
    }
    Ok(())
}

fn dispatch(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let out = &cfg.output_dir;
    let mut passed = true;
    let mut max_rel_error: Option<f64> = None;
    match cfg.mode {
        Mode::Evaluate | Mode::ClusterReport => run_seedless(cfg, out)?,
        _ => {
            for &seed in &cfg.seeds {
                info!("{} seed {seed}", cfg.mode.name());
                if let Some(err) = run_seed(cfg, seed, &out.join(format!("seed_{seed}")))? {
                    passed &= err <= cfg.gradcheck.tolerance;
                    max_rel_error = Some(max_rel_error.map_or(err, |m| m.max(err)));
                }
            }
        }
    }
    Ok(RunOutcome {
        output_dir: out.clone(),
        passed,
        max_rel_error,
    })
}

/// Runs the configured mode and writes a manifest hashing every file in the
/// output directory. On error the manifest is still written, with status
/// `failed` and the files produced so far marked partial.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    create_dir(out)?;
    if out.join(MANIFEST_NAME).exists() {
        return Err(Error::Config(format!(
            "{} already holds a finished run; choose another output directory",
            out.display()
        )));
    }
    let result = dispatch(cfg);
    let manifest = RunManifest::collect(cfg, result.as_ref().err().map(|e| e.to_string()))?;
    manifest.write(out)?;
    result
}
