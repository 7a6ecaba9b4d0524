use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::data::{load_dataset_dir, SyntheticSpec};
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::training::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Pretrain,
    Finetune,
    Scratch,
    Evaluate,
    Synth,
    Gradcheck,
    ClusterReport,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Pretrain => "pretrain",
            Mode::Finetune => "finetune",
            Mode::Scratch => "scratch",
            Mode::Evaluate => "evaluate",
            Mode::Synth => "synth",
            Mode::Gradcheck => "gradcheck",
            Mode::ClusterReport => "cluster-report",
        }
    }
}

/// Where a dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetRef {
    /// A directory with `signals.csv`, `edges.csv` and `meta.json`.
    Dir { dir: PathBuf },
    /// An inline generator spec; `seed` defaults to one derived from the run
    /// seed.
    Synthetic {
        synthetic: SyntheticSpec,
        #[serde(default)]
        seed: Option<u64>,
    },
    /// A JSON file holding a generator spec.
    SyntheticFile {
        synthetic_file: PathBuf,
        #[serde(default)]
        seed: Option<u64>,
    },
}

impl DatasetRef {
    /// The generator spec, if this reference is synthetic.
    pub fn synthetic_spec(&self) -> Result<Option<(SyntheticSpec, Option<u64>)>> {
        match self {
            DatasetRef::Dir { .. } => Ok(None),
            DatasetRef::Synthetic { synthetic, seed } => Ok(Some((synthetic.clone(), *seed))),
            DatasetRef::SyntheticFile {
                synthetic_file,
                seed,
            } => {
                let text = std::fs::read_to_string(synthetic_file)
                    .map_err(|e| Error::io(synthetic_file, e))?;
                let spec =
                    serde_json::from_str(&text).map_err(|e| Error::json(synthetic_file, e))?;
                Ok(Some((spec, *seed)))
            }
        }
    }

    pub fn check_exists(&self) -> Result<()> {
        let path = match self {
            DatasetRef::Dir { dir } => dir,
            DatasetRef::SyntheticFile { synthetic_file, .. } => synthetic_file,
            DatasetRef::Synthetic { synthetic, .. } => return synthetic.validate(),
        };
        if !path.exists() {
            return Err(Error::Config(format!("{} does not exist", path.display())));
        }
        Ok(())
    }

    pub(crate) fn load_dir(dir: &Path) -> Result<crate::data::RoadNetworkDataset> {
        load_dataset_dir(dir)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    /// Train/validation/test ratios for the source domain.
    pub source_ratios: (f64, f64, f64),
    /// Target training days.
    pub train_days: usize,
    pub val_days: usize,
    /// Final fraction of the target series held out for testing.
    pub test_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            source_ratios: (0.7, 0.1, 0.2),
            train_days: 1,
            val_days: 1,
            test_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GradcheckConfig {
    pub samples: usize,
    pub batch_size: usize,
    pub step: f64,
    pub tolerance: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            samples: 200,
            batch_size: 2,
            step: 1e-5,
            tolerance: 1e-4,
        }
    }
}

/// A complete experiment description. Every field has a default, so `{}` is
/// a valid config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub source: Option<DatasetRef>,
    pub target: Option<DatasetRef>,
    /// Existing checkpoint directory, used by `finetune` (source), `evaluate`
    /// and `cluster-report`.
    pub checkpoint: Option<PathBuf>,
    pub model: ModelConfig,
    pub pretrain: TrainConfig,
    pub finetune: TrainConfig,
    pub split: SplitConfig,
    pub seeds: Vec<u64>,
    /// Fine-tune once per value into `alpha_{x}` subdirectories.
    pub alphas: Option<Vec<f64>>,
    pub output_dir: PathBuf,
    pub gradcheck: GradcheckConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Pretrain,
            source: None,
            target: None,
            checkpoint: None,
            model: ModelConfig::default(),
            pretrain: TrainConfig::pretrain(),
            finetune: TrainConfig::finetune(),
            split: SplitConfig::default(),
            seeds: vec![0],
            alphas: None,
            output_dir: PathBuf::from("runs/default"),
            gradcheck: GradcheckConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut value: Value = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("config is not valid JSON: {e}")))?;
        for (key, raw) in overrides {
            apply_override(&mut value, key, raw)?;
        }
        serde_json::from_value(value).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>, overrides: &[(String, String)]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text, overrides)
    }

    /// Values to fine-tune with: the sweep if present, else `model.alpha`.
    pub fn alpha_values(&self) -> Vec<f64> {
        self.alphas
            .clone()
            .unwrap_or_else(|| vec![self.model.alpha])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return bad("seeds must be distinct; each writes its own seed_{n} directory".into());
        }
        if let Some(alphas) = &self.alphas {
            if alphas.is_empty() || alphas.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
                return bad("alphas must be a non-empty list of values >= 0".into());
            }
            if self.mode != Mode::Finetune {
                return bad(format!(
                    "an alpha sweep only applies to finetune, not {}",
                    self.mode.name()
                ));
            }
        }
        if self.split.train_days == 0 || self.split.val_days == 0 {
            return bad("train_days and val_days must be positive".into());
        }
        let needs = |what: &str, ok: bool| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "mode {} needs {what}",
                    self.mode.name()
                )))
            }
        };
        match self.mode {
            Mode::Pretrain => needs("a source dataset", self.source.is_some())?,
            Mode::Scratch => needs("a target dataset", self.target.is_some())?,
            Mode::Finetune => {
                needs("a target dataset", self.target.is_some())?;
                needs(
                    "a source checkpoint or a source dataset to pre-train on",
                    self.checkpoint.is_some() || self.source.is_some(),
                )?;
                if self.checkpoint.is_some() && self.source.is_some() {
                    return bad(
                        "finetune takes either a source checkpoint or a source dataset, not both"
                            .into(),
                    );
                }
            }
            Mode::Evaluate => {
                needs("a checkpoint", self.checkpoint.is_some())?;
                needs("a dataset", self.source.is_some() || self.target.is_some())?;
                if self.source.is_some() && self.target.is_some() {
                    return bad(
                        "evaluate scores one dataset; give source or target, not both".into(),
                    );
                }
            }
            Mode::Synth => needs(
                "at least one synthetic dataset",
                [&self.source, &self.target].iter().any(|d| {
                    matches!(
                        d,
                        Some(DatasetRef::Synthetic { .. } | DatasetRef::SyntheticFile { .. })
                    )
                }),
            )?,
            Mode::ClusterReport => {
                needs("a checkpoint", self.checkpoint.is_some())?;
                needs("the source dataset", self.source.is_some())?;
            }
            Mode::Gradcheck => {
                if self.gradcheck.samples == 0 || self.gradcheck.batch_size == 0 {
                    return bad("gradcheck samples and batch_size must be positive".into());
                }
            }
        }
        for d in [&self.source, &self.target].into_iter().flatten() {
            d.check_exists()?;
        }
        if let Some(c) = &self.checkpoint {
            if !c.exists() {
                return bad(format!("checkpoint {} does not exist", c.display()));
            }
        }
        Ok(())
    }
}

/// Sets `key` (a dotted path such as `model.alpha`) to `raw`, parsed as JSON
/// when possible and as a string otherwise.
pub fn apply_override(root: &mut Value, key: &str, raw: &str) -> Result<()> {
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key {key:?}")));
    }
    let mut cur = root;
    for (i, part) in parts.iter().enumerate() {
        let obj = match cur {
            Value::Object(map) => map,
            Value::Null => {
                *cur = Value::Object(Default::default());
                cur.as_object_mut().expect("just set")
            }
            _ => {
                return Err(Error::Config(format!(
                    "override {key}: {} is not an object",
                    parts[..i].join(".")
                )))
            }
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    unreachable!("loop returns on the last part")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_all_defaults() {
        let cfg = ExperimentConfig::from_json_str("{}", &[]).unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.model.embed_dim, 10);
        assert_eq!(cfg.pretrain.batch_size, 64);
        assert_eq!(cfg.finetune.epochs, 400);
    }

    #[test]
    fn dotted_overrides() {
        let cfg = ExperimentConfig::from_json_str(
            r#"{"model": {"alpha": 0.5}}"#,
            &[
                ("model.alpha".into(), "2".into()),
                ("split.train_days".into(), "3".into()),
                ("output_dir".into(), "out/x".into()),
                ("mode".into(), "cluster-report".into()),
            ],
        )
        .unwrap();
        assert_eq!(cfg.model.alpha, 2.0);
        assert_eq!(cfg.split.train_days, 3);
        assert_eq!(cfg.output_dir, PathBuf::from("out/x"));
        assert_eq!(cfg.mode, Mode::ClusterReport);
    }

    #[test]
    fn unknown_mode_rejected() {
        assert!(ExperimentConfig::from_json_str(r#"{"mode": "train"}"#, &[]).is_err());
    }

    #[test]
    fn contradictory_finetune_inputs() {
        let cfg = ExperimentConfig {
            mode: Mode::Finetune,
            target: Some(DatasetRef::Synthetic {
                synthetic: SyntheticSpec::with_family(6, 2, 3, 60),
                seed: None,
            }),
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
        let sweep = ExperimentConfig {
            mode: Mode::Pretrain,
            alphas: Some(vec![0.0, 1.0]),
            ..ExperimentConfig::default()
        };
        assert!(sweep.validate().is_err());
    }

    #[test]
    fn dataset_ref_forms() {
        let d: DatasetRef = serde_json::from_str(r#"{"dir": "data/x"}"#).unwrap();
        assert_eq!(
            d,
            DatasetRef::Dir {
                dir: "data/x".into()
            }
        );
        let f: DatasetRef =
            serde_json::from_str(r#"{"synthetic_file": "s.json", "seed": 4}"#).unwrap();
        assert!(matches!(f, DatasetRef::SyntheticFile { seed: Some(4), .. }));
    }
}
