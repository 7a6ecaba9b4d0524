use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{
    adam_step, compute_gradients, Checkpoint, EpochRecord, OptimizerState, Provenance, Regularizer,
    Samples, TrainReport,
};
use crate::data::{fit_normalizer, NormStats, RoadNetworkDataset, SplitRanges};
use crate::error::{Error, Result};
use crate::eval::evaluate_samples;
use crate::model::{ModelConfig, StgNetParams};
use crate::rng::SeedStream;
use crate::transfer::{assign_clusters, ema_update_centers, kmeans, ClusterState};

/// Optimization schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Maximum epochs.
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Multiplier applied every `decay_every` epochs.
    pub decay_factor: f64,
    pub decay_every: usize,
    /// Epochs without a new best validation RMSE before stopping; 0 disables
    /// early stopping.
    pub patience: usize,
    /// Fill the `seconds` column of the report.
    pub record_timing: bool,
}

impl TrainConfig {
    pub fn pretrain() -> Self {
        Self {
            epochs: 200,
            batch_size: 64,
            learning_rate: 0.003,
            decay_factor: 0.3,
            decay_every: 50,
            patience: 20,
            record_timing: false,
        }
    }

    pub fn finetune() -> Self {
        Self {
            epochs: 400,
            decay_every: 100,
            ..Self::pretrain()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.decay_every == 0 {
            return Err(Error::Config(
                "epochs, batch_size and decay_every must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return Err(Error::Config(format!(
                "decay factor {} must lie in (0, 1]",
                self.decay_factor
            )));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::pretrain()
    }
}

pub(crate) struct FitOutcome {
    pub params: StgNetParams,
    pub cluster: Option<ClusterState>,
    pub report: TrainReport,
}

/// The shared epoch loop.
///
/// With a cluster state, every step reassigns nodes to the nearest center,
/// takes a gradient step on `L_p + alpha * R`, then moves the centers by EMA.
/// The best-validation parameters (and the cluster state at that point) are
/// returned.
pub(crate) fn fit(
    mut params: StgNetParams,
    mut cluster: Option<ClusterState>,
    alpha: f64,
    train: &Samples,
    val: &Samples,
    normalizer: &NormStats,
    cfg: &TrainConfig,
    seeds: SeedStream,
) -> Result<FitOutcome> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Validation(format!(
            "{} training and {} validation windows; both must be non-empty",
            train.len(),
            val.len()
        )));
    }
    let mut opt = OptimizerState::new(
        &params,
        cfg.learning_rate,
        cfg.decay_factor,
        cfg.decay_every,
    );
    let mut shuffle = seeds.fork("shuffle");
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut report = TrainReport::default();
    let mut best: Option<(f64, StgNetParams, Option<ClusterState>)> = None;
    let mut since_best = 0;

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        opt.set_epoch(epoch);
        order.shuffle(&mut shuffle);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = train.batch(chunk);
            if let Some(state) = cluster.as_mut() {
                state.assignments = assign_clusters(&params.embedding, &state.centers)?;
            }
            let reg = cluster.as_ref().map(|state| Regularizer { state, alpha });
            let g = compute_gradients(&params, &batch, reg).map_err(|e| match e {
                Error::NonFinite { tensor } => Error::Diverged {
                    epoch,
                    tensor,
                    report: Box::new(report.clone()),
                },
                other => other,
            })?;
            adam_step(&mut opt, &mut params, &g.grads)?;
            if let Some(state) = cluster.as_mut() {
                ema_update_centers(state, &params.embedding)?;
            }
            loss_sum += g.loss * chunk.len() as f64;
        }
        if let Some(tensor) = params.first_non_finite() {
            return Err(Error::Diverged {
                epoch,
                tensor,
                report: Box::new(report),
            });
        }
        let metrics = evaluate_samples(&params, val, normalizer)?;
        if !metrics.rmse.is_finite() {
            return Err(Error::Diverged {
                epoch,
                tensor: "validation prediction".into(),
                report: Box::new(report),
            });
        }
        report.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_rmse: metrics.rmse,
            val_mae: metrics.mae,
            val_mape: metrics.mape,
            lr: opt.learning_rate,
            seconds: cfg.record_timing.then(|| started.elapsed().as_secs_f64()),
        });
        report.steps = opt.step;
        log::debug!(
            "epoch {epoch}: loss {:.6} val rmse {:.4}",
            loss_sum / train.len() as f64,
            metrics.rmse
        );
        if best.as_ref().is_none_or(|(b, _, _)| metrics.rmse < *b) {
            best = Some((metrics.rmse, params.clone(), cluster.clone()));
            report.best_epoch = Some(epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.patience > 0 && since_best >= cfg.patience {
                report.stopped_early = true;
                break;
            }
        }
    }
    let (_, params, cluster) = best.expect("at least one epoch ran");
    Ok(FitOutcome {
        params,
        cluster,
        report,
    })
}

/// Model config bound to a dataset's node and channel counts.
pub(crate) fn bind_config(
    config: &ModelConfig,
    dataset: &RoadNetworkDataset,
) -> Result<ModelConfig> {
    if config.channels != dataset.feature_count {
        return Err(Error::Config(format!(
            "model expects {} channels, dataset has {}",
            config.channels, dataset.feature_count
        )));
    }
    let cfg = ModelConfig {
        nodes: dataset.node_count,
        ..config.clone()
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Normalizer and train/validation windows for one dataset split.
pub(crate) fn prepare(
    cfg: &ModelConfig,
    dataset: &RoadNetworkDataset,
    splits: &SplitRanges,
) -> Result<(NormStats, Samples, Samples)> {
    let normalizer = fit_normalizer(dataset.slab(splits.train.clone()), dataset.feature_count)?;
    let train = Samples::build(
        dataset,
        &normalizer,
        splits.train.clone(),
        cfg.history,
        cfg.horizon,
    )?;
    let val = Samples::build(
        dataset,
        &normalizer,
        splits.val.clone(),
        cfg.history,
        cfg.horizon,
    )?;
    Ok((normalizer, train, val))
}

/// Trains from seeded random initialization on a data-rich source domain,
/// keeps the best-validation parameters and clusters their node embedding.
pub fn pretrain(
    config: &ModelConfig,
    train_cfg: &TrainConfig,
    dataset: &RoadNetworkDataset,
    splits: &SplitRanges,
    seed: u64,
) -> Result<(Checkpoint, TrainReport)> {
    let cfg = bind_config(config, dataset)?;
    let seeds = SeedStream::new(seed);
    let (normalizer, train, val) = prepare(&cfg, dataset, splits)?;
    let params = StgNetParams::init(&cfg, &mut seeds.fork("init"))?;
    let out = fit(
        params,
        None,
        0.0,
        &train,
        &val,
        &normalizer,
        train_cfg,
        seeds,
    )?;
    let cluster = kmeans(&out.params.embedding.0, cfg.clusters, seed)?.into_state(cfg.beta);
    let provenance = Provenance {
        seed,
        epoch: out.report.best_epoch,
        domain: "source".into(),
        data_fingerprint: dataset.fingerprint(),
    };
    Ok((
        Checkpoint::from_params(&out.params, Some(cluster), normalizer, provenance),
        out.report,
    ))
}

/// Target-domain training from random initialization, without transfer or
/// clustering; the reference point for measuring transfer benefit.
pub fn train_from_scratch(
    config: &ModelConfig,
    train_cfg: &TrainConfig,
    dataset: &RoadNetworkDataset,
    splits: &SplitRanges,
    seed: u64,
) -> Result<(Checkpoint, TrainReport)> {
    let cfg = bind_config(config, dataset)?;
    let seeds = SeedStream::new(seed);
    let (normalizer, train, val) = prepare(&cfg, dataset, splits)?;
    let params = StgNetParams::init(&cfg, &mut seeds.fork("init"))?;
    let out = fit(
        params,
        None,
        0.0,
        &train,
        &val,
        &normalizer,
        train_cfg,
        seeds,
    )?;
    let provenance = Provenance {
        seed,
        epoch: out.report.best_epoch,
        domain: "scratch".into(),
        data_fingerprint: dataset.fingerprint(),
    };
    Ok((
        Checkpoint::from_params(&out.params, None, normalizer, provenance),
        out.report,
    ))
}
