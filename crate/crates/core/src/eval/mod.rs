//! Forecast metrics in original units, the historical-average baseline and
//! report writers.

mod ari;
mod baseline;
mod metrics;
mod report;

use std::ops::Range;

pub use ari::adjusted_rand_index;
pub use baseline::{historical_average_baseline, HistoricalAverage};
pub use metrics::{
    compute_metrics, HorizonMetrics, MetricsAccumulator, MetricsReport, MAPE_MASK_THRESHOLD,
};
pub use report::write_series_csv;
pub(crate) use report::write_text;

use crate::data::{invert_normalizer, NormStats, RoadNetworkDataset};
use crate::error::{Error, Result};
use crate::model::{predict, Materialized, StgNetParams};
use crate::parallel;
use crate::training::{Checkpoint, Samples};

/// Scores `params` on prepared windows; predictions are mapped back to
/// original units before comparison.
pub fn evaluate_samples(
    params: &StgNetParams,
    samples: &Samples,
    normalizer: &NormStats,
) -> Result<MetricsReport> {
    let cfg = &params.config;
    if samples.is_empty() {
        return Err(Error::Validation("no windows to evaluate".into()));
    }
    let mat = Materialized::new(params);
    let preds = parallel::map_indices(samples.len(), |k| predict(params, &mat, &samples.inputs[k]));
    let mut acc = MetricsAccumulator::new(cfg.horizon, cfg.channels);
    for (pred, truth) in preds.iter().zip(&samples.raw_targets) {
        let pred = invert_normalizer(pred, cfg.channels, normalizer)?;
        acc.add(&pred, truth)?;
    }
    acc.finish()
}

/// Scores a checkpoint on the windows of `range`.
pub fn evaluate_checkpoint(
    checkpoint: &Checkpoint,
    dataset: &RoadNetworkDataset,
    range: Range<usize>,
) -> Result<MetricsReport> {
    let params = checkpoint.params()?;
    let cfg = &params.config;
    if cfg.nodes != dataset.node_count || cfg.channels != dataset.feature_count {
        return Err(Error::Shape(format!(
            "checkpoint expects {} nodes x {} channels, dataset has {} x {}",
            cfg.nodes, cfg.channels, dataset.node_count, dataset.feature_count
        )));
    }
    let samples = Samples::build(
        dataset,
        &checkpoint.normalizer,
        range,
        cfg.history,
        cfg.horizon,
    )?;
    evaluate_samples(&params, &samples, &checkpoint.normalizer)
}
