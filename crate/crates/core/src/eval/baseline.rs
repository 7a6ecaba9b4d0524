use std::ops::Range;

use super::{MetricsAccumulator, MetricsReport};
use crate::data::{windows_in_range, RoadNetworkDataset};
use crate::error::{Error, Result};

/// Per-node, per-channel, per-time-of-day means over a training range.
///
/// Slot `k` covers steps `t` with `t % steps_per_day == k`. Slots never seen
/// in training use the node's training mean.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoricalAverage {
    pub steps_per_day: usize,
    nodes: usize,
    channels: usize,
    /// `slot x node x channel`.
    means: Vec<f64>,
    /// Slots with at least one training observation.
    covered: Vec<bool>,
}

impl HistoricalAverage {
    pub fn fit(dataset: &RoadNetworkDataset, train: Range<usize>) -> Result<Self> {
        if train.is_empty() || train.end > dataset.len() {
            return Err(Error::Validation(format!(
                "training range {train:?} is empty or outside 0..{}",
                dataset.len()
            )));
        }
        let period = dataset.steps_per_day()?;
        let (n, c) = (dataset.node_count, dataset.feature_count);
        let stride = n * c;
        let mut sums = vec![0.0; period * stride];
        let mut counts = vec![0usize; period];
        let mut overall = vec![0.0; stride];
        for t in train.clone() {
            let slot = t % period;
            counts[slot] += 1;
            let row = &dataset.signals[t * stride..(t + 1) * stride];
            for (k, v) in row.iter().enumerate() {
                sums[slot * stride + k] += v;
                overall[k] += v;
            }
        }
        let total = train.len() as f64;
        for o in &mut overall {
            *o /= total;
        }
        let mut means = sums;
        for slot in 0..period {
            let block = &mut means[slot * stride..(slot + 1) * stride];
            if counts[slot] == 0 {
                block.copy_from_slice(&overall);
            } else {
                for v in block.iter_mut() {
                    *v /= counts[slot] as f64;
                }
            }
        }
        Ok(Self {
            steps_per_day: period,
            nodes: n,
            channels: c,
            means,
            covered: counts.iter().map(|&k| k > 0).collect(),
        })
    }

    pub fn predict(&self, t: usize, node: usize, channel: usize) -> f64 {
        let slot = t % self.steps_per_day;
        self.means[(slot * self.nodes + node) * self.channels + channel]
    }

    /// Fraction of time-of-day slots seen in training.
    pub fn coverage(&self) -> f64 {
        self.covered.iter().filter(|c| **c).count() as f64 / self.covered.len() as f64
    }
}

/// Scores the historical-average forecast on the same windows the model would
/// see in `eval`.
pub fn historical_average_baseline(
    dataset: &RoadNetworkDataset,
    train: Range<usize>,
    eval: Range<usize>,
    history: usize,
    horizon: usize,
) -> Result<MetricsReport> {
    let ha = HistoricalAverage::fit(dataset, train)?;
    let (n, c) = (dataset.node_count, dataset.feature_count);
    let windows = windows_in_range(dataset, eval, history, horizon)?;
    let mut acc = MetricsAccumulator::new(horizon, c);
    let mut pred = vec![0.0; n * horizon * c];
    for w in &windows {
        for i in 0..n {
            for h in 0..horizon {
                for ch in 0..c {
                    pred[(i * horizon + h) * c + ch] = ha.predict(w.origin_index + 1 + h, i, ch);
                }
            }
        }
        acc.add(&pred, &w.target_node_major(n, c))?;
    }
    acc.finish()
}
