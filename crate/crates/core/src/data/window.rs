use std::ops::Range;

use super::RoadNetworkDataset;
use crate::error::{Error, Result};

/// One history/future pair cut from a signal tensor.
///
/// `input` is `S x N x C` and `target` is `H x N x C`, both time-major like the
/// parent signals. `origin_index` is the last history step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSample {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
    pub origin_index: usize,
}

impl WindowedSample {
    /// History re-laid node-major, `N x S x C`, as the model consumes it.
    pub fn input_node_major(&self, nodes: usize, channels: usize) -> Vec<f64> {
        to_node_major(&self.input, nodes, channels)
    }

    /// Future re-laid node-major, `N x H x C`.
    pub fn target_node_major(&self, nodes: usize, channels: usize) -> Vec<f64> {
        to_node_major(&self.target, nodes, channels)
    }
}

pub(crate) fn to_node_major(time_major: &[f64], nodes: usize, channels: usize) -> Vec<f64> {
    let steps = time_major.len() / (nodes * channels);
    let mut out = vec![0.0; time_major.len()];
    for t in 0..steps {
        for i in 0..nodes {
            for c in 0..channels {
                out[(i * steps + t) * channels + c] = time_major[(t * nodes + i) * channels + c];
            }
        }
    }
    out
}

/// All stride-1 windows over the whole dataset.
pub fn make_windows(
    dataset: &RoadNetworkDataset,
    history: usize,
    horizon: usize,
) -> Result<Vec<WindowedSample>> {
    windows_in_range(dataset, 0..dataset.len(), history, horizon)
}

/// Stride-1 windows whose history and future both lie inside `range`.
pub fn windows_in_range(
    dataset: &RoadNetworkDataset,
    range: Range<usize>,
    history: usize,
    horizon: usize,
) -> Result<Vec<WindowedSample>> {
    if history == 0 || horizon == 0 {
        return Err(Error::Config("history and horizon must be positive".into()));
    }
    if range.end > dataset.len() || range.start > range.end {
        return Err(Error::Validation(format!(
            "range {range:?} outside 0..{}",
            dataset.len()
        )));
    }
    let len = range.end - range.start;
    if len < history + horizon {
        return Err(Error::Validation(format!(
            "range of {len} steps is shorter than history {history} + horizon {horizon}"
        )));
    }
    let stride = dataset.node_count * dataset.feature_count;
    let count = len - history - horizon + 1;
    Ok((0..count)
        .map(|k| {
            let start = range.start + k;
            let split = start + history;
            WindowedSample {
                input: dataset.signals[start * stride..split * stride].to_vec(),
                target: dataset.signals[split * stride..(split + horizon) * stride].to_vec(),
                origin_index: split - 1,
            }
        })
        .collect())
}
