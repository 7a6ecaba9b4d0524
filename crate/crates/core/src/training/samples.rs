use std::ops::Range;

use crate::data::{apply_normalizer, windows_in_range, NormStats, RoadNetworkDataset};
use crate::error::{Error, Result};

/// Windows of one split, laid out node-major as the model consumes them.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    /// Normalized histories, `N x S x C` each.
    pub inputs: Vec<Vec<f64>>,
    /// Normalized futures, `N x H x C` each.
    pub targets: Vec<Vec<f64>>,
    /// Futures in original units.
    pub raw_targets: Vec<Vec<f64>>,
    pub origins: Vec<usize>,
}

impl Samples {
    pub fn build(
        dataset: &RoadNetworkDataset,
        normalizer: &NormStats,
        range: Range<usize>,
        history: usize,
        horizon: usize,
    ) -> Result<Self> {
        let (n, c) = (dataset.node_count, dataset.feature_count);
        if normalizer.channels() != c {
            return Err(Error::Shape(format!(
                "normalizer has {} channels, dataset {c}",
                normalizer.channels()
            )));
        }
        let normalized = dataset.map_signals(|s| {
            apply_normalizer(s, c, normalizer).expect("channel count checked above")
        });
        let raw = windows_in_range(dataset, range.clone(), history, horizon)?;
        let norm = windows_in_range(&normalized, range, history, horizon)?;
        Ok(Self {
            inputs: norm.iter().map(|w| w.input_node_major(n, c)).collect(),
            targets: norm.iter().map(|w| w.target_node_major(n, c)).collect(),
            raw_targets: raw.iter().map(|w| w.target_node_major(n, c)).collect(),
            origins: raw.iter().map(|w| w.origin_index).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Borrowed batch of the given window indices.
    pub fn batch(&self, indices: &[usize]) -> Batch<'_> {
        Batch {
            inputs: indices.iter().map(|&k| self.inputs[k].as_slice()).collect(),
            targets: indices
                .iter()
                .map(|&k| self.targets[k].as_slice())
                .collect(),
        }
    }

    pub fn all(&self) -> Batch<'_> {
        let idx: Vec<usize> = (0..self.len()).collect();
        self.batch(&idx)
    }
}

/// Node-major inputs and targets of one optimization step.
#[derive(Debug, Clone)]
pub struct Batch<'a> {
    pub inputs: Vec<&'a [f64]>,
    pub targets: Vec<&'a [f64]>,
}

impl Batch<'_> {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}
