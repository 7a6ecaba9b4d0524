//! Road-network datasets: loading, normalization, windowing, splits and the
//! synthetic generator used as a desk-scale stand-in for real sensor data.

mod io;
mod normalize;
mod split;
mod synthetic;
mod window;

pub use io::{load_dataset, load_dataset_dir, write_dataset, DatasetMeta};
pub use normalize::{apply_normalizer, fit_normalizer, invert_normalizer, NormStats};
pub use split::{split_source, split_target, SplitRanges};
pub use synthetic::{generate_synthetic, Harmonic, Motif, SyntheticDataset, SyntheticSpec};
pub use window::{make_windows, windows_in_range, WindowedSample};

use std::ops::Range;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MINUTES_PER_DAY: usize = 1440;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

/// A road network graph plus its `T x N x C` signal tensor.
///
/// Signals are stored time-major: element `(t, i, c)` lives at
/// `(t * N + i) * C + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetworkDataset {
    pub node_count: usize,
    pub feature_count: usize,
    pub interval_minutes: usize,
    pub units: String,
    pub timestamps: Vec<String>,
    pub edges: Vec<Edge>,
    pub signals: Vec<f64>,
}

impl RoadNetworkDataset {
    pub fn new(
        node_count: usize,
        feature_count: usize,
        interval_minutes: usize,
        units: impl Into<String>,
        timestamps: Vec<String>,
        edges: Vec<Edge>,
        signals: Vec<f64>,
    ) -> Result<Self> {
        let ds = Self {
            node_count,
            feature_count,
            interval_minutes,
            units: units.into(),
            timestamps,
            edges,
            signals,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.node_count == 0 {
            return Err(Error::Validation("node count must be positive".into()));
        }
        if self.feature_count == 0 {
            return Err(Error::Validation("feature count must be positive".into()));
        }
        if self.interval_minutes == 0 {
            return Err(Error::Validation("interval must be positive".into()));
        }
        let stride = self.node_count * self.feature_count;
        if !self.signals.len().is_multiple_of(stride) {
            return Err(Error::Validation(format!(
                "signal length {} is not a multiple of N*C = {stride}",
                self.signals.len()
            )));
        }
        if self.timestamps.len() != self.len() {
            return Err(Error::Validation(format!(
                "{} timestamps for {} time steps",
                self.timestamps.len(),
                self.len()
            )));
        }
        if let Some(pos) = self.signals.iter().position(|v| !v.is_finite()) {
            let t = pos / stride;
            let node = (pos % stride) / self.feature_count;
            return Err(Error::Validation(format!(
                "non-finite signal at time step {t}, node {node}"
            )));
        }
        for (k, e) in self.edges.iter().enumerate() {
            if e.src >= self.node_count || e.dst >= self.node_count {
                return Err(Error::Validation(format!(
                    "edge {k} ({} -> {}) references a node outside 0..{}",
                    e.src, e.dst, self.node_count
                )));
            }
            if !(e.weight >= 0.0) || !e.weight.is_finite() {
                return Err(Error::Validation(format!(
                    "edge {k} has invalid weight {}",
                    e.weight
                )));
            }
        }
        Ok(())
    }

    /// Number of time steps `T`.
    pub fn len(&self) -> usize {
        self.signals.len() / (self.node_count * self.feature_count)
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    pub fn steps_per_day(&self) -> Result<usize> {
        if !MINUTES_PER_DAY.is_multiple_of(self.interval_minutes) {
            return Err(Error::Validation(format!(
                "interval of {} minutes does not divide a day",
                self.interval_minutes
            )));
        }
        Ok(MINUTES_PER_DAY / self.interval_minutes)
    }

    pub fn value(&self, t: usize, node: usize, channel: usize) -> f64 {
        self.signals[(t * self.node_count + node) * self.feature_count + channel]
    }

    /// Signal slab for a time range, still time-major.
    pub fn slab(&self, range: Range<usize>) -> &[f64] {
        let stride = self.node_count * self.feature_count;
        &self.signals[range.start * stride..range.end * stride]
    }

    /// Copy of the dataset with every signal passed through `f`.
    pub fn map_signals(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let mut out = self.clone();
        out.signals = f(&self.signals);
        out
    }

    /// SHA-256 over the signal bytes, used as a data fingerprint in checkpoints.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.node_count as u64).to_le_bytes());
        hasher.update((self.feature_count as u64).to_le_bytes());
        for v in &self.signals {
            hasher.update(v.to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }
}
