use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Entries with `|y|` at or below this are left out of MAPE.
pub const MAPE_MASK_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonMetrics {
    /// 1-based horizon step.
    pub horizon: usize,
    pub rmse: f64,
    pub mae: f64,
    /// Percentage; `None` when every entry at this step was masked.
    pub mape: Option<f64>,
}

/// Forecast errors in original units, aggregate and per horizon step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rmse: f64,
    pub mae: f64,
    pub mape: Option<f64>,
    /// Fraction of entries excluded from MAPE.
    pub masked_fraction: f64,
    /// Number of scalar predictions scored.
    pub sample_count: usize,
    pub per_horizon: Vec<HorizonMetrics>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    sq: f64,
    abs: f64,
    pct: f64,
    count: usize,
    unmasked: usize,
}

impl Sums {
    fn add(&mut self, p: f64, y: f64) {
        let e = p - y;
        self.sq += e * e;
        self.abs += e.abs();
        self.count += 1;
        if y.abs() > MAPE_MASK_THRESHOLD {
            self.pct += (e / y).abs();
            self.unmasked += 1;
        }
    }

    fn merge(&mut self, o: &Sums) {
        self.sq += o.sq;
        self.abs += o.abs;
        self.pct += o.pct;
        self.count += o.count;
        self.unmasked += o.unmasked;
    }

    fn rmse(&self) -> f64 {
        (self.sq / self.count as f64).sqrt()
    }

    fn mae(&self) -> f64 {
        self.abs / self.count as f64
    }

    fn mape(&self) -> Option<f64> {
        (self.unmasked > 0).then(|| 100.0 * self.pct / self.unmasked as f64)
    }
}

/// Streaming metric sums. Blocks are added in call order, so a fixed window
/// order gives a fixed report.
#[derive(Debug, Clone)]
pub struct MetricsAccumulator {
    horizon: usize,
    channels: usize,
    sums: Vec<Sums>,
}

impl MetricsAccumulator {
    pub fn new(horizon: usize, channels: usize) -> Self {
        Self {
            horizon,
            channels,
            sums: vec![Sums::default(); horizon],
        }
    }

    /// Adds one block laid out `[..., H, C]`.
    pub fn add(&mut self, pred: &[f64], truth: &[f64]) -> Result<()> {
        if pred.len() != truth.len() || !pred.len().is_multiple_of(self.horizon * self.channels) {
            return Err(Error::Shape(format!(
                "prediction of {} and truth of {} values do not form [.., {}, {}] blocks",
                pred.len(),
                truth.len(),
                self.horizon,
                self.channels
            )));
        }
        for (k, (p, y)) in pred.iter().zip(truth).enumerate() {
            let h = (k / self.channels) % self.horizon;
            self.sums[h].add(*p, *y);
        }
        Ok(())
    }

    pub fn finish(&self) -> Result<MetricsReport> {
        let mut total = Sums::default();
        for s in &self.sums {
            total.merge(s);
        }
        if total.count == 0 {
            return Err(Error::Validation("no entries to score".into()));
        }
        Ok(MetricsReport {
            rmse: total.rmse(),
            mae: total.mae(),
            mape: total.mape(),
            masked_fraction: 1.0 - total.unmasked as f64 / total.count as f64,
            sample_count: total.count,
            per_horizon: self
                .sums
                .iter()
                .enumerate()
                .map(|(h, s)| HorizonMetrics {
                    horizon: h + 1,
                    rmse: s.rmse(),
                    mae: s.mae(),
                    mape: s.mape(),
                })
                .collect(),
        })
    }
}

/// RMSE, MAE and masked MAPE of `pred` against `truth`.
///
/// The second-to-last axis is the horizon and the last the channel; a rank-1
/// input is a single horizon step with one channel.
pub fn compute_metrics(pred: &Tensor, truth: &Tensor) -> Result<MetricsReport> {
    if pred.shape() != truth.shape() {
        return Err(Error::Shape(format!(
            "prediction {:?} vs truth {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    let (h, c) = match pred.shape() {
        [] => return Err(Error::Shape("scalar tensors cannot be scored".into())),
        [_] => (1, 1),
        [.., h, c] => (*h, *c),
    };
    let mut acc = MetricsAccumulator::new(h, c);
    acc.add(pred.data(), truth.data())?;
    acc.finish()
}
