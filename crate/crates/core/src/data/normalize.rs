use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-channel z-score statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    fn check(&self, channels: usize) -> Result<()> {
        if channels != self.channels() {
            return Err(Error::Shape(format!(
                "normalizer fitted on {} channels, data has {channels}",
                self.channels()
            )));
        }
        Ok(())
    }
}

/// Fits population mean/std per channel over `signals`, whose last axis is the
/// channel axis. Callers pass only the training slab.
pub fn fit_normalizer(signals: &[f64], channels: usize) -> Result<NormStats> {
    if channels == 0 || signals.is_empty() || !signals.len().is_multiple_of(channels) {
        return Err(Error::Validation(format!(
            "cannot fit a normalizer on {} values with {channels} channels",
            signals.len()
        )));
    }
    let count = (signals.len() / channels) as f64;
    let mut mean = vec![0.0; channels];
    for (k, v) in signals.iter().enumerate() {
        mean[k % channels] += v;
    }
    for m in &mut mean {
        *m /= count;
    }
    let mut var = vec![0.0; channels];
    for (k, v) in signals.iter().enumerate() {
        let d = v - mean[k % channels];
        var[k % channels] += d * d;
    }
    let std: Vec<f64> = var.iter().map(|v| (v / count).sqrt()).collect();
    if let Some(c) = std.iter().position(|s| !(*s > 0.0)) {
        return Err(Error::Validation(format!(
            "channel {c} is constant over the training range; drop or perturb it before fitting"
        )));
    }
    Ok(NormStats { mean, std })
}

pub fn apply_normalizer(signals: &[f64], channels: usize, stats: &NormStats) -> Result<Vec<f64>> {
    stats.check(channels)?;
    Ok(signals
        .iter()
        .enumerate()
        .map(|(k, v)| (v - stats.mean[k % channels]) / stats.std[k % channels])
        .collect())
}

pub fn invert_normalizer(pred: &[f64], channels: usize, stats: &NormStats) -> Result<Vec<f64>> {
    stats.check(channels)?;
    Ok(pred
        .iter()
        .enumerate()
        .map(|(k, v)| v * stats.std[k % channels] + stats.mean[k % channels])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_point_statistics() {
        let s = fit_normalizer(&[0.0, 2.0], 1).unwrap();
        assert_eq!(s.mean, vec![1.0]);
        assert_eq!(s.std, vec![1.0]);
    }

    #[test]
    fn population_std_of_one_to_four() {
        let s = fit_normalizer(&[1.0, 2.0, 3.0, 4.0], 1).unwrap();
        assert_eq!(s.mean[0], 2.5);
        // sqrt((2.25 + 0.25 + 0.25 + 2.25) / 4) = sqrt(1.25)
        assert!((s.std[0] - 1.25f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn constant_channel_is_rejected() {
        let err = fit_normalizer(&[3.0, 3.0, 3.0], 1).unwrap_err();
        assert!(err.to_string().contains("constant"));
    }

    #[test]
    fn hand_values() {
        let s = NormStats {
            mean: vec![10.0],
            std: vec![2.0],
        };
        assert_eq!(apply_normalizer(&[14.0], 1, &s).unwrap(), vec![2.0]);
        assert_eq!(apply_normalizer(&[10.0], 1, &s).unwrap(), vec![0.0]);
        assert!(apply_normalizer(&[1.0, 2.0], 2, &s).is_err());
        assert!(invert_normalizer(&[1.0, 2.0], 2, &s).is_err());
    }

    #[test]
    fn channels_are_independent() {
        let s = fit_normalizer(&[0.0, 10.0, 2.0, 30.0], 2).unwrap();
        assert_eq!(s.mean, vec![1.0, 20.0]);
        assert_eq!(s.std, vec![1.0, 10.0]);
    }

    proptest! {
        #[test]
        fn round_trip(xs in prop::collection::vec(-1e4f64..1e4, 2..64), mean in -100.0f64..100.0, std in 0.01f64..50.0) {
            let s = NormStats { mean: vec![mean], std: vec![std] };
            let z = apply_normalizer(&xs, 1, &s).unwrap();
            let back = invert_normalizer(&z, 1, &s).unwrap();
            for (a, b) in xs.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1e-6 * (1.0 + a.abs()));
            }
        }
    }
}
