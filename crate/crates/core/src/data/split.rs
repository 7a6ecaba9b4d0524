use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{RoadNetworkDataset, MINUTES_PER_DAY};
use crate::error::{Error, Result};

/// Contiguous chronological train/validation/test ranges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRanges {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

/// Ratio split used for data-rich domains, e.g. `(0.7, 0.1, 0.2)`.
pub fn split_source(len: usize, ratios: (f64, f64, f64)) -> Result<SplitRanges> {
    let (tr, va, te) = ratios;
    if !(tr > 0.0 && va > 0.0 && te > 0.0) || ((tr + va + te) - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split ratios {ratios:?} must be positive and sum to 1"
        )));
    }
    let train_len = (len as f64 * tr).round() as usize;
    let val_len = (len as f64 * va).round() as usize;
    if train_len + val_len >= len {
        return Err(Error::Validation(format!(
            "{len} steps leave no room for a test split"
        )));
    }
    Ok(SplitRanges {
        train: 0..train_len,
        val: train_len..train_len + val_len,
        test: train_len + val_len..len,
    })
}

/// Day-based split used for data-scarce target domains: the first
/// `train_days`, then `val_days`, and the final `test_fraction` of the series.
pub fn split_target(
    dataset: &RoadNetworkDataset,
    train_days: usize,
    val_days: usize,
    test_fraction: f64,
) -> Result<SplitRanges> {
    if !MINUTES_PER_DAY.is_multiple_of(dataset.interval_minutes) {
        return Err(Error::Validation(format!(
            "interval of {} minutes does not divide a day",
            dataset.interval_minutes
        )));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test fraction {test_fraction} must lie in (0, 1)"
        )));
    }
    let per_day = MINUTES_PER_DAY / dataset.interval_minutes;
    let len = dataset.len();
    let train_end = train_days * per_day;
    let val_end = train_end + val_days * per_day;
    let test_len = (len as f64 * test_fraction).round() as usize;
    let test_start = len.saturating_sub(test_len);
    if train_days == 0 || val_days == 0 || val_end > test_start {
        return Err(Error::Validation(format!(
            "{train_days} train day(s) + {val_days} validation day(s) = {val_end} steps \
             overlap the test range starting at step {test_start} of {len}"
        )));
    }
    Ok(SplitRanges {
        train: 0..train_end,
        val: train_end..val_end,
        test: test_start..len,
    })
}
