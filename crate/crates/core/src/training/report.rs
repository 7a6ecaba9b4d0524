use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::eval::write_text;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_rmse: f64,
    pub val_mae: f64,
    pub val_mape: Option<f64>,
    pub lr: f64,
    /// Wall-clock seconds; only recorded when timing is switched on, so that
    /// reports stay byte-identical across runs by default.
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Epoch with the lowest validation RMSE (earliest on ties).
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
    pub steps: u64,
}

impl TrainReport {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.best_epoch
            .and_then(|e| self.epochs.iter().find(|r| r.epoch == e))
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_rmse,val_mae,val_mape,lr,seconds\n");
        for r in &self.epochs {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.epoch,
                r.train_loss,
                r.val_rmse,
                r.val_mae,
                r.val_mape.map(|v| v.to_string()).unwrap_or_default(),
                r.lr,
                r.seconds.map(|v| v.to_string()).unwrap_or_default()
            );
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path.as_ref(), &self.to_csv_string())
    }

    /// `epoch,value` rows of one column, for plotting.
    pub fn series(&self, column: &str) -> Vec<(usize, f64)> {
        self.epochs
            .iter()
            .filter_map(|r| {
                let v = match column {
                    "train_loss" => Some(r.train_loss),
                    "val_rmse" => Some(r.val_rmse),
                    "val_mae" => Some(r.val_mae),
                    "val_mape" => r.val_mape,
                    "lr" => Some(r.lr),
                    _ => None,
                };
                v.map(|v| (r.epoch, v))
            })
            .collect()
    }
}
