use std::fmt::Write as _;
use std::path::Path;

use super::MetricsReport;
use crate::error::{Error, Result};

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl MetricsReport {
    /// `metric,horizon,value` rows; the aggregate uses horizon `all`.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("metric,horizon,value\n");
        let _ = writeln!(s, "rmse,all,{}", self.rmse);
        let _ = writeln!(s, "mae,all,{}", self.mae);
        let _ = writeln!(s, "mape,all,{}", opt(self.mape));
        for h in &self.per_horizon {
            let _ = writeln!(s, "rmse,{},{}", h.horizon, h.rmse);
            let _ = writeln!(s, "mae,{},{}", h.horizon, h.mae);
            let _ = writeln!(s, "mape,{},{}", h.horizon, opt(h.mape));
        }
        let _ = writeln!(s, "masked_fraction,all,{}", self.masked_fraction);
        let _ = writeln!(s, "sample_count,all,{}", self.sample_count);
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path.as_ref(), &self.to_csv_string())
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        write_text(path, &(text + "\n"))
    }

    /// `horizon,value` series of one metric (`rmse`, `mae` or `mape`).
    pub fn horizon_series(&self, metric: &str) -> Vec<(usize, f64)> {
        self.per_horizon
            .iter()
            .filter_map(|h| {
                let v = match metric {
                    "rmse" => Some(h.rmse),
                    "mae" => Some(h.mae),
                    "mape" => h.mape,
                    _ => None,
                };
                v.map(|v| (h.horizon, v))
            })
            .collect()
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Two-column plot series, e.g. `epoch,value` or `horizon,value`.
pub fn write_series_csv(path: impl AsRef<Path>, x_name: &str, rows: &[(usize, f64)]) -> Result<()> {
    let mut s = format!("{x_name},value\n");
    for (x, v) in rows {
        let _ = writeln!(s, "{x},{v}");
    }
    write_text(path.as_ref(), &s)
}
