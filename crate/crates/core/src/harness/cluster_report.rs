use std::fmt::Write as _;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::data::RoadNetworkDataset;
use crate::error::{Error, Result};
use crate::eval::{adjusted_rand_index, write_text, HistoricalAverage};
use crate::training::Checkpoint;

/// Cluster membership and per-cluster mean daily profiles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterReport {
    pub clusters: usize,
    pub assignments: Vec<usize>,
    pub sizes: Vec<usize>,
    pub steps_per_day: usize,
    pub interval_minutes: usize,
    /// `profiles[g][channel][slot]`: the mean over member nodes of their
    /// training-range time-of-day means. Empty clusters have no profile.
    pub profiles: Vec<Option<Vec<Vec<f64>>>>,
    /// Agreement with known labels, when supplied.
    pub adjusted_rand_index: Option<f64>,
}

pub fn cluster_report(
    checkpoint: &Checkpoint,
    dataset: &RoadNetworkDataset,
    train: Range<usize>,
    labels: Option<&[usize]>,
) -> Result<ClusterReport> {
    let state = checkpoint
        .cluster
        .as_ref()
        .ok_or_else(|| Error::Checkpoint("checkpoint carries no cluster state".into()))?;
    if state.assignments.len() != dataset.node_count {
        return Err(Error::Shape(format!(
            "{} cluster assignments for a dataset of {} nodes",
            state.assignments.len(),
            dataset.node_count
        )));
    }
    let ha = HistoricalAverage::fit(dataset, train)?;
    let c = dataset.feature_count;
    let sizes = state.sizes();
    let profiles = (0..state.clusters())
        .map(|g| {
            (sizes[g] > 0).then(|| {
                (0..c)
                    .map(|ch| {
                        (0..ha.steps_per_day)
                            .map(|slot| {
                                let sum: f64 = state
                                    .assignments
                                    .iter()
                                    .enumerate()
                                    .filter(|(_, &z)| z == g)
                                    .map(|(i, _)| ha.predict(slot, i, ch))
                                    .sum();
                                sum / sizes[g] as f64
                            })
                            .collect()
                    })
                    .collect()
            })
        })
        .collect();
    let ari = match labels {
        Some(l) if l.len() == state.assignments.len() => {
            Some(adjusted_rand_index(&state.assignments, l))
        }
        Some(l) => {
            return Err(Error::Shape(format!(
                "{} labels for {} nodes",
                l.len(),
                state.assignments.len()
            )))
        }
        None => None,
    };
    Ok(ClusterReport {
        clusters: state.clusters(),
        assignments: state.assignments.clone(),
        sizes,
        steps_per_day: ha.steps_per_day,
        interval_minutes: dataset.interval_minutes,
        profiles,
        adjusted_rand_index: ari,
    })
}

impl ClusterReport {
    /// Writes the CSV and JSON files into `dir` and returns their paths.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut assignments = String::from("node,cluster\n");
        for (i, z) in self.assignments.iter().enumerate() {
            let _ = writeln!(assignments, "{i},{z}");
        }
        let mut sizes = String::from("cluster,size\n");
        for (g, s) in self.sizes.iter().enumerate() {
            let _ = writeln!(sizes, "{g},{s}");
        }
        let mut profiles = String::from("cluster,channel,slot,minute_of_day,value\n");
        for (g, p) in self.profiles.iter().enumerate() {
            for (ch, series) in p.iter().flatten().enumerate() {
                for (slot, v) in series.iter().enumerate() {
                    let _ = writeln!(
                        profiles,
                        "{g},{ch},{slot},{},{v}",
                        slot * self.interval_minutes
                    );
                }
            }
        }
        let files = [
            ("cluster_assignments.csv", assignments),
            ("cluster_sizes.csv", sizes),
            ("cluster_profiles.csv", profiles),
            (
                "cluster_report.json",
                serde_json::to_string_pretty(self).expect("report serializes") + "\n",
            ),
        ];
        let mut out = Vec::new();
        for (name, text) in files {
            let path = dir.join(name);
            write_text(&path, &text)?;
            out.push(path);
        }
        Ok(out)
    }
}
