use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Edge, RoadNetworkDataset};
use crate::error::{Error, Result};

pub const SIGNALS_FILE: &str = "signals.csv";
pub const EDGES_FILE: &str = "edges.csv";
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub interval_minutes: usize,
    pub feature_count: usize,
    #[serde(default)]
    pub units: String,
}

fn column_name(node: usize, channel: usize, feature_count: usize) -> String {
    if feature_count == 1 {
        format!("node_{node}")
    } else {
        format!("node_{node}_c{channel}")
    }
}

/// Loads `signals.csv`, `edges.csv` and `meta.json` from one directory.
pub fn load_dataset_dir(dir: impl AsRef<Path>) -> Result<RoadNetworkDataset> {
    let dir = dir.as_ref();
    load_dataset(
        dir.join(SIGNALS_FILE),
        dir.join(EDGES_FILE),
        dir.join(META_FILE),
    )
}

pub fn load_dataset(
    signals_path: impl AsRef<Path>,
    edges_path: impl AsRef<Path>,
    meta_path: impl AsRef<Path>,
) -> Result<RoadNetworkDataset> {
    let meta_path = meta_path.as_ref();
    let meta_text = fs::read_to_string(meta_path).map_err(|e| Error::io(meta_path, e))?;
    let meta: DatasetMeta =
        serde_json::from_str(&meta_text).map_err(|e| Error::json(meta_path, e))?;
    if meta.feature_count == 0 {
        return Err(Error::Validation(
            "meta feature_count must be positive".into(),
        ));
    }

    let (node_count, timestamps, signals) =
        read_signals(signals_path.as_ref(), meta.feature_count)?;
    let edges = read_edges(edges_path.as_ref())?;

    RoadNetworkDataset::new(
        node_count,
        meta.feature_count,
        meta.interval_minutes,
        meta.units,
        timestamps,
        edges,
        signals,
    )
}

fn read_signals(path: &Path, feature_count: usize) -> Result<(usize, Vec<String>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let header = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    if header.get(0) != Some("timestamp") {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            row: 1,
            column: header.get(0).unwrap_or("").to_string(),
            message: "first column must be `timestamp`".into(),
        });
    }
    let value_cols = header.len() - 1;
    if value_cols == 0 || value_cols % feature_count != 0 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            row: 1,
            column: String::new(),
            message: format!(
                "{value_cols} value columns is not a positive multiple of feature_count {feature_count}"
            ),
        });
    }
    let node_count = value_cols / feature_count;
    for node in 0..node_count {
        for channel in 0..feature_count {
            let col = 1 + node * feature_count + channel;
            let expected = column_name(node, channel, feature_count);
            if header.get(col) != Some(expected.as_str()) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row: 1,
                    column: header.get(col).unwrap_or("").to_string(),
                    message: format!("expected header `{expected}`"),
                });
            }
        }
    }

    let mut timestamps = Vec::new();
    let mut signals = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != header.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: line,
                column: String::new(),
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        timestamps.push(record[0].to_string());
        for col in 1..record.len() {
            let field = record[col].trim();
            let value: f64 = field.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row: line,
                column: header[col].to_string(),
                message: format!("cannot parse `{field}` as a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Validation(format!(
                    "{}: non-finite value `{field}` at row {line}, column {}",
                    path.display(),
                    &header[col]
                )));
            }
            signals.push(value);
        }
    }
    Ok((node_count, timestamps, signals))
}

fn read_edges(path: &Path) -> Result<Vec<Edge>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let header = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names != ["src", "dst", "weight"] {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            row: 1,
            column: String::new(),
            message: "edges header must be `src,dst,weight`".into(),
        });
    }
    let mut edges = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let bad = |col: &str, msg: String| Error::Parse {
            path: path.to_path_buf(),
            row: line,
            column: col.to_string(),
            message: msg,
        };
        let src: usize = record[0]
            .trim()
            .parse()
            .map_err(|_| bad("src", format!("`{}` is not a node index", &record[0])))?;
        let dst: usize = record[1]
            .trim()
            .parse()
            .map_err(|_| bad("dst", format!("`{}` is not a node index", &record[1])))?;
        let weight: f64 = record[2]
            .trim()
            .parse()
            .map_err(|_| bad("weight", format!("`{}` is not a number", &record[2])))?;
        edges.push(Edge { src, dst, weight });
    }
    Ok(edges)
}

/// Writes the dataset as `signals.csv`, `edges.csv` and `meta.json` under `dir`.
///
/// Values use Rust's shortest round-trip float formatting, so loading the
/// files back reproduces the signals bit for bit.
pub fn write_dataset(ds: &RoadNetworkDataset, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let signals_path = dir.join(SIGNALS_FILE);
    let mut w = csv::Writer::from_path(&signals_path).map_err(|e| Error::csv(&signals_path, e))?;
    let mut header = vec!["timestamp".to_string()];
    for node in 0..ds.node_count {
        for channel in 0..ds.feature_count {
            header.push(column_name(node, channel, ds.feature_count));
        }
    }
    w.write_record(&header)
        .map_err(|e| Error::csv(&signals_path, e))?;
    let stride = ds.node_count * ds.feature_count;
    let mut row = Vec::with_capacity(stride + 1);
    for t in 0..ds.len() {
        row.clear();
        row.push(ds.timestamps[t].clone());
        row.extend(
            ds.signals[t * stride..(t + 1) * stride]
                .iter()
                .map(|v| v.to_string()),
        );
        w.write_record(&row)
            .map_err(|e| Error::csv(&signals_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&signals_path, e))?;

    let edges_path = dir.join(EDGES_FILE);
    let mut w = csv::Writer::from_path(&edges_path).map_err(|e| Error::csv(&edges_path, e))?;
    w.write_record(["src", "dst", "weight"])
        .map_err(|e| Error::csv(&edges_path, e))?;
    for e in &ds.edges {
        w.write_record([e.src.to_string(), e.dst.to_string(), e.weight.to_string()])
            .map_err(|err| Error::csv(&edges_path, err))?;
    }
    w.flush().map_err(|e| Error::io(&edges_path, e))?;

    let meta_path = dir.join(META_FILE);
    let meta = DatasetMeta {
        interval_minutes: ds.interval_minutes,
        feature_count: ds.feature_count,
        units: ds.units.clone(),
    };
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::json(&meta_path, e))?;
    fs::write(&meta_path, text + "\n").map_err(|e| Error::io(&meta_path, e))?;

    Ok(vec![signals_path, edges_path, meta_path])
}
