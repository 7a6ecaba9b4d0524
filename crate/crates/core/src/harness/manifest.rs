use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::digest::sha256_file;
use crate::error::{Error, Result};
use crate::eval::write_text;

pub const MANIFEST_NAME: &str = "run_manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
    /// Written by a run that did not finish.
    pub partial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub mode: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    /// `ok` or `failed`.
    pub status: String,
    pub error: Option<String>,
    pub files: Vec<ManifestEntry>,
}

fn walk(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(dir, e))?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let path = e.path();
        if path.is_dir() {
            walk(root, &path, out)?;
        } else if path != root.join(MANIFEST_NAME) {
            out.push(path);
        }
    }
    Ok(())
}

impl RunManifest {
    pub fn collect(cfg: &ExperimentConfig, error: Option<String>) -> Result<Self> {
        let root = &cfg.output_dir;
        let mut paths = Vec::new();
        walk(root, root, &mut paths)?;
        let partial = error.is_some();
        let files = paths
            .iter()
            .map(|p| {
                let rel = p.strip_prefix(root).expect("walked under root");
                let parts: Vec<_> = rel
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect();
                Ok(ManifestEntry {
                    path: parts.join("/"),
                    sha256: sha256_file(p)?,
                    bytes: std::fs::metadata(p).map_err(|e| Error::io(p, e))?.len(),
                    partial,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            version: format!("v{}", env!("CARGO_PKG_VERSION")),
            mode: cfg.mode.name().into(),
            config: cfg.clone(),
            seeds: cfg.seeds.clone(),
            status: if partial { "failed" } else { "ok" }.into(),
            error,
            files,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        write_text(&dir.join(MANIFEST_NAME), &text)
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(MANIFEST_NAME);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(&path, e))
    }
}
