//! On-disk checkpoints: a `manifest.json` plus one raw little-endian `f64`
//! file per tensor.
//!
//! Tensors are split into two partitions. `transferable` holds everything
//! whose shape is independent of the node count (all pools, biases and the
//! cluster centers). `node_bound` holds the node embedding only. The embedding
//! file may be deleted; the checkpoint then still loads for transfer.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::NormStats;
use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, NodeEmbedding, StgNetParams, WeightPools, EMBEDDING_NAME};
use crate::tensor::Tensor;
use crate::transfer::ClusterState;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CENTERS_NAME: &str = "cluster.centers";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    /// Epoch of the stored (best-validation) parameters.
    pub epoch: Option<usize>,
    /// `source`, `target` or `scratch`.
    pub domain: String,
    pub data_fingerprint: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Transferable,
    NodeBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    pub file: String,
    pub sha256: String,
    pub partition: Partition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ClusterMeta {
    assignments: Vec<usize>,
    beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    config: ModelConfig,
    provenance: Provenance,
    normalizer: NormStats,
    tensors: Vec<TensorEntry>,
    cluster: Option<ClusterMeta>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub pools: WeightPools,
    /// `None` when the node-bound partition was not stored or was removed.
    pub embedding: Option<NodeEmbedding>,
    pub cluster: Option<ClusterState>,
    pub normalizer: NormStats,
    pub provenance: Provenance,
}

/// The node-count-independent part of a checkpoint, re-targeted to a new
/// node count.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferableSet {
    pub config: ModelConfig,
    pub pools: WeightPools,
    pub cluster: Option<ClusterState>,
}

impl Checkpoint {
    pub fn from_params(
        params: &StgNetParams,
        cluster: Option<ClusterState>,
        normalizer: NormStats,
        provenance: Provenance,
    ) -> Self {
        Self {
            config: params.config.clone(),
            pools: params.pools.clone(),
            embedding: Some(params.embedding.clone()),
            cluster,
            normalizer,
            provenance,
        }
    }

    /// Full parameter set; needs the node-bound partition.
    pub fn params(&self) -> Result<StgNetParams> {
        let embedding = self.embedding.clone().ok_or_else(|| {
            Error::Checkpoint("node-bound partition (embedding) is not present".into())
        })?;
        StgNetParams::from_parts(self.config.clone(), embedding, self.pools.clone())
    }

    /// Transferable tensors for a model with `nodes` nodes. Never touches the
    /// embedding.
    pub fn transferable_for(&self, nodes: usize) -> TransferableSet {
        TransferableSet {
            config: ModelConfig {
                nodes,
                ..self.config.clone()
            },
            pools: self.pools.clone(),
            cluster: self.cluster.as_ref().map(|c| ClusterState {
                assignments: Vec::new(),
                ..c.clone()
            }),
        }
    }

    /// The embedding, provided it was trained for exactly `nodes` nodes.
    pub fn node_bound_for(&self, nodes: usize) -> Result<&NodeEmbedding> {
        let e = self.embedding.as_ref().ok_or_else(|| {
            Error::Checkpoint("node-bound partition (embedding) is not present".into())
        })?;
        if e.nodes() != nodes {
            return Err(Error::Checkpoint(format!(
                "embedding is bound to {} nodes and cannot serve {nodes}",
                e.nodes()
            )));
        }
        Ok(e)
    }

    fn named(&self) -> Vec<(String, &Tensor, Partition)> {
        let mut out = Vec::new();
        if let Some(e) = &self.embedding {
            out.push((EMBEDDING_NAME.to_string(), &e.0, Partition::NodeBound));
        }
        for (n, t) in self.pools.named() {
            out.push((n, t, Partition::Transferable));
        }
        if let Some(c) = &self.cluster {
            out.push((
                CENTERS_NAME.to_string(),
                &c.centers,
                Partition::Transferable,
            ));
        }
        out
    }

    /// Writes the checkpoint into `dir` and returns every written path.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        let mut entries = Vec::new();
        for (name, t, partition) in self.named() {
            let file = format!("{name}.bin");
            let bytes = t.to_le_bytes();
            let path = dir.join(&file);
            std::fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
            entries.push(TensorEntry {
                name,
                shape: t.shape().to_vec(),
                dtype: "f64".into(),
                file,
                sha256: sha256_hex(&bytes),
                partition,
            });
            written.push(path);
        }
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            config: self.config.clone(),
            provenance: self.provenance.clone(),
            normalizer: self.normalizer.clone(),
            tensors: entries,
            cluster: self.cluster.as_ref().map(|c| ClusterMeta {
                assignments: c.assignments.clone(),
                beta: c.beta,
            }),
        };
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json(&path, e))?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(written)
    }

    /// Loads and hash-checks a checkpoint. A missing embedding file yields
    /// `embedding: None`; any other missing or corrupt tensor is an error.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mpath = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::json(&mpath, e))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {}",
                manifest.format_version
            )));
        }
        manifest.config.validate()?;
        let mut tensors: BTreeMap<String, Tensor> = BTreeMap::new();
        for entry in &manifest.tensors {
            if entry.dtype != "f64" {
                return Err(Error::Checkpoint(format!(
                    "{}: unsupported dtype {}",
                    entry.name, entry.dtype
                )));
            }
            let path = dir.join(&entry.file);
            if entry.partition == Partition::NodeBound && !path.exists() {
                continue;
            }
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let digest = sha256_hex(&bytes);
            if digest != entry.sha256 {
                return Err(Error::Checkpoint(format!(
                    "{}: sha256 {digest} does not match manifest {}",
                    entry.name, entry.sha256
                )));
            }
            tensors.insert(
                entry.name.clone(),
                Tensor::from_le_bytes(&entry.shape, &bytes)?,
            );
        }
        let config = manifest.config;
        let mut pools = WeightPools::zeros(&config);
        let names: Vec<String> = WeightPools::zeros(&config)
            .named()
            .into_iter()
            .map(|(n, _)| n)
            .collect();
        for (name, slot) in names.iter().zip(pools.tensors_mut()) {
            let t = tensors
                .remove(name)
                .ok_or_else(|| Error::Checkpoint(format!("tensor {name} missing from manifest")))?;
            if t.shape() != slot.shape() {
                return Err(Error::Checkpoint(format!(
                    "{name} has shape {:?}, config implies {:?}",
                    t.shape(),
                    slot.shape()
                )));
            }
            *slot = t;
        }
        let embedding = match tensors.remove(EMBEDDING_NAME) {
            Some(t) if t.shape() == [config.nodes, config.embed_dim] => Some(NodeEmbedding(t)),
            Some(t) => {
                return Err(Error::Checkpoint(format!(
                    "embedding has shape {:?}, config implies [{}, {}]",
                    t.shape(),
                    config.nodes,
                    config.embed_dim
                )))
            }
            None => None,
        };
        let cluster = match (manifest.cluster, tensors.remove(CENTERS_NAME)) {
            (Some(meta), Some(centers)) => {
                let state = ClusterState {
                    centers,
                    assignments: meta.assignments,
                    beta: meta.beta,
                };
                state.validate()?;
                Some(state)
            }
            (None, None) => None,
            _ => {
                return Err(Error::Checkpoint(
                    "cluster assignments and centers must be stored together".into(),
                ))
            }
        };
        if let Some(extra) = tensors.keys().next() {
            return Err(Error::Checkpoint(format!("unexpected tensor {extra}")));
        }
        Ok(Self {
            config,
            pools,
            embedding,
            cluster,
            normalizer: manifest.normalizer,
            provenance: manifest.provenance,
        })
    }
}
