use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture and transfer hyperparameters.
///
/// Defaults follow the published settings where they exist (d = 10, K = 3,
/// dilations [1, 2], G = 5, alpha = 1.0, beta = 0.2, H = 12). The hidden width
/// and history length are ours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// History length S.
    pub history: usize,
    /// Forecast horizon H.
    pub horizon: usize,
    /// Feature channels C.
    pub channels: usize,
    /// Node count N (N' in a target domain).
    pub nodes: usize,
    /// Node embedding dimension d.
    pub embed_dim: usize,
    /// TCN hidden width O.
    pub hidden: usize,
    /// GCN output width F; must equal `channels`.
    pub gcn_channels: usize,
    /// Kernel length K.
    pub kernel: usize,
    /// One dilation factor per residual block.
    pub dilations: Vec<usize>,
    /// Cluster count G.
    pub clusters: usize,
    /// Weight of the clustering regularizer.
    pub alpha: f64,
    /// EMA smoothing weight for cluster centers.
    pub beta: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            history: 12,
            horizon: 12,
            channels: 1,
            nodes: 1,
            embed_dim: 10,
            hidden: 32,
            gcn_channels: 1,
            kernel: 3,
            dilations: vec![1, 2],
            clusters: 5,
            alpha: 1.0,
            beta: 0.2,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.history == 0 || self.horizon == 0 {
            return bad("history and horizon must be positive".into());
        }
        if self.channels == 0 || self.nodes == 0 || self.hidden == 0 {
            return bad("channels, nodes and hidden width must be positive".into());
        }
        if self.embed_dim == 0 {
            return bad("embedding dimension must be >= 1".into());
        }
        if self.gcn_channels != self.channels {
            return bad(format!(
                "GCN output width {} must equal the channel count {} because the \
                 predictor maps only the time axis",
                self.gcn_channels, self.channels
            ));
        }
        if self.kernel < 2 {
            return bad(format!("kernel length {} must be >= 2", self.kernel));
        }
        if self.dilations.is_empty() || self.dilations.contains(&0) {
            return bad("dilations must be non-empty and each >= 1".into());
        }
        if self.clusters == 0 {
            return bad("cluster count must be positive".into());
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return bad(format!("alpha {} must be >= 0", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad(format!("beta {} must lie in (0, 1]", self.beta));
        }
        if self.embed_dim >= self.nodes {
            log::warn!(
                "embedding dimension {} is not smaller than the node count {}",
                self.embed_dim,
                self.nodes
            );
        }
        Ok(())
    }

    /// Number of dilated convolution layers (two per residual block).
    pub fn conv_layers(&self) -> usize {
        2 * self.dilations.len()
    }

    /// `(out, in)` channel counts of conv layer `l`.
    pub fn conv_io(&self, layer: usize) -> (usize, usize) {
        if layer == 0 {
            (self.hidden, self.channels)
        } else {
            (self.hidden, self.hidden)
        }
    }

    pub fn conv_dilation(&self, layer: usize) -> usize {
        self.dilations[layer / 2]
    }

    pub fn has_residual_projection(&self) -> bool {
        self.channels != self.hidden
    }

    /// Analytic parameter count.
    pub fn parameter_count(&self) -> usize {
        let d = self.embed_dim;
        let conv: usize = (0..self.conv_layers())
            .map(|l| {
                let (o, i) = self.conv_io(l);
                d * o * self.kernel * i
            })
            .sum();
        let residual = if self.has_residual_projection() {
            self.hidden * self.channels
        } else {
            0
        };
        self.nodes * d
            + conv
            + self.conv_layers()
            + residual
            + d * self.gcn_channels * self.hidden
            + self.gcn_channels
            + d * self.horizon * self.history
            + d * self.horizon
    }

    /// Fields that differ from `other`, ignoring the node count.
    pub fn differences_except_nodes(&self, other: &ModelConfig) -> Vec<&'static str> {
        let mut diff = Vec::new();
        macro_rules! cmp {
            ($($f:ident),*) => {$(
                if self.$f != other.$f {
                    diff.push(stringify!($f));
                }
            )*};
        }
        cmp!(
            history,
            horizon,
            channels,
            embed_dim,
            hidden,
            gcn_channels,
            kernel,
            dilations,
            clusters
        );
        diff
    }
}
