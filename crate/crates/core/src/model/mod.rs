//! The forecasting network.
//!
//! Pipeline: residual blocks of dilated causal convolutions, one adaptive
//! graph convolution, and a per-node linear predictor over the time axis.
//! Every per-node weight is a softmax-convex mixture of the rows of a shared
//! pool, indexed by that node's embedding row, so only the embedding grows
//! with the node count.

pub(crate) mod backward;
mod config;
pub(crate) mod forward;
mod layers;
mod params;

pub use config::ModelConfig;
pub use forward::{
    gcn_forward, mfdense_forward, predict, stgnet_forward, tcn_block, BlockWeights, ForwardTrace,
    Materialized,
};
pub use layers::{adaptive_adjacency, dilated_causal_conv, materialize_node_params, row_softmax};
pub use params::{init_bound, NodeEmbedding, StgNetParams, WeightPools, EMBEDDING_NAME};

/// Analytic parameter count for `config`.
pub fn parameter_count(config: &ModelConfig) -> usize {
    config.parameter_count()
}
