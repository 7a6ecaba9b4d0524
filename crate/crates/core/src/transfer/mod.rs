//! Pattern distillation and target-domain fine-tuning.
//!
//! The source embedding is clustered into `G` centers. A target model starts
//! from the source pools with a fresh embedding, and a regularizer pulls each
//! target node toward its nearest center while the centers follow the target
//! embedding by exponential moving average.

mod cluster;
mod finetune;
mod kmeans;

pub use cluster::{
    assign_clusters, cluster_regularizer, ema_update_centers, regularizer_gradient, ClusterState,
};
pub use finetune::{build_target_params, finetune};
pub use kmeans::{kmeans, KMeansFit, MAX_ITERATIONS, SUBSET_RESTARTS};
