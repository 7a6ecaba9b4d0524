#![allow(dead_code)]

use nodetrans::data::{
    generate_synthetic, split_source, RoadNetworkDataset, SplitRanges, SyntheticSpec,
};
use nodetrans::model::ModelConfig;
use nodetrans::training::{pretrain, Checkpoint, TrainConfig};

pub fn small_model() -> ModelConfig {
    ModelConfig {
        history: 6,
        horizon: 2,
        hidden: 4,
        embed_dim: 4,
        clusters: 2,
        ..ModelConfig::default()
    }
}

pub fn short_schedule(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 16,
        decay_every: epochs.max(1),
        ..TrainConfig::pretrain()
    }
}

pub fn synthetic(nodes: usize, patterns: usize, days: usize, seed: u64) -> RoadNetworkDataset {
    generate_synthetic(&SyntheticSpec::with_family(nodes, patterns, days, 60), seed)
        .unwrap()
        .dataset
}

pub fn small_source(seed: u64) -> (RoadNetworkDataset, SplitRanges, Checkpoint) {
    let ds = synthetic(8, 2, 6, 100 + seed);
    let splits = split_source(ds.len(), (0.7, 0.1, 0.2)).unwrap();
    let (ckpt, _) = pretrain(&small_model(), &short_schedule(4), &ds, &splits, seed).unwrap();
    (ds, splits, ckpt)
}
