use crate::data::{RoadNetworkDataset, SplitRanges};
use crate::error::{Error, Result};
use crate::model::{init_bound, ModelConfig, NodeEmbedding, StgNetParams};
use crate::rng::SeedStream;
use crate::training::{
    bind_config, fit, prepare, Checkpoint, Provenance, TrainConfig, TrainReport,
};

use super::{assign_clusters, ClusterState};

/// Target-domain parameters: pools copied from the source, a fresh seeded
/// embedding for `target.nodes` nodes, and the source cluster centers with
/// assignments recomputed against the new embedding.
pub fn build_target_params(
    source: &Checkpoint,
    target: &ModelConfig,
    seed: u64,
) -> Result<(StgNetParams, ClusterState)> {
    let diff = source.config.differences_except_nodes(target);
    if !diff.is_empty() {
        return Err(Error::Config(format!(
            "target config differs from the source beyond the node count: {}",
            diff.join(", ")
        )));
    }
    let set = source.transferable_for(target.nodes);
    let source_cluster = set
        .cluster
        .ok_or_else(|| Error::Checkpoint("source checkpoint carries no cluster state".into()))?;
    let mut rng = SeedStream::new(seed).fork("init");
    let embedding =
        NodeEmbedding::init(target.nodes, target.embed_dim, init_bound(target), &mut rng);
    let params = StgNetParams::from_parts(set.config, embedding, set.pools)?;
    let state = ClusterState {
        assignments: assign_clusters(&params.embedding, &source_cluster.centers)?,
        centers: source_cluster.centers,
        beta: target.beta,
    };
    Ok((params, state))
}

/// Fine-tunes transferred parameters on a target domain with the loss
/// `L_p + alpha * R`. `alpha = 0` switches the regularizer off while keeping
/// everything else (including the center bookkeeping) unchanged.
pub fn finetune(
    dataset: &RoadNetworkDataset,
    splits: &SplitRanges,
    source: &Checkpoint,
    config: &ModelConfig,
    train_cfg: &TrainConfig,
    seed: u64,
) -> Result<(Checkpoint, TrainReport)> {
    let cfg = bind_config(config, dataset)?;
    let (params, state) = build_target_params(source, &cfg, seed)?;
    let (normalizer, train, val) = prepare(&cfg, dataset, splits)?;
    let out = fit(
        params,
        Some(state),
        cfg.alpha,
        &train,
        &val,
        &normalizer,
        train_cfg,
        SeedStream::new(seed),
    )?;
    let provenance = Provenance {
        seed,
        epoch: out.report.best_epoch,
        domain: "target".into(),
        data_fingerprint: dataset.fingerprint(),
    };
    Ok((
        Checkpoint::from_params(&out.params, out.cluster, normalizer, provenance),
        out.report,
    ))
}
