mod common;

use common::{short_schedule, small_model, small_source, synthetic};
use nodetrans::data::split_target;
use nodetrans::model::{ModelConfig, StgNetParams};
use nodetrans::training::{compute_gradients, Batch, Checkpoint, Regularizer};
use nodetrans::transfer::{build_target_params, finetune};
use nodetrans::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn target_params_copy_pools_and_centers() {
    let (_, _, source) = small_source(1);
    let target = ModelConfig {
        nodes: 5,
        ..source.config.clone()
    };
    let (params, state) = build_target_params(&source, &target, 9).unwrap();
    assert_eq!(params.pools, source.pools);
    assert_eq!(params.embedding.0.shape(), &[5, target.embed_dim]);
    assert_eq!(state.centers, source.cluster.as_ref().unwrap().centers);
    let (again, _) = build_target_params(&source, &target, 9).unwrap();
    assert_eq!(again.embedding, params.embedding);

    let wider = ModelConfig {
        hidden: 7,
        kernel: 2,
        ..target
    };
    let msg = build_target_params(&source, &wider, 9)
        .unwrap_err()
        .to_string();
    assert!(msg.contains("hidden") && msg.contains("kernel"), "{msg}");
}

#[test]
fn zero_alpha_matches_the_unregularized_gradient() {
    let (_, _, source) = small_source(2);
    let cfg = ModelConfig {
        nodes: 5,
        ..source.config.clone()
    };
    let (params, state) = build_target_params(&source, &cfg, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut sample = |len: usize| {
        (0..len)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect::<Vec<f64>>()
    };
    let xs: Vec<Vec<f64>> = (0..3).map(|_| sample(5 * cfg.history)).collect();
    let ys: Vec<Vec<f64>> = (0..3).map(|_| sample(5 * cfg.horizon)).collect();
    let batch = Batch {
        inputs: xs.iter().map(Vec::as_slice).collect(),
        targets: ys.iter().map(Vec::as_slice).collect(),
    };
    let plain = compute_gradients(&params, &batch, None).unwrap();
    let off = compute_gradients(
        &params,
        &batch,
        Some(Regularizer {
            state: &state,
            alpha: 0.0,
        }),
    )
    .unwrap();
    let on = compute_gradients(
        &params,
        &batch,
        Some(Regularizer {
            state: &state,
            alpha: 1.0,
        }),
    )
    .unwrap();
    let bits = |p: &StgNetParams| -> Vec<u64> {
        p.named()
            .iter()
            .flat_map(|(_, t)| t.data().iter().map(|v| v.to_bits()))
            .collect()
    };
    assert_eq!(bits(&plain.grads), bits(&off.grads));
    assert_eq!(plain.loss.to_bits(), off.loss.to_bits());
    assert_ne!(bits(&plain.grads), bits(&on.grads));
    assert_eq!(plain.grads.pools, on.grads.pools);
}

#[test]
fn finetuning_never_reads_the_source_embedding() {
    let (_, _, source) = small_source(3);
    let dir = tempfile::tempdir().unwrap();
    let files = source.save(dir.path()).unwrap();
    let embedding = files
        .iter()
        .find(|p| p.file_stem().is_some_and(|s| s == "embedding"))
        .unwrap();
    std::fs::remove_file(embedding).unwrap();
    let stripped = Checkpoint::load(dir.path()).unwrap();
    assert!(stripped.embedding.is_none());

    let target = synthetic(6, 2, 4, 77);
    let splits = split_target(&target, 1, 1, 0.25).unwrap();
    let model = ModelConfig {
        alpha: 1.0,
        ..small_model()
    };
    let schedule = short_schedule(3);
    let (a, ra) = finetune(&target, &splits, &source, &model, &schedule, 5).unwrap();
    let (b, rb) = finetune(&target, &splits, &stripped, &model, &schedule, 5).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    assert_eq!(a.embedding.as_ref().unwrap().nodes(), 6);
    assert!(matches!(stripped.params(), Err(Error::Checkpoint(_))));
}

#[test]
fn finetuned_clusters_stay_consistent() {
    let (_, _, source) = small_source(4);
    let target = synthetic(6, 2, 4, 78);
    let splits = split_target(&target, 1, 1, 0.25).unwrap();
    let (ckpt, report) = finetune(
        &target,
        &splits,
        &source,
        &small_model(),
        &short_schedule(3),
        1,
    )
    .unwrap();
    let state = ckpt.cluster.unwrap();
    state.validate().unwrap();
    assert_eq!(state.assignments.len(), 6);
    assert_eq!(state.sizes().iter().sum::<usize>(), 6);
    assert_eq!(ckpt.provenance.domain, "target");
    assert!(report.steps > 0);
}
