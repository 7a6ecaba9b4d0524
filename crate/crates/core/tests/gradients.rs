use nodetrans::model::NodeEmbedding;
use nodetrans::model::{ModelConfig, StgNetParams};
use nodetrans::tensor::Tensor;
use nodetrans::training::{
    compute_gradients, gradcheck_random, relative_error, Batch, RELATIVE_FLOOR,
};
use nodetrans::transfer::{cluster_regularizer, regularizer_gradient, ClusterState};

fn tiny() -> ModelConfig {
    ModelConfig {
        nodes: 5,
        history: 8,
        horizon: 3,
        channels: 1,
        gcn_channels: 1,
        embed_dim: 4,
        hidden: 6,
        kernel: 3,
        dilations: vec![1, 2],
        clusters: 2,
        alpha: 1.0,
        ..ModelConfig::default()
    }
}

#[test]
fn analytic_matches_finite_differences() {
    let report = gradcheck_random(&tiny(), 3, 240, 1e-5, 17).unwrap();
    let worst = report
        .entries
        .iter()
        .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
        .unwrap();
    assert!(report.entries.len() >= 200);
    assert!(
        report.passes(1e-4),
        "worst {worst:?}, skipped {}",
        report.skipped
    );
    assert_eq!(
        report.tensors_covered().len(),
        StgNetParams::zeros(&tiny()).named().len()
    );
}

#[test]
fn gradcheck_holds_across_seeds() {
    for seed in 0..16 {
        let report = gradcheck_random(&tiny(), 2, 240, 1e-5, seed).unwrap();
        assert!(
            report.passes(1e-4),
            "seed {seed}: {:.2e}",
            report.max_rel_error
        );
    }
}

#[test]
fn relative_error_is_absolute_below_the_floor() {
    assert_eq!(relative_error(2.0, 1.0), 1.0);
    assert!((relative_error(1e-9, 0.0) - 1e-9 / RELATIVE_FLOOR).abs() < 1e-18);
}

#[test]
fn no_residual_projection_variant() {
    // C == O gives an identity residual in the first block.
    let cfg = ModelConfig {
        hidden: 1,
        dilations: vec![1, 2, 4],
        ..tiny()
    };
    let report = gradcheck_random(&cfg, 2, 120, 1e-5, 3).unwrap();
    assert!(report.passes(1e-4), "max {}", report.max_rel_error);
}

#[test]
fn zero_error_gives_zero_prediction_gradient() {
    let cfg = tiny();
    let mut params = StgNetParams::zeros(&cfg);
    // Only the bias pool is non-zero, so the prediction is the per-node bias.
    for (k, v) in params
        .pools
        .predictor_bias_pool
        .data_mut()
        .iter_mut()
        .enumerate()
    {
        *v = 0.1 * k as f64;
    }
    let x = vec![0.3; cfg.nodes * cfg.history];
    let trace = nodetrans::model::stgnet_forward(
        &Tensor::from_vec(&[cfg.nodes, cfg.history, 1], x.clone()).unwrap(),
        &params,
    )
    .unwrap();
    let y = trace.prediction.data().to_vec();
    let batch = Batch {
        inputs: vec![&x],
        targets: vec![&y],
    };
    let g = compute_gradients(&params, &batch, None).unwrap();
    assert_eq!(g.loss, 0.0);
    for (name, t) in g.grads.named() {
        assert!(t.data().iter().all(|v| *v == 0.0), "{name}");
    }
}

#[test]
fn only_embedding_gradient_depends_on_node_count() {
    let a = StgNetParams::zeros(&tiny());
    let b = StgNetParams::zeros(&ModelConfig { nodes: 9, ..tiny() });
    for ((na, ta), (_, tb)) in a.named().into_iter().zip(b.named()) {
        if na == "embedding" {
            assert_ne!(ta.shape(), tb.shape());
        } else {
            assert_eq!(ta.shape(), tb.shape(), "{na}");
        }
    }
}

#[test]
fn regularizer_gradient_matches_finite_differences() {
    let e = NodeEmbedding(Tensor::from_vec(&[3, 2], vec![0.4, -0.3, 1.2, 0.8, -0.5, 0.1]).unwrap());
    let state = ClusterState {
        centers: Tensor::from_vec(&[2, 2], vec![0.0, 0.0, 1.0, 1.0]).unwrap(),
        assignments: vec![0, 1, 0],
        beta: 0.2,
    };
    let g = regularizer_gradient(&e, &state);
    let h = 1e-5;
    for k in 0..6 {
        let mut p = e.clone();
        p.0.data_mut()[k] += h;
        let up = cluster_regularizer(&p, &state);
        p.0.data_mut()[k] -= 2.0 * h;
        let down = cluster_regularizer(&p, &state);
        let fd = (up - down) / (2.0 * h);
        let rel = (g.data()[k] - fd).abs() / fd.abs().max(1e-8);
        assert!(rel <= 1e-6, "entry {k}: {} vs {fd}", g.data()[k]);
    }
}
