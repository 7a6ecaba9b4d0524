mod common;

use common::{small_model, small_source};
use nodetrans::data::{generate_synthetic, split_source, SyntheticSpec};
use nodetrans::eval::{evaluate_checkpoint, historical_average_baseline};
use nodetrans::model::{predict, Materialized};
use nodetrans::tensor::Tensor;
use nodetrans::training::{prediction_loss, pretrain, Checkpoint, TrainConfig};
use nodetrans::Error;
use proptest::prelude::*;

proptest! {
    #[test]
    fn loss_is_zero_only_at_the_truth(
        (p, y) in (1usize..20).prop_flat_map(|n| (
            prop::collection::vec(-100.0f64..100.0, n),
            prop::collection::vec(-100.0f64..100.0, n),
        ))
    ) {
        let t = |v: &Vec<f64>| Tensor::from_vec(&[v.len()], v.clone()).unwrap();
        let loss = prediction_loss(&t(&p), &t(&y)).unwrap();
        prop_assert!(loss >= 0.0);
        prop_assert_eq!(loss == 0.0, p == y);
        prop_assert_eq!(prediction_loss(&t(&y), &t(&y)).unwrap(), 0.0);
    }
}

#[test]
fn checkpoint_round_trip_predicts_bit_identically() {
    let (ds, splits, ckpt) = small_source(1);
    let dir = tempfile::tempdir().unwrap();
    ckpt.save(dir.path()).unwrap();
    let back = Checkpoint::load(dir.path()).unwrap();
    assert_eq!(back, ckpt);
    let (a, b) = (ckpt.params().unwrap(), back.params().unwrap());
    let (ma, mb) = (Materialized::new(&a), Materialized::new(&b));
    let x: Vec<f64> = (0..a.config.nodes * a.config.history)
        .map(|k| (k as f64).cos())
        .collect();
    let (pa, pb) = (predict(&a, &ma, &x), predict(&b, &mb, &x));
    assert!(pa.iter().zip(&pb).all(|(u, v)| u.to_bits() == v.to_bits()));
    assert_eq!(
        evaluate_checkpoint(&ckpt, &ds, splits.test.clone()).unwrap(),
        evaluate_checkpoint(&back, &ds, splits.test).unwrap()
    );
}

#[test]
fn tampered_tensor_fails_the_hash_check() {
    let (_, _, ckpt) = small_source(2);
    let dir = tempfile::tempdir().unwrap();
    let files = ckpt.save(dir.path()).unwrap();
    let bin = files
        .iter()
        .find(|p| p.extension().is_some_and(|e| e == "bin"))
        .unwrap();
    let mut bytes = std::fs::read(bin).unwrap();
    bytes[0] ^= 1;
    std::fs::write(bin, bytes).unwrap();
    assert!(matches!(
        Checkpoint::load(dir.path()),
        Err(Error::Checkpoint(_))
    ));
}

#[test]
fn other_node_counts_get_only_the_transferable_set() {
    let (_, _, ckpt) = small_source(3);
    let set = ckpt.transferable_for(13);
    assert_eq!(set.config.nodes, 13);
    assert_eq!(set.pools, ckpt.pools);
    assert_eq!(
        set.cluster.unwrap().centers,
        ckpt.cluster.as_ref().unwrap().centers
    );
    assert!(ckpt.node_bound_for(8).is_ok());
    assert!(matches!(ckpt.node_bound_for(13), Err(Error::Checkpoint(_))));
}

#[test]
fn pretraining_learns_and_beats_the_baseline() {
    // Persistent noise and day-to-day gain changes make recent history
    // informative beyond the time-of-day mean.
    let mut spec = SyntheticSpec::with_family(10, 2, 20, 60);
    spec.noise_ar = 0.9;
    spec.day_jitter = 0.1;
    let ds = generate_synthetic(&spec, 5).unwrap().dataset;
    let splits = split_source(ds.len(), (0.7, 0.1, 0.2)).unwrap();
    let schedule = TrainConfig {
        batch_size: 16,
        epochs: 40,
        decay_every: 20,
        ..TrainConfig::pretrain()
    };
    let (ckpt, report) = pretrain(&small_model(), &schedule, &ds, &splits, 0).unwrap();
    let first = &report.epochs[0];
    let best = report.best().unwrap();
    assert!(report.epochs.last().unwrap().train_loss < first.train_loss);
    assert!(best.val_rmse < first.val_rmse);
    let model = evaluate_checkpoint(&ckpt, &ds, splits.test.clone()).unwrap();
    let cfg = &ckpt.config;
    let ha = historical_average_baseline(&ds, splits.train, splits.test, cfg.history, cfg.horizon)
        .unwrap();
    assert!(
        model.rmse < ha.rmse,
        "model {} vs historical average {}",
        model.rmse,
        ha.rmse
    );
    assert_eq!(ckpt.provenance.epoch, report.best_epoch);
    assert!(report.epochs.iter().all(|e| e.seconds.is_none()));
}
