mod common;

use common::{short_schedule, small_model};
use nodetrans::data::{generate_synthetic, split_source, SyntheticSpec};
use nodetrans::harness::{cluster_report, run, DatasetRef, ExperimentConfig, Mode};
use nodetrans::model::ModelConfig;
use nodetrans::training::{pretrain, train_from_scratch, TrainConfig};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn two_patterns_are_recovered_from_the_source_embedding() {
    let model = ModelConfig {
        clusters: 2,
        ..small_model()
    };
    let schedule = TrainConfig {
        batch_size: 32,
        ..short_schedule(20)
    };
    let aris: Vec<f64> = (0..5)
        .map(|seed| {
            let mut spec = SyntheticSpec::with_family(12, 2, 8, 60);
            spec.noise_ar = 0.5;
            let synth = generate_synthetic(&spec, 40 + seed).unwrap();
            let splits = split_source(synth.dataset.len(), (0.7, 0.1, 0.2)).unwrap();
            let (ckpt, _) = pretrain(&model, &schedule, &synth.dataset, &splits, seed).unwrap();
            let report =
                cluster_report(&ckpt, &synth.dataset, splits.train, Some(&synth.labels)).unwrap();
            assert_eq!(report.sizes.iter().sum::<usize>(), 12);
            report.adjusted_rand_index.unwrap()
        })
        .collect();
    assert!(median(aris.clone()) >= 0.9, "{aris:?}");
}

#[test]
fn cluster_report_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec::with_family(8, 2, 6, 60);
    let base = ExperimentConfig {
        model: small_model(),
        pretrain: short_schedule(3),
        source: Some(DatasetRef::Synthetic {
            synthetic: spec,
            seed: Some(1),
        }),
        ..ExperimentConfig::default()
    };
    run(&ExperimentConfig {
        mode: Mode::Pretrain,
        output_dir: dir.path().join("pre"),
        ..base.clone()
    })
    .unwrap();
    let report = |name: &str| {
        let out = dir.path().join(name);
        run(&ExperimentConfig {
            mode: Mode::ClusterReport,
            checkpoint: Some(dir.path().join("pre/seed_0/checkpoint")),
            output_dir: out.clone(),
            ..base.clone()
        })
        .unwrap();
        [
            "cluster_assignments.csv",
            "cluster_sizes.csv",
            "cluster_profiles.csv",
            "cluster_report.json",
        ]
        .map(|f| std::fs::read(out.join(f)).unwrap())
    };
    let (a, b) = (report("r1"), report("r2"));
    assert_eq!(a, b);
    let sizes = String::from_utf8(a[1].clone()).unwrap();
    let total: usize = sizes
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(total, 8);
    let profiles = String::from_utf8(a[2].clone()).unwrap();
    assert_eq!(
        profiles.lines().count() - 1,
        24 * sizes.lines().skip(1).filter(|l| !l.ends_with(",0")).count()
    );
}

#[test]
fn reports_need_cluster_state() {
    let ds = common::synthetic(6, 2, 4, 3);
    let splits = nodetrans::data::split_target(&ds, 1, 1, 0.25).unwrap();
    let (ckpt, _) =
        train_from_scratch(&small_model(), &short_schedule(2), &ds, &splits, 0).unwrap();
    assert!(cluster_report(&ckpt, &ds, splits.train, None).is_err());
}

#[test]
fn finished_output_directories_are_not_reused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        mode: Mode::Synth,
        source: Some(DatasetRef::Synthetic {
            synthetic: SyntheticSpec::with_family(4, 2, 1, 60),
            seed: None,
        }),
        output_dir: dir.path().to_path_buf(),
        ..ExperimentConfig::default()
    };
    run(&cfg).unwrap();
    assert!(run(&cfg).is_err());
}
