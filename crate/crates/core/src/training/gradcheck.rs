//! Central finite-difference check of [`compute_gradients`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::{batch_loss, compute_gradients, Batch, Regularizer};
use crate::error::Result;
use crate::model::forward::forward_sample;
use crate::model::{Materialized, ModelConfig, StgNetParams};
use crate::tensor::Tensor;
use crate::transfer::{assign_clusters, ClusterState};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckedEntry {
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub entries: Vec<CheckedEntry>,
    /// Draws rejected because the perturbation crossed a ReLU kink.
    pub skipped: usize,
    pub max_rel_error: f64,
}

impl GradcheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        !self.entries.is_empty() && self.max_rel_error <= tolerance
    }

    pub fn tensors_covered(&self) -> Vec<String> {
        let mut names: Vec<String> = self.entries.iter().map(|e| e.tensor.clone()).collect();
        names.dedup();
        names
    }
}

/// Below this magnitude a central difference with `h = 1e-5` is dominated by
/// rounding in the two loss values, so the error is measured absolutely.
pub const RELATIVE_FLOOR: f64 = 1e-6;

/// `|a - n| / max(RELATIVE_FLOOR, |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(RELATIVE_FLOOR)
}

/// Signs of every ReLU input on the batch. Two parameter states with the same
/// signature lie on the same smooth piece of the loss.
fn relu_signature(params: &StgNetParams, batch: &Batch<'_>) -> Vec<bool> {
    let mat = Materialized::new(params);
    let mut sig: Vec<bool> = mat.gram.data().iter().map(|v| *v > 0.0).collect();
    for x in &batch.inputs {
        let cache = forward_sample(params, &mat, x);
        for b in &cache.blocks {
            sig.extend(b.u1.iter().map(|v| *v > 0.0));
            sig.extend(b.v.iter().map(|v| *v > 0.0));
        }
    }
    sig
}

fn set(params: &mut StgNetParams, tensor: usize, index: usize, value: f64) {
    params.tensors_mut()[tensor].data_mut()[index] = value;
}

/// Checks `count` scalar parameters, cycling through every tensor so each is
/// covered, against `(L(p + h) - L(p - h)) / 2h`. Draws whose perturbation
/// flips any ReLU are replaced by fresh draws.
pub fn gradcheck(
    params: &StgNetParams,
    batch: &Batch<'_>,
    reg: Option<Regularizer<'_>>,
    count: usize,
    h: f64,
    seed: u64,
) -> Result<GradcheckReport> {
    let analytic = compute_gradients(params, batch, reg)?.grads;
    let names: Vec<String> = params.named().into_iter().map(|(n, _)| n).collect();
    let lens: Vec<usize> = params.named().iter().map(|(_, t)| t.len()).collect();
    let base_sig = relu_signature(params, batch);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work = params.clone();
    let mut entries = Vec::with_capacity(count);
    let mut skipped = 0;
    let mut t = 0;
    let max_draws = 50 * count.max(1);
    let mut draws = 0;
    while entries.len() < count && draws < max_draws {
        draws += 1;
        let idx = rng.random_range(0..lens[t]);
        let orig = params.named()[t].1.data()[idx];
        set(&mut work, t, idx, orig + h);
        let plus_sig = relu_signature(&work, batch);
        let lp = batch_loss(&work, batch, reg)?;
        set(&mut work, t, idx, orig - h);
        let minus_sig = relu_signature(&work, batch);
        let lm = batch_loss(&work, batch, reg)?;
        set(&mut work, t, idx, orig);
        if plus_sig != base_sig || minus_sig != base_sig {
            skipped += 1;
            continue;
        }
        let numeric = (lp - lm) / (2.0 * h);
        let a = analytic.named()[t].1.data()[idx];
        entries.push(CheckedEntry {
            tensor: names[t].clone(),
            index: idx,
            analytic: a,
            numeric,
            rel_error: relative_error(a, numeric),
        });
        t = (t + 1) % names.len();
    }
    let max_rel_error = entries.iter().map(|e| e.rel_error).fold(0.0, f64::max);
    entries.sort_by(|a, b| a.tensor.cmp(&b.tensor).then(a.index.cmp(&b.index)));
    Ok(GradcheckReport {
        entries,
        skipped,
        max_rel_error,
    })
}

/// Random parameters, inputs, targets and cluster centers for `config`, then
/// [`gradcheck`] with the regularizer weighted by `config.alpha`.
pub fn gradcheck_random(
    config: &ModelConfig,
    batch_size: usize,
    count: usize,
    h: f64,
    seed: u64,
) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = StgNetParams::init(config, &mut rng)?;
    // Non-zero biases so that every tensor carries gradient signal.
    for v in params.pools.predictor_bias_pool.data_mut() {
        *v = rng.random_range(-0.5..0.5);
    }
    for v in params.pools.conv_bias.data_mut() {
        *v = rng.random_range(-0.1..0.1);
    }
    for v in params.pools.gcn_bias.data_mut() {
        *v = rng.random_range(-0.1..0.1);
    }
    let mut normal =
        |len: usize| -> Vec<f64> { (0..len).map(|_| StandardNormal.sample(&mut rng)).collect() };
    let in_len = config.nodes * config.history * config.channels;
    let out_len = config.nodes * config.horizon * config.channels;
    let inputs: Vec<Vec<f64>> = (0..batch_size).map(|_| normal(in_len)).collect();
    let targets: Vec<Vec<f64>> = (0..batch_size).map(|_| normal(out_len)).collect();
    let centers = Tensor::from_vec(
        &[config.clusters, config.embed_dim],
        normal(config.clusters * config.embed_dim)
            .iter()
            .map(|v| 0.3 * v)
            .collect(),
    )?;
    let state = ClusterState {
        assignments: assign_clusters(&params.embedding, &centers)?,
        centers,
        beta: config.beta,
    };
    let batch = Batch {
        inputs: inputs.iter().map(Vec::as_slice).collect(),
        targets: targets.iter().map(Vec::as_slice).collect(),
    };
    let reg = Regularizer {
        state: &state,
        alpha: config.alpha,
    };
    gradcheck(&params, &batch, Some(reg), count, h, seed.wrapping_add(1))
}
