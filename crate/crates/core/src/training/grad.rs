use super::Batch;
use crate::error::{Error, Result};
use crate::model::backward::{backward_sample, fold, ExpandedGrads};
use crate::model::forward::forward_sample;
use crate::model::{Materialized, StgNetParams};
use crate::parallel;
use crate::tensor::Tensor;
use crate::transfer::{cluster_regularizer, regularizer_gradient, ClusterState};

/// Mean squared error over every entry.
pub fn prediction_loss(pred: &Tensor, truth: &Tensor) -> Result<f64> {
    if pred.shape() != truth.shape() {
        return Err(Error::Shape(format!(
            "prediction {:?} vs truth {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Shape("empty prediction".into()));
    }
    Ok(sum_sq_diff(pred.data(), truth.data()) / pred.len() as f64)
}

fn sum_sq_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The clustering term of the fine-tuning loss.
#[derive(Debug, Clone, Copy)]
pub struct Regularizer<'a> {
    pub state: &'a ClusterState,
    pub alpha: f64,
}

/// Loss value and its gradient with respect to every parameter tensor.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub loss: f64,
    pub prediction_loss: f64,
    pub regularizer: f64,
    pub grads: StgNetParams,
}

fn check_batch(params: &StgNetParams, batch: &Batch<'_>) -> Result<()> {
    let c = &params.config;
    let in_len = c.nodes * c.history * c.channels;
    let out_len = c.nodes * c.horizon * c.channels;
    if batch.is_empty() || batch.inputs.len() != batch.targets.len() {
        return Err(Error::Validation("batch is empty or ragged".into()));
    }
    if batch.inputs.iter().any(|x| x.len() != in_len)
        || batch.targets.iter().any(|y| y.len() != out_len)
    {
        return Err(Error::Shape(format!(
            "batch windows must hold {in_len} inputs and {out_len} targets"
        )));
    }
    Ok(())
}

fn non_finite(params: &StgNetParams, fallback: &str) -> Error {
    Error::NonFinite {
        tensor: params
            .first_non_finite()
            .unwrap_or_else(|| fallback.to_string()),
    }
}

fn regularizer_term(params: &StgNetParams, reg: Option<Regularizer<'_>>) -> Result<f64> {
    match reg {
        Some(r) if r.alpha != 0.0 => {
            if r.state.assignments.len() != params.config.nodes
                || r.state.dim() != params.config.embed_dim
            {
                return Err(Error::Shape(format!(
                    "cluster state covers {} nodes of dimension {}, model has {} x {}",
                    r.state.assignments.len(),
                    r.state.dim(),
                    params.config.nodes,
                    params.config.embed_dim
                )));
            }
            Ok(cluster_regularizer(&params.embedding, r.state))
        }
        _ => Ok(0.0),
    }
}

/// Mean-over-batch loss, `L_p + alpha * R`, forward only.
pub fn batch_loss(
    params: &StgNetParams,
    batch: &Batch<'_>,
    reg: Option<Regularizer<'_>>,
) -> Result<f64> {
    check_batch(params, batch)?;
    let mat = Materialized::new(params);
    let sq = parallel::map_indices(batch.len(), |k| {
        sum_sq_diff(
            &forward_sample(params, &mat, batch.inputs[k]).prediction,
            batch.targets[k],
        )
    });
    let per = batch.targets[0].len() as f64;
    let lp = sq.iter().sum::<f64>() / (per * batch.len() as f64);
    let r = regularizer_term(params, reg)?;
    let alpha = reg.map_or(0.0, |r| r.alpha);
    let loss = lp + alpha * r;
    if !loss.is_finite() {
        return Err(non_finite(params, "loss"));
    }
    Ok(loss)
}

/// Reverse-mode gradients of the mean-over-batch loss.
///
/// Per-sample gradients are reduced in batch order, so the result does not
/// depend on the worker count. Cluster centers are constants; with
/// `alpha == 0` the regularizer is skipped entirely.
pub fn compute_gradients(
    params: &StgNetParams,
    batch: &Batch<'_>,
    reg: Option<Regularizer<'_>>,
) -> Result<Gradients> {
    check_batch(params, batch)?;
    let mat = Materialized::new(params);
    let per = batch.targets[0].len();
    let scale = 2.0 / (per * batch.len()) as f64;
    let results: Vec<(f64, ExpandedGrads)> = parallel::map_indices(batch.len(), |k| {
        let cache = forward_sample(params, &mat, batch.inputs[k]);
        let target = batch.targets[k];
        let g_pred: Vec<f64> = cache
            .prediction
            .iter()
            .zip(target)
            .map(|(p, y)| scale * (p - y))
            .collect();
        let sq = sum_sq_diff(&cache.prediction, target);
        (
            sq,
            backward_sample(params, &mat, batch.inputs[k], &cache, &g_pred),
        )
    });
    let mut total = ExpandedGrads::zeros(params, &mat);
    let mut sq = 0.0;
    for (s, g) in &results {
        sq += s;
        total.add_assign(g);
    }
    let lp = sq / (per * batch.len()) as f64;
    if !lp.is_finite() {
        return Err(non_finite(params, "prediction"));
    }
    let mut grads = fold(params, &mat, &total);
    let r = regularizer_term(params, reg)?;
    let mut loss = lp;
    if let Some(rg) = reg.filter(|r| r.alpha != 0.0) {
        let mut ge = regularizer_gradient(&params.embedding, rg.state);
        ge.scale(rg.alpha);
        grads.embedding.0.add_assign(&ge);
        loss += rg.alpha * r;
    }
    if !loss.is_finite() {
        return Err(non_finite(params, "loss"));
    }
    if let Some(name) = grads.first_non_finite() {
        return Err(Error::NonFinite {
            tensor: format!("gradient of {name}"),
        });
    }
    Ok(Gradients {
        loss,
        prediction_loss: lp,
        regularizer: r,
        grads,
    })
}
