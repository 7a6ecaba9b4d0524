//! Forward pass: adaptive TCN blocks, adaptive GCN, factorized predictor.
//!
//! All per-node parameters are materialized once per parameter state
//! ([`Materialized`]) and then shared by every sample in a batch.

use super::layers::{adjacency_from_gram, conv_forward, gram, mix_rows, row_softmax};
use super::{ModelConfig, NodeEmbedding, StgNetParams};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Per-node parameters derived from the embedding and the pools.
#[derive(Debug, Clone)]
pub struct Materialized {
    /// `row_softmax(E)`, `N x d`.
    pub weights: Tensor,
    /// Conv kernels per layer, each `N x (out * K * in)`.
    pub kernels: Vec<Tensor>,
    /// GCN weights, `N x (O * F)`.
    pub gcn_weights: Tensor,
    /// Predictor matrices, `N x (H * S)`.
    pub predictor: Tensor,
    /// Node-specific predictor bias, `N x H`.
    pub predictor_bias: Tensor,
    /// `E . E^T` before the ReLU.
    pub gram: Tensor,
    /// `row_softmax(ReLU(E . E^T))`.
    pub adjacency: Tensor,
}

impl Materialized {
    pub fn new(params: &StgNetParams) -> Self {
        let cfg = &params.config;
        let n = cfg.nodes;
        let weights = row_softmax(&params.embedding.0);
        let block = |pool: &Tensor| {
            let m = pool.row_len();
            Tensor::from_vec(&[n, m], mix_rows(&weights, pool)).expect("mixed block shape")
        };
        let kernels = params.pools.conv_pools.iter().map(block).collect();
        let gcn_weights = block(&params.pools.gcn_pool);
        let predictor = block(&params.pools.predictor_pool);
        let predictor_bias = block(&params.pools.predictor_bias_pool);
        let gram = gram(&params.embedding.0);
        let adjacency = adjacency_from_gram(&gram);
        Self {
            weights,
            kernels,
            gcn_weights,
            predictor,
            predictor_bias,
            gram,
            adjacency,
        }
    }
}

/// Intermediates of one residual block for one sample, all node-major.
#[derive(Debug, Clone)]
pub(crate) struct BlockCache {
    /// First conv pre-activation, `N x S x O`.
    pub u1: Vec<f64>,
    /// `ReLU(u1)`.
    pub h1: Vec<f64>,
    /// Pre-activation sum `residual + conv2`, `N x S x O`.
    pub v: Vec<f64>,
    /// Block output `ReLU(v)`.
    pub out: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct SampleCache {
    pub blocks: Vec<BlockCache>,
    /// `(I + A) Q` per time step, `N x S x O`.
    pub mixed: Vec<f64>,
    /// GCN output, `N x S x F`.
    pub z: Vec<f64>,
    /// Prediction, `N x H x C`.
    pub prediction: Vec<f64>,
}

impl SampleCache {
    pub fn q(&self) -> &[f64] {
        &self.blocks.last().expect("at least one block").out
    }
}

/// Residual block over all nodes. `x` is `N x S x c_in`; returns the cache
/// whose `out` is `N x S x O`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn block_forward(
    cfg: &ModelConfig,
    x: &[f64],
    c_in: usize,
    kernel1: &Tensor,
    bias1: f64,
    kernel2: &Tensor,
    bias2: f64,
    residual: Option<&Tensor>,
    dilation: usize,
) -> BlockCache {
    let (n, s, o, k) = (cfg.nodes, cfg.history, cfg.hidden, cfg.kernel);
    let mut u1 = vec![0.0; n * s * o];
    let mut u2 = vec![0.0; n * s * o];
    for i in 0..n {
        conv_forward(
            &x[i * s * c_in..(i + 1) * s * c_in],
            s,
            c_in,
            kernel1.row(i),
            o,
            k,
            dilation,
            bias1,
            &mut u1[i * s * o..(i + 1) * s * o],
        );
    }
    let h1: Vec<f64> = u1.iter().map(|v| v.max(0.0)).collect();
    for i in 0..n {
        conv_forward(
            &h1[i * s * o..(i + 1) * s * o],
            s,
            o,
            kernel2.row(i),
            o,
            k,
            dilation,
            bias2,
            &mut u2[i * s * o..(i + 1) * s * o],
        );
    }
    let mut v = u2;
    match residual {
        Some(w) => {
            for row in 0..n * s {
                let xin = &x[row * c_in..(row + 1) * c_in];
                for oc in 0..o {
                    let proj: f64 = w.row(oc).iter().zip(xin).map(|(a, b)| a * b).sum();
                    v[row * o + oc] += proj;
                }
            }
        }
        None => {
            for (a, b) in v.iter_mut().zip(x) {
                *a += b;
            }
        }
    }
    let out = v.iter().map(|a| a.max(0.0)).collect();
    BlockCache { u1, h1, v, out }
}

/// `(I + A) Q` then each destination node's own `W_i`, plus the shared bias.
/// Returns `(mixed, z)`.
pub(crate) fn gcn_apply(
    n: usize,
    s: usize,
    o: usize,
    f: usize,
    q: &[f64],
    adjacency: &Tensor,
    weights: &Tensor,
    bias: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let span = s * o;
    let mut mixed = q.to_vec();
    for i in 0..n {
        let arow = adjacency.row(i);
        let dst = i * span;
        for (j, a) in arow.iter().enumerate() {
            let src = &q[j * span..(j + 1) * span];
            for (m, qv) in mixed[dst..dst + span].iter_mut().zip(src) {
                *m += a * qv;
            }
        }
    }
    let mut z = vec![0.0; n * s * f];
    for i in 0..n {
        let w = weights.row(i);
        for t in 0..s {
            let m = &mixed[(i * s + t) * o..(i * s + t + 1) * o];
            for fc in 0..f {
                let mut acc = bias[fc];
                for oc in 0..o {
                    acc += m[oc] * w[oc * f + fc];
                }
                z[(i * s + t) * f + fc] = acc;
            }
        }
    }
    (mixed, z)
}

/// `X_hat[i, :, k] = V_i . Z[i, :, k] + c_i`.
pub(crate) fn predictor_apply(
    n: usize,
    s: usize,
    h: usize,
    c: usize,
    z: &[f64],
    predictor: &Tensor,
    bias: &Tensor,
) -> Vec<f64> {
    let mut out = vec![0.0; n * h * c];
    for i in 0..n {
        let v = predictor.row(i);
        let cb = bias.row(i);
        for hh in 0..h {
            for k in 0..c {
                let mut acc = cb[hh];
                for t in 0..s {
                    acc += v[hh * s + t] * z[(i * s + t) * c + k];
                }
                out[(i * h + hh) * c + k] = acc;
            }
        }
    }
    out
}

pub(crate) fn forward_sample(params: &StgNetParams, mat: &Materialized, x: &[f64]) -> SampleCache {
    let cfg = &params.config;
    let pools = &params.pools;
    let mut blocks: Vec<BlockCache> = Vec::with_capacity(cfg.dilations.len());
    for (b, &dilation) in cfg.dilations.iter().enumerate() {
        let (input, c_in) = match blocks.last() {
            Some(prev) => (prev.out.as_slice(), cfg.hidden),
            None => (x, cfg.channels),
        };
        let residual = if b == 0 {
            pools.residual.as_ref()
        } else {
            None
        };
        let cache = block_forward(
            cfg,
            input,
            c_in,
            &mat.kernels[2 * b],
            pools.conv_bias.data()[2 * b],
            &mat.kernels[2 * b + 1],
            pools.conv_bias.data()[2 * b + 1],
            residual,
            dilation,
        );
        blocks.push(cache);
    }
    let q = &blocks.last().expect("at least one block").out;
    let (mixed, z) = gcn_apply(
        cfg.nodes,
        cfg.history,
        cfg.hidden,
        cfg.gcn_channels,
        q,
        &mat.adjacency,
        &mat.gcn_weights,
        pools.gcn_bias.data(),
    );
    let prediction = predictor_apply(
        cfg.nodes,
        cfg.history,
        cfg.horizon,
        cfg.channels,
        &z,
        &mat.predictor,
        &mat.predictor_bias,
    );
    SampleCache {
        blocks,
        mixed,
        z,
        prediction,
    }
}

/// Prediction only, `N x H x C`, for a node-major input `N x S x C`.
pub fn predict(params: &StgNetParams, mat: &Materialized, x: &[f64]) -> Vec<f64> {
    forward_sample(params, mat, x).prediction
}

/// Every intermediate of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// TCN output `Q`, `N x S x O`.
    pub tcn_output: Tensor,
    /// GCN output `Z`, `N x S x F`.
    pub gcn_output: Tensor,
    /// Prediction `X_hat`, `N x H x C`.
    pub prediction: Tensor,
    /// Learned adjacency, `N x N`.
    pub adjacency: Tensor,
}

fn expect_shape(t: &Tensor, shape: &[usize], what: &str) -> Result<()> {
    if t.shape() != shape {
        return Err(Error::Shape(format!(
            "{what} has shape {:?}, expected {shape:?}",
            t.shape()
        )));
    }
    Ok(())
}

/// Full forward pass on one node-major input `N x S x C`.
pub fn stgnet_forward(x: &Tensor, params: &StgNetParams) -> Result<ForwardTrace> {
    let cfg = &params.config;
    expect_shape(x, &[cfg.nodes, cfg.history, cfg.channels], "input")?;
    let mat = Materialized::new(params);
    let cache = forward_sample(params, &mat, x.data());
    Ok(ForwardTrace {
        tcn_output: Tensor::from_vec(&[cfg.nodes, cfg.history, cfg.hidden], cache.q().to_vec())?,
        gcn_output: Tensor::from_vec(&[cfg.nodes, cfg.history, cfg.gcn_channels], cache.z)?,
        prediction: Tensor::from_vec(&[cfg.nodes, cfg.horizon, cfg.channels], cache.prediction)?,
        adjacency: mat.adjacency,
    })
}

/// Block weights for [`tcn_block`], with kernels already materialized per node
/// (`N x out x K x in`).
#[derive(Debug, Clone, Copy)]
pub struct BlockWeights<'a> {
    pub kernel1: &'a Tensor,
    pub bias1: f64,
    pub kernel2: &'a Tensor,
    pub bias2: f64,
    /// Shared `O x c_in` projection; `None` means identity (`c_in == O`).
    pub residual: Option<&'a Tensor>,
    pub dilation: usize,
}

/// One residual block on `x` (`N x S x c_in`), returning `N x S x O`.
pub fn tcn_block(x: &Tensor, weights: BlockWeights<'_>) -> Result<Tensor> {
    let (n, s, c_in) = match x.shape() {
        [n, s, c] => (*n, *s, *c),
        other => {
            return Err(Error::Shape(format!(
                "block input must be N x S x C, got {other:?}"
            )))
        }
    };
    let (o, k) = match weights.kernel1.shape() {
        [kn, o, k, ci] if *kn == n && *ci == c_in => (*o, *k),
        other => {
            return Err(Error::Shape(format!(
                "first kernel {other:?} does not fit {n} nodes with {c_in} channels"
            )))
        }
    };
    expect_shape(weights.kernel2, &[n, o, k, o], "second kernel")?;
    match weights.residual {
        Some(r) => expect_shape(r, &[o, c_in], "residual projection")?,
        None if c_in != o => {
            return Err(Error::Shape(format!(
                "identity residual needs c_in == O, got {c_in} vs {o}"
            )))
        }
        None => {}
    }
    let cfg = ModelConfig {
        nodes: n,
        history: s,
        channels: c_in,
        hidden: o,
        kernel: k,
        ..ModelConfig::default()
    };
    let flat = |t: &Tensor| {
        t.clone()
            .reshape(&[n, t.len() / n])
            .expect("flatten kernel")
    };
    let cache = block_forward(
        &cfg,
        x.data(),
        c_in,
        &flat(weights.kernel1),
        weights.bias1,
        &flat(weights.kernel2),
        weights.bias2,
        weights.residual,
        weights.dilation,
    );
    Tensor::from_vec(&[n, s, o], cache.out)
}

/// Adaptive graph convolution on `q` (`N x S x O`) with spatial pool
/// `d x (O * F)` and bias `F`; returns `N x S x F`.
pub fn gcn_forward(
    q: &Tensor,
    embedding: &NodeEmbedding,
    pool: &Tensor,
    bias: &Tensor,
) -> Result<Tensor> {
    let (n, s, o) = match q.shape() {
        [n, s, o] if *n == embedding.nodes() => (*n, *s, *o),
        other => {
            return Err(Error::Shape(format!(
                "GCN input {other:?} does not match {} nodes",
                embedding.nodes()
            )))
        }
    };
    let f = bias.len();
    let weights = super::materialize_node_params(embedding, pool, &[o, f])?;
    let weights = weights.reshape(&[n, o * f])?;
    let adjacency = super::adaptive_adjacency(embedding);
    let (_, z) = gcn_apply(n, s, o, f, q.data(), &adjacency, &weights, bias.data());
    Tensor::from_vec(&[n, s, f], z)
}

/// Factorized per-node predictor on `z` (`N x S x C`) with pools
/// `d x (H * S)` and `d x H`; returns `N x H x C`.
pub fn mfdense_forward(
    z: &Tensor,
    embedding: &NodeEmbedding,
    pool: &Tensor,
    bias_pool: &Tensor,
) -> Result<Tensor> {
    let (n, s, c) = match z.shape() {
        [n, s, c] if *n == embedding.nodes() => (*n, *s, *c),
        other => {
            return Err(Error::Shape(format!(
                "predictor input {other:?} does not match {} nodes",
                embedding.nodes()
            )))
        }
    };
    let h = bias_pool.row_len();
    let v = super::materialize_node_params(embedding, pool, &[h, s])?.reshape(&[n, h * s])?;
    let cb = super::materialize_node_params(embedding, bias_pool, &[h])?;
    Tensor::from_vec(&[n, h, c], predictor_apply(n, s, h, c, z.data(), &v, &cb))
}
