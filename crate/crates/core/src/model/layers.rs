//! Primitive operations of the network, each with a tensor-level entry point
//! and a slice-level kernel shared with the training path.

use super::NodeEmbedding;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Softmax of every row, max-subtracted.
pub fn row_softmax(m: &Tensor) -> Tensor {
    let mut out = m.clone();
    let width = m.row_len();
    if width == 0 {
        return out;
    }
    for row in out.data_mut().chunks_mut(width) {
        softmax_in_place(row);
    }
    out
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Vector-Jacobian product of a softmax row: given the softmax output `p` and
/// the upstream gradient `g`, returns `p * (g - <p, g>)`.
pub(crate) fn softmax_backward(p: &[f64], g: &[f64], out: &mut [f64]) {
    let dot: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
    for ((o, pi), gi) in out.iter_mut().zip(p).zip(g) {
        *o += pi * (gi - dot);
    }
}

/// `weights (N x d) . pool (d x m)`, giving one `m`-long block per node.
pub(crate) fn mix_rows(weights: &Tensor, pool: &Tensor) -> Vec<f64> {
    let n = weights.rows();
    let d = weights.row_len();
    let m = pool.row_len();
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let w = weights.row(i);
        let block = &mut out[i * m..(i + 1) * m];
        for (j, wj) in w.iter().enumerate().take(d) {
            for (o, p) in block.iter_mut().zip(pool.row(j)) {
                *o += wj * p;
            }
        }
    }
    out
}

/// Node-specific parameters `reshape(row_softmax(E) . pool)`, shaped
/// `N x target_shape`.
pub fn materialize_node_params(
    embedding: &NodeEmbedding,
    pool: &Tensor,
    target_shape: &[usize],
) -> Result<Tensor> {
    let want: usize = target_shape.iter().product();
    if pool.shape().len() != 2 || pool.rows() != embedding.dim() || pool.row_len() != want {
        return Err(Error::Shape(format!(
            "pool {:?} cannot produce blocks of shape {target_shape:?} from a {}-dim embedding",
            pool.shape(),
            embedding.dim()
        )));
    }
    let weights = row_softmax(&embedding.0);
    let mut shape = vec![embedding.nodes()];
    shape.extend_from_slice(target_shape);
    Tensor::from_vec(&shape, mix_rows(&weights, pool))
}

/// Raw `E . E^T` logits.
pub(crate) fn gram(embedding: &Tensor) -> Tensor {
    let n = embedding.rows();
    let mut out = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in 0..n {
            out.data_mut()[i * n + j] = embedding
                .row(i)
                .iter()
                .zip(embedding.row(j))
                .map(|(a, b)| a * b)
                .sum();
        }
    }
    out
}

pub(crate) fn adjacency_from_gram(logits: &Tensor) -> Tensor {
    let mut relu = logits.clone();
    for v in relu.data_mut() {
        *v = v.max(0.0);
    }
    row_softmax(&relu)
}

/// Learned adjacency `row_softmax(ReLU(E . E^T))`.
pub fn adaptive_adjacency(embedding: &NodeEmbedding) -> Tensor {
    adjacency_from_gram(&gram(&embedding.0))
}

/// Causal dilated convolution for one node.
///
/// `x` is `steps x c_in`, `kernel` is `c_out x k x c_in`, `y` receives
/// `steps x c_out`. Tap `s` reads `x[t - dilation * s]`; taps before the
/// start of the sequence read zero padding.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_forward(
    x: &[f64],
    steps: usize,
    c_in: usize,
    kernel: &[f64],
    c_out: usize,
    k: usize,
    dilation: usize,
    bias: f64,
    y: &mut [f64],
) {
    for t in 0..steps {
        for o in 0..c_out {
            let mut acc = bias;
            for s in 0..k {
                let lag = dilation * s;
                if lag > t {
                    break;
                }
                let xs = &x[(t - lag) * c_in..(t - lag + 1) * c_in];
                let ks = &kernel[(o * k + s) * c_in..(o * k + s + 1) * c_in];
                for (a, b) in ks.iter().zip(xs) {
                    acc += a * b;
                }
            }
            y[t * c_out + o] = acc;
        }
    }
}

/// Backward of [`conv_forward`]. Accumulates into `g_kernel` and `g_x` and
/// returns the bias gradient.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_backward(
    x: &[f64],
    steps: usize,
    c_in: usize,
    kernel: &[f64],
    c_out: usize,
    k: usize,
    dilation: usize,
    g_y: &[f64],
    g_kernel: &mut [f64],
    mut g_x: Option<&mut [f64]>,
) -> f64 {
    let mut g_bias = 0.0;
    for t in 0..steps {
        for o in 0..c_out {
            let g = g_y[t * c_out + o];
            if g == 0.0 {
                continue;
            }
            g_bias += g;
            for s in 0..k {
                let lag = dilation * s;
                if lag > t {
                    break;
                }
                let base = (o * k + s) * c_in;
                let xb = (t - lag) * c_in;
                for c in 0..c_in {
                    g_kernel[base + c] += g * x[xb + c];
                }
                if let Some(gx) = g_x.as_deref_mut() {
                    for c in 0..c_in {
                        gx[xb + c] += g * kernel[base + c];
                    }
                }
            }
        }
    }
    g_bias
}

/// Tensor-level dilated causal convolution: `x` is `T x in`, `kernel` is
/// `out x K x in`; the output is `T x out`.
pub fn dilated_causal_conv(
    x: &Tensor,
    kernel: &Tensor,
    dilation: usize,
    bias: f64,
) -> Result<Tensor> {
    let (steps, c_in) = match x.shape() {
        [t, c] => (*t, *c),
        other => {
            return Err(Error::Shape(format!(
                "conv input must be T x C, got {other:?}"
            )))
        }
    };
    let (c_out, k) = match kernel.shape() {
        [o, k, i] if *i == c_in => (*o, *k),
        other => {
            return Err(Error::Shape(format!(
                "kernel {other:?} does not match {c_in} input channels"
            )))
        }
    };
    if dilation == 0 {
        return Err(Error::Config("dilation must be >= 1".into()));
    }
    let mut y = Tensor::zeros(&[steps, c_out]);
    conv_forward(
        x.data(),
        steps,
        c_in,
        kernel.data(),
        c_out,
        k,
        dilation,
        bias,
        y.data_mut(),
    );
    Ok(y)
}
