//! Reverse-mode gradients of the forward pass.
//!
//! Per sample, gradients are taken with respect to the materialized per-node
//! parameters ([`ExpandedGrads`]). After the batch is reduced, [`fold`] pushes
//! them back through the row-softmax mixing and the adaptive adjacency to the
//! embedding and the pools.

use super::forward::{Materialized, SampleCache};
use super::layers::{conv_backward, softmax_backward};
use super::StgNetParams;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ExpandedGrads {
    pub kernels: Vec<Vec<f64>>,
    pub conv_bias: Vec<f64>,
    pub residual: Vec<f64>,
    pub gcn_weights: Vec<f64>,
    pub gcn_bias: Vec<f64>,
    pub predictor: Vec<f64>,
    pub predictor_bias: Vec<f64>,
    pub adjacency: Vec<f64>,
}

impl ExpandedGrads {
    pub fn zeros(params: &StgNetParams, mat: &Materialized) -> Self {
        Self {
            kernels: mat.kernels.iter().map(|k| vec![0.0; k.len()]).collect(),
            conv_bias: vec![0.0; params.pools.conv_bias.len()],
            residual: vec![0.0; params.pools.residual.as_ref().map_or(0, Tensor::len)],
            gcn_weights: vec![0.0; mat.gcn_weights.len()],
            gcn_bias: vec![0.0; params.pools.gcn_bias.len()],
            predictor: vec![0.0; mat.predictor.len()],
            predictor_bias: vec![0.0; mat.predictor_bias.len()],
            adjacency: vec![0.0; mat.adjacency.len()],
        }
    }

    pub fn add_assign(&mut self, other: &ExpandedGrads) {
        fn add(a: &mut [f64], b: &[f64]) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.kernels.iter_mut().zip(&other.kernels) {
            add(a, b);
        }
        add(&mut self.conv_bias, &other.conv_bias);
        add(&mut self.residual, &other.residual);
        add(&mut self.gcn_weights, &other.gcn_weights);
        add(&mut self.gcn_bias, &other.gcn_bias);
        add(&mut self.predictor, &other.predictor);
        add(&mut self.predictor_bias, &other.predictor_bias);
        add(&mut self.adjacency, &other.adjacency);
    }
}

/// Gradients of one sample given `g_pred = dLoss/dPrediction` (`N x H x C`).
pub(crate) fn backward_sample(
    params: &StgNetParams,
    mat: &Materialized,
    x: &[f64],
    cache: &SampleCache,
    g_pred: &[f64],
) -> ExpandedGrads {
    let cfg = &params.config;
    let (n, s, h, c, o, f, k) = (
        cfg.nodes,
        cfg.history,
        cfg.horizon,
        cfg.channels,
        cfg.hidden,
        cfg.gcn_channels,
        cfg.kernel,
    );
    let mut g = ExpandedGrads::zeros(params, mat);

    // Predictor.
    let mut g_z = vec![0.0; n * s * f];
    for i in 0..n {
        let v = mat.predictor.row(i);
        for hh in 0..h {
            for kc in 0..c {
                let gy = g_pred[(i * h + hh) * c + kc];
                g.predictor_bias[i * h + hh] += gy;
                for t in 0..s {
                    g.predictor[(i * h + hh) * s + t] += gy * cache.z[(i * s + t) * c + kc];
                    g_z[(i * s + t) * c + kc] += v[hh * s + t] * gy;
                }
            }
        }
    }

    // GCN: z = mixed . W_i + b, mixed = (I + A) q.
    let q = cache.q();
    let mut g_mixed = vec![0.0; n * s * o];
    for i in 0..n {
        let w = mat.gcn_weights.row(i);
        for t in 0..s {
            let row = i * s + t;
            for fc in 0..f {
                let gz = g_z[row * f + fc];
                g.gcn_bias[fc] += gz;
                for oc in 0..o {
                    g.gcn_weights[i * o * f + oc * f + fc] += cache.mixed[row * o + oc] * gz;
                    g_mixed[row * o + oc] += w[oc * f + fc] * gz;
                }
            }
        }
    }
    let span = s * o;
    let mut g_q = g_mixed.clone();
    for i in 0..n {
        let gm = &g_mixed[i * span..(i + 1) * span];
        let arow = mat.adjacency.row(i);
        for j in 0..n {
            let qj = &q[j * span..(j + 1) * span];
            let mut acc = 0.0;
            for (a, b) in gm.iter().zip(qj) {
                acc += a * b;
            }
            g.adjacency[i * n + j] += acc;
            let a = arow[j];
            for (gq, gmv) in g_q[j * span..(j + 1) * span].iter_mut().zip(gm) {
                *gq += a * gmv;
            }
        }
    }

    // TCN blocks in reverse.
    let mut g_out = g_q;
    for b in (0..cfg.dilations.len()).rev() {
        let dilation = cfg.dilations[b];
        let blk = &cache.blocks[b];
        let (input, c_in): (&[f64], usize) = if b == 0 {
            (x, c)
        } else {
            (&cache.blocks[b - 1].out, o)
        };
        let need_input_grad = b > 0;
        let g_v: Vec<f64> = g_out
            .iter()
            .zip(&blk.v)
            .map(|(gv, v)| if *v > 0.0 { *gv } else { 0.0 })
            .collect();

        let mut g_in = vec![0.0; n * s * c_in];
        // Residual path.
        match (b, params.pools.residual.as_ref()) {
            (0, Some(w)) => {
                for row in 0..n * s {
                    let xin = &input[row * c_in..(row + 1) * c_in];
                    for oc in 0..o {
                        let gv = g_v[row * o + oc];
                        if gv == 0.0 {
                            continue;
                        }
                        for ci in 0..c_in {
                            g.residual[oc * c_in + ci] += gv * xin[ci];
                            g_in[row * c_in + ci] += gv * w.row(oc)[ci];
                        }
                    }
                }
            }
            _ => {
                for (a, gv) in g_in.iter_mut().zip(&g_v) {
                    *a += gv;
                }
            }
        }

        // Second conv: u2 -> v.
        let l2 = 2 * b + 1;
        let mut g_h1 = vec![0.0; n * s * o];
        let m2 = mat.kernels[l2].row_len();
        for i in 0..n {
            g.conv_bias[l2] += conv_backward(
                &blk.h1[i * span..(i + 1) * span],
                s,
                o,
                mat.kernels[l2].row(i),
                o,
                k,
                dilation,
                &g_v[i * span..(i + 1) * span],
                &mut g.kernels[l2][i * m2..(i + 1) * m2],
                Some(&mut g_h1[i * span..(i + 1) * span]),
            );
        }
        let g_u1: Vec<f64> = g_h1
            .iter()
            .zip(&blk.u1)
            .map(|(gh, u)| if *u > 0.0 { *gh } else { 0.0 })
            .collect();

        // First conv: input -> u1.
        let l1 = 2 * b;
        let m1 = mat.kernels[l1].row_len();
        let in_span = s * c_in;
        for i in 0..n {
            let gx = if need_input_grad {
                Some(&mut g_in[i * in_span..(i + 1) * in_span])
            } else {
                None
            };
            g.conv_bias[l1] += conv_backward(
                &input[i * in_span..(i + 1) * in_span],
                s,
                c_in,
                mat.kernels[l1].row(i),
                o,
                k,
                dilation,
                &g_u1[i * span..(i + 1) * span],
                &mut g.kernels[l1][i * m1..(i + 1) * m1],
                gx,
            );
        }
        g_out = g_in;
    }
    g
}

/// Pushes expanded gradients through the factorization, returning gradients
/// shaped like `params`.
pub(crate) fn fold(params: &StgNetParams, mat: &Materialized, g: &ExpandedGrads) -> StgNetParams {
    let cfg = &params.config;
    let (n, d) = (cfg.nodes, cfg.embed_dim);
    let mut out = params.zeros_like();
    let mut g_weights = vec![0.0; n * d];

    // X_i = sum_j w_ij pool_j.
    let mut through_mix = |pool: &Tensor, g_block: &[f64], g_pool: &mut Tensor| {
        let m = pool.row_len();
        for i in 0..n {
            let gb = &g_block[i * m..(i + 1) * m];
            let w = mat.weights.row(i);
            for j in 0..d {
                let p = pool.row(j);
                let gp = g_pool.row_mut(j);
                let mut dot = 0.0;
                for ((gpv, gbv), pv) in gp.iter_mut().zip(gb).zip(p) {
                    *gpv += w[j] * gbv;
                    dot += gbv * pv;
                }
                g_weights[i * d + j] += dot;
            }
        }
    };
    for (l, pool) in params.pools.conv_pools.iter().enumerate() {
        through_mix(pool, &g.kernels[l], &mut out.pools.conv_pools[l]);
    }
    through_mix(
        &params.pools.gcn_pool,
        &g.gcn_weights,
        &mut out.pools.gcn_pool,
    );
    through_mix(
        &params.pools.predictor_pool,
        &g.predictor,
        &mut out.pools.predictor_pool,
    );
    through_mix(
        &params.pools.predictor_bias_pool,
        &g.predictor_bias,
        &mut out.pools.predictor_bias_pool,
    );

    out.pools.conv_bias.data_mut().copy_from_slice(&g.conv_bias);
    if let Some(r) = out.pools.residual.as_mut() {
        r.data_mut().copy_from_slice(&g.residual);
    }
    out.pools.gcn_bias.data_mut().copy_from_slice(&g.gcn_bias);

    // Softmax rows of E.
    let g_e = out.embedding.0.data_mut();
    for i in 0..n {
        softmax_backward(
            mat.weights.row(i),
            &g_weights[i * d..(i + 1) * d],
            &mut g_e[i * d..(i + 1) * d],
        );
    }

    // Adjacency: A = row_softmax(ReLU(E E^T)).
    let mut g_logits = vec![0.0; n * n];
    for i in 0..n {
        softmax_backward(
            mat.adjacency.row(i),
            &g.adjacency[i * n..(i + 1) * n],
            &mut g_logits[i * n..(i + 1) * n],
        );
    }
    for (gl, l) in g_logits.iter_mut().zip(mat.gram.data()) {
        if *l <= 0.0 {
            *gl = 0.0;
        }
    }
    let e = &params.embedding.0;
    for i in 0..n {
        for j in 0..n {
            let coeff = g_logits[i * n + j] + g_logits[j * n + i];
            if coeff == 0.0 {
                continue;
            }
            let ej = e.row(j);
            for a in 0..d {
                g_e[i * d + a] += coeff * ej[a];
            }
        }
    }
    out
}
