use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NodeEmbedding;
use crate::tensor::Tensor;

/// Cluster centers (`G x d`), 0-based per-node assignments and the EMA weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    pub centers: Tensor,
    pub assignments: Vec<usize>,
    pub beta: f64,
}

impl ClusterState {
    pub fn clusters(&self) -> usize {
        self.centers.rows()
    }

    pub fn dim(&self) -> usize {
        self.centers.row_len()
    }

    /// Members per cluster.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.clusters()];
        for &z in &self.assignments {
            sizes[z] += 1;
        }
        sizes
    }

    pub fn validate(&self) -> Result<()> {
        if self.centers.shape().len() != 2 || self.clusters() == 0 {
            return Err(Error::Shape(format!(
                "cluster centers must be a non-empty G x d matrix, got {:?}",
                self.centers.shape()
            )));
        }
        if !self.centers.is_finite() {
            return Err(Error::NonFinite {
                tensor: "cluster.centers".into(),
            });
        }
        if let Some(z) = self.assignments.iter().find(|&&z| z >= self.clusters()) {
            return Err(Error::Validation(format!(
                "assignment {z} indexes past {} centers",
                self.clusters()
            )));
        }
        Ok(())
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest center per row; ties go to the lowest center index.
pub(crate) fn nearest(rows: &Tensor, centers: &Tensor) -> Vec<usize> {
    (0..rows.rows())
        .map(|i| {
            let r = rows.row(i);
            let mut best = 0;
            let mut best_d = sq_dist(r, centers.row(0));
            for g in 1..centers.rows() {
                let d = sq_dist(r, centers.row(g));
                if d < best_d {
                    best_d = d;
                    best = g;
                }
            }
            best
        })
        .collect()
}

/// `z_i = argmin_g |e_i - mu_g|^2`, lowest index on ties.
pub fn assign_clusters(embedding: &NodeEmbedding, centers: &Tensor) -> Result<Vec<usize>> {
    if centers.shape().len() != 2 || centers.rows() == 0 || centers.row_len() != embedding.dim() {
        return Err(Error::Shape(format!(
            "centers {:?} do not match embedding dimension {}",
            centers.shape(),
            embedding.dim()
        )));
    }
    Ok(nearest(&embedding.0, centers))
}

/// `R = 1/(N d) * sum_i |e_i - mu_{z_i}|^2` with the state's assignments.
pub fn cluster_regularizer(embedding: &NodeEmbedding, state: &ClusterState) -> f64 {
    let (n, d) = (embedding.nodes(), embedding.dim());
    let total: f64 = state
        .assignments
        .iter()
        .enumerate()
        .map(|(i, &g)| sq_dist(embedding.row(i), state.centers.row(g)))
        .sum();
    total / (n * d) as f64
}

/// `dR/de_i = 2 (e_i - mu_{z_i}) / (N d)`, centers held constant.
pub fn regularizer_gradient(embedding: &NodeEmbedding, state: &ClusterState) -> Tensor {
    let (n, d) = (embedding.nodes(), embedding.dim());
    let scale = 2.0 / (n * d) as f64;
    let mut g = Tensor::zeros(&[n, d]);
    for (i, &z) in state.assignments.iter().enumerate() {
        for ((o, e), m) in g
            .row_mut(i)
            .iter_mut()
            .zip(embedding.row(i))
            .zip(state.centers.row(z))
        {
            *o = scale * (e - m);
        }
    }
    g
}

/// `mu <- beta * mu_hat + (1 - beta) * mu`, where `mu_hat` is the mean of the
/// rows currently assigned to each center. Empty clusters keep their center.
pub fn ema_update_centers(state: &mut ClusterState, embedding: &NodeEmbedding) -> Result<()> {
    if embedding.dim() != state.dim() || embedding.nodes() != state.assignments.len() {
        return Err(Error::Shape(format!(
            "embedding {:?} does not match {} assignments of dimension {}",
            embedding.0.shape(),
            state.assignments.len(),
            state.dim()
        )));
    }
    let g = state.clusters();
    let d = state.dim();
    let mut sums = vec![0.0; g * d];
    let mut counts = vec![0usize; g];
    for (i, &z) in state.assignments.iter().enumerate() {
        counts[z] += 1;
        for (s, v) in sums[z * d..(z + 1) * d].iter_mut().zip(embedding.row(i)) {
            *s += v;
        }
    }
    let beta = state.beta;
    for c in 0..g {
        if counts[c] == 0 {
            continue;
        }
        let k = counts[c] as f64;
        for (m, s) in state
            .centers
            .row_mut(c)
            .iter_mut()
            .zip(&sums[c * d..(c + 1) * d])
        {
            *m = beta * (s / k) + (1.0 - beta) * *m;
        }
    }
    Ok(())
}
