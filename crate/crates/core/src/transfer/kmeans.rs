use rand::seq::SliceRandom;

use super::cluster::{nearest, sq_dist, ClusterState};
use crate::error::{Error, Result};
use crate::rng::SeedStream;
use crate::tensor::Tensor;

pub const MAX_ITERATIONS: usize = 300;
const MAX_RESTARTS: usize = 10;
/// Upper bound on exhaustive row-subset restarts.
pub const SUBSET_RESTARTS: usize = 256;

/// Result of [`kmeans`].
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centers: Tensor,
    pub assignments: Vec<usize>,
    /// Within-cluster sum of squared distances of the returned partition.
    pub sse: f64,
    /// SSE after every assignment step and refinement pass of the winning
    /// restart; non-increasing.
    pub trace: Vec<f64>,
}

impl KMeansFit {
    pub fn into_state(self, beta: f64) -> ClusterState {
        ClusterState {
            centers: self.centers,
            assignments: self.assignments,
            beta,
        }
    }
}

fn sse(rows: &Tensor, centers: &Tensor, z: &[usize]) -> f64 {
    z.iter()
        .enumerate()
        .map(|(i, &g)| sq_dist(rows.row(i), centers.row(g)))
        .sum()
}

fn means(rows: &Tensor, z: &[usize], g: usize, previous: &Tensor) -> Tensor {
    let d = rows.row_len();
    let mut sums = Tensor::zeros(&[g, d]);
    let mut counts = vec![0usize; g];
    for (i, &c) in z.iter().enumerate() {
        counts[c] += 1;
        for (s, v) in sums.row_mut(c).iter_mut().zip(rows.row(i)) {
            *s += v;
        }
    }
    for (c, &count) in counts.iter().enumerate() {
        if count == 0 {
            sums.row_mut(c).copy_from_slice(previous.row(c));
        } else {
            for s in sums.row_mut(c) {
                *s /= count as f64;
            }
        }
    }
    sums
}

/// Greedy farthest-point seeding from a given first row. Ties go to the
/// lowest row index.
fn farthest_point_init(rows: &Tensor, g: usize, first: usize) -> Tensor {
    let n = rows.rows();
    let mut centers = Tensor::zeros(&[g, rows.row_len()]);
    centers.row_mut(0).copy_from_slice(rows.row(first));
    let mut best: Vec<f64> = (0..n)
        .map(|i| sq_dist(rows.row(i), rows.row(first)))
        .collect();
    for c in 1..g {
        let mut pick = 0;
        for i in 1..n {
            if best[i] > best[pick] {
                pick = i;
            }
        }
        centers.row_mut(c).copy_from_slice(rows.row(pick));
        for (i, b) in best.iter_mut().enumerate() {
            *b = b.min(sq_dist(rows.row(i), rows.row(pick)));
        }
    }
    centers
}

fn lloyd(rows: &Tensor, mut centers: Tensor, trace: &mut Vec<f64>) -> (Tensor, Vec<usize>) {
    let g = centers.rows();
    let mut z: Vec<usize> = Vec::new();
    for _ in 0..MAX_ITERATIONS {
        let mut next = nearest(rows, &centers);
        trace.push(sse(rows, &centers, &next));
        if next == z {
            break;
        }
        // Re-seed empty clusters with the point farthest from its center.
        loop {
            let mut counts = vec![0usize; g];
            for &c in &next {
                counts[c] += 1;
            }
            let Some(empty) = counts.iter().position(|&k| k == 0) else {
                break;
            };
            let mut far = None;
            let mut far_d = -1.0;
            for (i, &c) in next.iter().enumerate() {
                if counts[c] < 2 {
                    continue;
                }
                let dist = sq_dist(rows.row(i), centers.row(c));
                if dist > far_d {
                    far_d = dist;
                    far = Some(i);
                }
            }
            let Some(i) = far else { break };
            centers.row_mut(empty).copy_from_slice(rows.row(i));
            next[i] = empty;
        }
        centers = means(rows, &next, g, &centers);
        z = next;
    }
    (centers, z)
}

/// Single-point transfers that lower the SSE, until none remains. Each
/// accepted pass is recorded in `trace`.
fn refine(
    rows: &Tensor,
    z: &mut [usize],
    g: usize,
    mut centers: Tensor,
    trace: &mut Vec<f64>,
) -> Tensor {
    let n = rows.rows();
    for _ in 0..MAX_ITERATIONS {
        let mut moved = false;
        for i in 0..n {
            let mut counts = vec![0usize; g];
            for &c in z.iter() {
                counts[c] += 1;
            }
            let a = z[i];
            if counts[a] < 2 {
                continue;
            }
            let na = counts[a] as f64;
            let leave = na / (na - 1.0) * sq_dist(rows.row(i), centers.row(a));
            let mut best = None;
            let mut best_delta = 0.0;
            for b in (0..g).filter(|&b| b != a) {
                let nb = counts[b] as f64;
                let delta = nb / (nb + 1.0) * sq_dist(rows.row(i), centers.row(b)) - leave;
                if delta < best_delta - 1e-12 * leave.max(1e-300) {
                    best_delta = delta;
                    best = Some(b);
                }
            }
            if let Some(b) = best {
                z[i] = b;
                centers = means(rows, z, g, &centers);
                moved = true;
            }
        }
        if !moved {
            break;
        }
        trace.push(sse(rows, &centers, z));
    }
    centers
}

/// Every `g`-subset of `0..n` in lexicographic order, or `None` if there are
/// more than `limit`.
fn all_subsets(n: usize, g: usize, limit: usize) -> Option<Vec<Vec<usize>>> {
    let mut count: u128 = 1;
    for k in 0..g {
        count = count * (n - k) as u128 / (k + 1) as u128;
        if count > limit as u128 {
            return None;
        }
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..g).collect();
    loop {
        out.push(idx.clone());
        let Some(pos) = (0..g).rev().find(|&p| idx[p] < n - g + p) else {
            return Some(out);
        };
        idx[pos] += 1;
        for q in pos + 1..g {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

fn rows_as_centers(rows: &Tensor, picks: &[usize]) -> Tensor {
    let mut centers = Tensor::zeros(&[picks.len(), rows.row_len()]);
    for (c, &i) in picks.iter().enumerate() {
        centers.row_mut(c).copy_from_slice(rows.row(i));
    }
    centers
}

/// K-means over the rows of `rows`.
///
/// Restarts come from two seedings: greedy farthest-point from several first
/// rows (order drawn from `seed`), then sets of `g` data rows as initial
/// centers, all of them when there are at most [`SUBSET_RESTARTS`] such sets
/// and a seeded sample otherwise. Each restart runs Lloyd iterations to a
/// fixed point or [`MAX_ITERATIONS`], then single-point transfer refinement.
/// The restart with the lowest SSE wins; ties keep the earlier restart.
pub fn kmeans(rows: &Tensor, g: usize, seed: u64) -> Result<KMeansFit> {
    let n = rows.rows();
    if rows.shape().len() != 2 {
        return Err(Error::Shape(format!(
            "k-means needs a matrix, got {:?}",
            rows.shape()
        )));
    }
    if g == 0 || n < g {
        return Err(Error::Validation(format!(
            "cannot form {g} clusters from {n} rows"
        )));
    }
    let mut rng = SeedStream::new(seed).fork("kmeans");
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut inits: Vec<Tensor> = order
        .iter()
        .take(MAX_RESTARTS.min(n))
        .map(|&first| farthest_point_init(rows, g, first))
        .collect();
    match all_subsets(n, g, SUBSET_RESTARTS) {
        Some(sets) => inits.extend(sets.iter().map(|s| rows_as_centers(rows, s))),
        None => {
            for _ in 0..MAX_RESTARTS {
                let picks: Vec<usize> = rand::seq::index::sample(&mut rng, n, g).into_vec();
                inits.push(rows_as_centers(rows, &picks));
            }
        }
    }
    let mut best: Option<KMeansFit> = None;
    for init in inits {
        let mut trace = Vec::new();
        let (centers, mut z) = lloyd(rows, init, &mut trace);
        let centers = refine(rows, &mut z, g, centers, &mut trace);
        // A last assignment against the final centers keeps the
        // nearest-center invariant exact.
        let z_final = nearest(rows, &centers);
        let centers = if z_final != z {
            means(rows, &z_final, g, &centers)
        } else {
            centers
        };
        let total = sse(rows, &centers, &z_final);
        if best.as_ref().is_none_or(|b| total < b.sse) {
            best = Some(KMeansFit {
                centers,
                assignments: z_final,
                sse: total,
                trace,
            });
        }
    }
    Ok(best.expect("at least one restart"))
}
