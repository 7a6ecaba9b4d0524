//! Cluster-structured synthetic road networks.
//!
//! Every node follows exactly one daily motif (a sum of sinusoids around a base
//! level). Nodes that share a motif share a noiseless series, so the generator's
//! labels are a ground truth for pattern recovery. The graph is blocked by
//! pattern; `coupling` is the probability that an edge crosses patterns.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Edge, RoadNetworkDataset, MINUTES_PER_DAY};
use crate::error::{Error, Result};
use crate::rng::SeedStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub amplitude: f64,
    pub cycles_per_day: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Motif {
    pub base: f64,
    pub harmonics: Vec<Harmonic>,
}

impl Motif {
    /// Noiseless value at `day_fraction` in `[0, 1)` with harmonic gain `gain`.
    pub fn value(&self, day_fraction: f64, gain: f64) -> f64 {
        self.base
            + gain
                * self
                    .harmonics
                    .iter()
                    .map(|h| {
                        h.amplitude * (2.0 * PI * h.cycles_per_day * day_fraction + h.phase).sin()
                    })
                    .sum::<f64>()
    }
}

fn default_edges_per_node() -> usize {
    3
}

fn default_units() -> String {
    "speed".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub node_count: usize,
    pub motifs: Vec<Motif>,
    pub noise_std: f64,
    /// AR(1) coefficient of the per-node noise; 0 gives white noise.
    #[serde(default)]
    pub noise_ar: f64,
    /// Standard deviation of a per-pattern, per-day multiplicative gain on the
    /// harmonics; 0 makes every day identical.
    #[serde(default)]
    pub day_jitter: f64,
    pub days: usize,
    pub interval_minutes: usize,
    pub coupling: f64,
    #[serde(default = "default_edges_per_node")]
    pub edges_per_node: usize,
    #[serde(default = "default_units")]
    pub units: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub dataset: RoadNetworkDataset,
    /// Ground-truth pattern per node. For oracles only; never a model input.
    pub labels: Vec<usize>,
}

impl SyntheticSpec {
    /// A fixed family of well-separated speed-like motifs. The family does not
    /// depend on any seed, so source and target domains built from it share
    /// their patterns.
    pub fn motif_family(patterns: usize) -> Vec<Motif> {
        (0..patterns)
            .map(|g| {
                let gf = g as f64;
                Motif {
                    base: 50.0 + 4.0 * gf,
                    harmonics: vec![
                        Harmonic {
                            amplitude: 10.0,
                            cycles_per_day: 1.0,
                            phase: 2.0 * PI * gf / patterns as f64,
                        },
                        Harmonic {
                            amplitude: 4.0 + gf,
                            cycles_per_day: 2.0 + (g % 3) as f64,
                            phase: 1.3 * gf,
                        },
                    ],
                }
            })
            .collect()
    }

    pub fn with_family(
        node_count: usize,
        patterns: usize,
        days: usize,
        interval_minutes: usize,
    ) -> Self {
        Self {
            node_count,
            motifs: Self::motif_family(patterns),
            noise_std: 1.0,
            noise_ar: 0.0,
            day_jitter: 0.0,
            days,
            interval_minutes,
            coupling: 0.1,
            edges_per_node: default_edges_per_node(),
            units: default_units(),
        }
    }

    pub fn pattern_count(&self) -> usize {
        self.motifs.len()
    }

    pub fn steps(&self) -> usize {
        self.days * MINUTES_PER_DAY / self.interval_minutes
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.motifs.is_empty() {
            return bad("at least one motif is required".into());
        }
        if self.node_count < self.motifs.len() {
            return bad(format!(
                "{} nodes cannot carry {} patterns",
                self.node_count,
                self.motifs.len()
            ));
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return bad(format!("noise_std {} must be >= 0", self.noise_std));
        }
        if !(self.noise_ar.abs() < 1.0) {
            return bad(format!("noise_ar {} must lie in (-1, 1)", self.noise_ar));
        }
        if !(self.day_jitter >= 0.0) || !self.day_jitter.is_finite() {
            return bad(format!("day_jitter {} must be >= 0", self.day_jitter));
        }
        if !(0.0..=1.0).contains(&self.coupling) {
            return bad(format!("coupling {} must lie in [0, 1]", self.coupling));
        }
        if self.days == 0 {
            return bad("days must be positive".into());
        }
        if self.interval_minutes == 0 || !MINUTES_PER_DAY.is_multiple_of(self.interval_minutes) {
            return bad(format!(
                "interval of {} minutes must divide a day",
                self.interval_minutes
            ));
        }
        for m in &self.motifs {
            if !m.base.is_finite()
                || m.harmonics.iter().any(|h| {
                    !(h.amplitude.is_finite()
                        && h.cycles_per_day.is_finite()
                        && h.phase.is_finite())
                })
            {
                return bad("motif parameters must be finite".into());
            }
        }
        Ok(())
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticDataset> {
    spec.validate()?;
    let seeds = SeedStream::new(seed);
    let n = spec.node_count;
    let g_count = spec.pattern_count();
    let per_day = MINUTES_PER_DAY / spec.interval_minutes;
    let steps = spec.steps();

    let mut labels: Vec<usize> = (0..n).map(|i| i % g_count).collect();
    labels.shuffle(&mut seeds.fork("synth.labels"));

    let mut jitter_rng = seeds.fork("synth.jitter");
    let gains: Vec<Vec<f64>> = (0..spec.days)
        .map(|_| {
            (0..g_count)
                .map(|_| {
                    if spec.day_jitter > 0.0 {
                        let z: f64 = StandardNormal.sample(&mut jitter_rng);
                        1.0 + spec.day_jitter * z
                    } else {
                        1.0
                    }
                })
                .collect()
        })
        .collect();

    // Noiseless motif values, shared by every node of a pattern.
    let clean: Vec<Vec<f64>> = (0..g_count)
        .map(|g| {
            (0..steps)
                .map(|t| {
                    let frac = (t % per_day) as f64 / per_day as f64;
                    spec.motifs[g].value(frac, gains[t / per_day][g])
                })
                .collect()
        })
        .collect();

    let mut signals = vec![0.0; steps * n];
    let mut noise_rng = seeds.fork("synth.noise");
    let innovation = spec.noise_std * (1.0 - spec.noise_ar * spec.noise_ar).sqrt();
    for i in 0..n {
        let series = &clean[labels[i]];
        let mut state = 0.0;
        for t in 0..steps {
            let noise = if spec.noise_std > 0.0 {
                let z: f64 = StandardNormal.sample(&mut noise_rng);
                state = if t == 0 {
                    spec.noise_std * z
                } else {
                    spec.noise_ar * state + innovation * z
                };
                state
            } else {
                0.0
            };
            signals[t * n + i] = series[t] + noise;
        }
    }

    let mut edge_rng = seeds.fork("synth.edges");
    let mut edges = Vec::with_capacity(n * spec.edges_per_node);
    for i in 0..n {
        let same: Vec<usize> = (0..n)
            .filter(|&j| j != i && labels[j] == labels[i])
            .collect();
        let other: Vec<usize> = (0..n).filter(|&j| labels[j] != labels[i]).collect();
        for _ in 0..spec.edges_per_node {
            let cross = edge_rng.random::<f64>() < spec.coupling;
            let pool = match (cross, same.is_empty(), other.is_empty()) {
                (_, true, true) => continue,
                (true, _, false) | (false, true, false) => &other,
                _ => &same,
            };
            let dst = pool[edge_rng.random_range(0..pool.len())];
            let weight = edge_rng.random_range(0.5..1.0);
            edges.push(Edge {
                src: i,
                dst,
                weight,
            });
        }
    }

    let timestamps = (0..steps)
        .map(|t| {
            let minutes = (t % per_day) * spec.interval_minutes;
            format!(
                "d{:03} {:02}:{:02}",
                t / per_day,
                minutes / 60,
                minutes % 60
            )
        })
        .collect();

    let dataset = RoadNetworkDataset::new(
        n,
        1,
        spec.interval_minutes,
        spec.units.clone(),
        timestamps,
        edges,
        signals,
    )?;
    Ok(SyntheticDataset { dataset, labels })
}
