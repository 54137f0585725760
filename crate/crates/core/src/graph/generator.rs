//! Synthetic clustered graphs with piecewise-constant ground truth.

use std::collections::HashSet;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{EmpiricalGraph, GraphSignal, LabelSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoClusterConfig {
    pub cluster_size: usize,
    pub clusters: usize,
    /// Cap on the number of neighbors of any node.
    pub degree_cap: usize,
    /// Edges between each pair of consecutive clusters.
    pub gate_edges: usize,
    /// Fraction of each cluster that is labeled, rounded up.
    pub label_fraction: f64,
    pub weight: f64,
    pub seed: u64,
}

impl Default for TwoClusterConfig {
    fn default() -> Self {
        Self {
            cluster_size: 100,
            clusters: 2,
            degree_cap: 8,
            gate_edges: 2,
            label_fraction: 0.1,
            weight: 1.0,
            seed: 0,
        }
    }
}

impl TwoClusterConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(m.to_owned()));
        if self.cluster_size == 0 {
            return fail("cluster_size must be positive");
        }
        if self.clusters == 0 {
            return fail("clusters must be positive");
        }
        if self.degree_cap < 2 {
            return fail("degree_cap must be at least 2");
        }
        if self.gate_edges == 0 {
            return fail("gate_edges must be at least 1");
        }
        if !(self.label_fraction > 0.0 && self.label_fraction <= 1.0) {
            return fail("label_fraction must lie in (0, 1]");
        }
        if !(self.weight.is_finite() && self.weight > 0.0) {
            return fail("weight must be positive and finite");
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.cluster_size * self.clusters
    }

    pub fn labels_per_cluster(&self) -> usize {
        ((self.label_fraction * self.cluster_size as f64).ceil() as usize).min(self.cluster_size)
    }
}

/// Output of [`generate_two_cluster`].
#[derive(Debug, Clone)]
pub struct TwoCluster {
    pub graph: EmpiricalGraph,
    pub truth: GraphSignal,
    pub labels: LabelSet,
    /// Cluster index of every node.
    pub membership: Vec<usize>,
}

struct Builder {
    cap: usize,
    degree: Vec<usize>,
    edges: HashSet<(usize, usize)>,
}

impl Builder {
    fn can_link(&self, a: usize, b: usize) -> bool {
        a != b
            && self.degree[a] < self.cap
            && self.degree[b] < self.cap
            && !self.edges.contains(&(a.min(b), a.max(b)))
    }

    fn link(&mut self, a: usize, b: usize) {
        self.degree[a] += 1;
        self.degree[b] += 1;
        self.edges.insert((a.min(b), a.max(b)));
    }
}

/// Generates a clustered graph.
///
/// Each cluster is wired as a random spanning tree followed by uniformly
/// drawn extra edges, never letting any node exceed `degree_cap` neighbors.
/// Consecutive clusters are joined by `gate_edges` edges between random
/// nodes. Every cluster carries one constant value drawn from `N(0, 1)`.
pub fn generate_two_cluster(cfg: &TwoClusterConfig) -> Result<TwoCluster> {
    cfg.validate()?;
    let size = cfg.cluster_size;
    let n = cfg.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut b = Builder {
        cap: cfg.degree_cap,
        degree: vec![0; n],
        edges: HashSet::new(),
    };

    for c in 0..cfg.clusters {
        let base = c * size;
        let mut order: Vec<usize> = (base..base + size).collect();
        order.shuffle(&mut rng);
        for k in 1..order.len() {
            let open: Vec<usize> = order[..k]
                .iter()
                .copied()
                .filter(|&p| b.degree[p] < b.cap)
                .collect();
            let parent = open[rng.random_range(0..open.len())];
            b.link(order[k], parent);
        }
    }

    for c in 0..cfg.clusters.saturating_sub(1) {
        let (left, right) = (c * size, (c + 1) * size);
        for _ in 0..cfg.gate_edges {
            let candidates: Vec<(usize, usize)> = (left..left + size)
                .flat_map(|u| (right..right + size).map(move |v| (u, v)))
                .filter(|&(u, v)| b.can_link(u, v))
                .collect();
            if candidates.is_empty() {
                return Err(Error::Infeasible(format!(
                    "cannot place {} gate edges between clusters {} and {} under degree cap {}",
                    cfg.gate_edges,
                    c,
                    c + 1,
                    cfg.degree_cap
                )));
            }
            let (u, v) = candidates[rng.random_range(0..candidates.len())];
            b.link(u, v);
        }
    }

    if size > 1 {
        let attempts = 4 * size * cfg.degree_cap;
        for c in 0..cfg.clusters {
            let base = c * size;
            for _ in 0..attempts {
                let u = base + rng.random_range(0..size);
                let v = base + rng.random_range(0..size);
                if b.can_link(u, v) {
                    b.link(u, v);
                }
            }
        }
    }

    let mut edges: Vec<(usize, usize)> = b.edges.into_iter().collect();
    edges.sort_unstable();
    let graph = EmpiricalGraph::from_edges(n, edges.into_iter().map(|(i, j)| (i, j, cfg.weight)))?;

    let levels: Vec<f64> = (0..cfg.clusters)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let membership: Vec<usize> = (0..n).map(|i| i / size).collect();
    let truth: GraphSignal = membership.iter().map(|&c| levels[c]).collect();

    let per_cluster = cfg.labels_per_cluster();
    let mut pairs = Vec::with_capacity(per_cluster * cfg.clusters);
    for c in 0..cfg.clusters {
        for offset in sample(&mut rng, size, per_cluster).into_iter() {
            let i = c * size + offset;
            pairs.push((i, truth[i]));
        }
    }
    let labels = LabelSet::new(n, pairs)?;

    Ok(TwoCluster {
        graph,
        truth,
        labels,
        membership,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sizes() {
        let out = generate_two_cluster(&TwoClusterConfig::default()).unwrap();
        assert_eq!(out.graph.node_count(), 200);
        assert_eq!(out.labels.len(), 20);
        assert!(out.graph.is_connected());
        assert_eq!(out.graph.max_combinatorial_degree(), 8);
        assert_eq!(out.graph.max_degree(), 8.0);
    }

    #[test]
    fn same_seed_same_output() {
        let cfg = TwoClusterConfig {
            seed: 42,
            ..Default::default()
        };
        let a = generate_two_cluster(&cfg).unwrap();
        let b = generate_two_cluster(&cfg).unwrap();
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn different_seed_different_graph() {
        let a = generate_two_cluster(&TwoClusterConfig::default()).unwrap();
        let b = generate_two_cluster(&TwoClusterConfig {
            seed: 1,
            ..Default::default()
        })
        .unwrap();
        assert_ne!(a.graph, b.graph);
    }

    #[test]
    fn truth_is_constant_per_cluster_and_labels_match() {
        let out = generate_two_cluster(&TwoClusterConfig::default()).unwrap();
        for (i, &c) in out.membership.iter().enumerate() {
            assert_eq!(out.truth[i], out.truth[c * 100]);
        }
        for (i, y) in out.labels.iter() {
            assert_eq!(y, out.truth[i]);
        }
    }

    #[test]
    fn gate_edge_count() {
        let cfg = TwoClusterConfig {
            gate_edges: 3,
            ..Default::default()
        };
        let out = generate_two_cluster(&cfg).unwrap();
        let crossing = out
            .graph
            .edges()
            .filter(|&(i, j, _)| out.membership[i] != out.membership[j])
            .count();
        assert_eq!(crossing, 3);
    }

    #[test]
    fn full_labeling() {
        let cfg = TwoClusterConfig {
            label_fraction: 1.0,
            ..Default::default()
        };
        let out = generate_two_cluster(&cfg).unwrap();
        assert_eq!(out.labels.len(), 200);
    }

    #[test]
    fn infeasible_gate_count() {
        let cfg = TwoClusterConfig {
            cluster_size: 1,
            gate_edges: 2,
            ..Default::default()
        };
        assert!(matches!(
            generate_two_cluster(&cfg),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn rejects_bad_config() {
        for cfg in [
            TwoClusterConfig {
                degree_cap: 1,
                ..Default::default()
            },
            TwoClusterConfig {
                gate_edges: 0,
                ..Default::default()
            },
            TwoClusterConfig {
                label_fraction: 0.0,
                ..Default::default()
            },
        ] {
            assert!(matches!(
                generate_two_cluster(&cfg),
                Err(Error::InvalidConfig(_))
            ));
        }
    }

    #[test]
    fn hundred_seeds_connected_and_capped() {
        for seed in 0..100 {
            let cfg = TwoClusterConfig {
                seed,
                ..Default::default()
            };
            let out = generate_two_cluster(&cfg).unwrap();
            assert!(out.graph.is_connected(), "seed {seed}");
            assert!(out.graph.max_combinatorial_degree() <= 8, "seed {seed}");
        }
    }
}
