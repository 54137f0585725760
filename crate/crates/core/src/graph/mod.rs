//! Empirical graph, graph signals and sampling sets.
//!
//! Nodes are indexed `0..N` inside the library. The text formats in [`io`]
//! use 1-based indices and translate at the boundary.
//!
//! Adjacency is stored in compressed sparse rows. Every undirected edge
//! occupies two *slots*, one in each endpoint's row, and each slot knows the
//! index of its mirror slot. Per-edge quantities such as [`EdgeField`]
//! values are aligned with these slots.
//!
//! [`EdgeField`]: crate::calculus::EdgeField

pub mod generator;
pub mod io;

use std::collections::VecDeque;
use std::ops::{Deref, DerefMut, Range};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use generator::{generate_two_cluster, TwoCluster, TwoClusterConfig};

/// Sparse symmetric weighted graph without self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalGraph {
    node_count: usize,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
    sqrt_weights: Vec<f64>,
    mirror: Vec<usize>,
}

impl EmpiricalGraph {
    /// Builds a graph from undirected `(i, j, w)` triples with 0-based
    /// endpoints. Each unordered pair may appear at most once.
    pub fn from_edges<I>(node_count: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if node_count == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); node_count];
        for (i, j, w) in edges {
            for index in [i, j] {
                if index >= node_count {
                    return Err(Error::NodeOutOfRange { index, node_count });
                }
            }
            if i == j {
                return Err(Error::SelfLoop(i));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidWeight { i, j, weight: w });
            }
            rows[i].push((j, w));
            rows[j].push((i, w));
        }

        let mut offsets = Vec::with_capacity(node_count + 1);
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            if let Some(pair) = row.windows(2).find(|p| p[0].0 == p[1].0) {
                let (a, b) = (i.min(pair[0].0), i.max(pair[0].0));
                return Err(Error::DuplicateEdge(a, b));
            }
            for &(j, w) in row.iter() {
                targets.push(j);
                weights.push(w);
            }
            offsets.push(targets.len());
        }

        let mut mirror = vec![0; targets.len()];
        for i in 0..node_count {
            for slot in offsets[i]..offsets[i + 1] {
                let j = targets[slot];
                let row = &targets[offsets[j]..offsets[j + 1]];
                // Rows are sorted and symmetric, so the search always succeeds.
                let pos = row.binary_search(&i).expect("asymmetric adjacency");
                mirror[slot] = offsets[j] + pos;
            }
        }
        let sqrt_weights = weights.iter().map(|w| w.sqrt()).collect();

        Ok(Self {
            node_count,
            offsets,
            targets,
            weights,
            sqrt_weights,
            mirror,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    /// Number of directed slots, i.e. twice the edge count.
    pub fn slot_count(&self) -> usize {
        self.targets.len()
    }

    pub fn slots(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.targets[self.slots(i)]
    }

    pub fn weights(&self, i: usize) -> &[f64] {
        &self.weights[self.slots(i)]
    }

    pub fn sqrt_weights(&self, i: usize) -> &[f64] {
        &self.sqrt_weights[self.slots(i)]
    }

    pub fn slot_target(&self, slot: usize) -> usize {
        self.targets[slot]
    }

    pub fn slot_weight(&self, slot: usize) -> f64 {
        self.weights[slot]
    }

    pub fn slot_sqrt_weight(&self, slot: usize) -> f64 {
        self.sqrt_weights[slot]
    }

    /// Slot of the reversed edge `(j, i)` for the slot of `(i, j)`.
    pub fn mirror(&self, slot: usize) -> usize {
        self.mirror[slot]
    }

    /// Slot holding the edge `(i, j)`, if present.
    pub fn find_slot(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.node_count {
            return None;
        }
        self.neighbors(i)
            .binary_search(&j)
            .ok()
            .map(|pos| self.offsets[i] + pos)
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.find_slot(i, j).map_or(0.0, |s| self.weights[s])
    }

    /// Undirected edges as `(i, j, w)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.node_count).flat_map(move |i| {
            self.slots(i)
                .filter(move |&s| self.targets[s] > i)
                .map(move |s| (i, self.targets[s], self.weights[s]))
        })
    }

    fn check_node(&self, i: usize) -> Result<()> {
        if i < self.node_count {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                index: i,
                node_count: self.node_count,
            })
        }
    }

    /// Weighted degree `d_i = Σ_j W_ij`.
    pub fn weighted_degree(&self, i: usize) -> Result<f64> {
        self.check_node(i)?;
        Ok(self.weights(i).iter().sum())
    }

    /// Number of neighbors of `i`.
    pub fn combinatorial_degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn max_degree(&self) -> f64 {
        (0..self.node_count)
            .map(|i| self.weights(i).iter().sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_combinatorial_degree(&self) -> usize {
        (0..self.node_count)
            .map(|i| self.combinatorial_degree(i))
            .max()
            .unwrap_or(0)
    }

    fn bfs_depths(&self, source: usize) -> Vec<Option<usize>> {
        let mut depth = vec![None; self.node_count];
        let mut queue = VecDeque::new();
        depth[source] = Some(0);
        queue.push_back(source);
        while let Some(i) = queue.pop_front() {
            let d = depth[i].unwrap();
            for &j in self.neighbors(i) {
                if depth[j].is_none() {
                    depth[j] = Some(d + 1);
                    queue.push_back(j);
                }
            }
        }
        depth
    }

    pub fn is_connected(&self) -> bool {
        self.bfs_depths(0).iter().all(Option::is_some)
    }

    /// Hop diameter; `None` when the graph is disconnected.
    pub fn diameter(&self) -> Option<usize> {
        let mut best = 0;
        for s in 0..self.node_count {
            for d in self.bfs_depths(s) {
                best = best.max(d?);
            }
        }
        Some(best)
    }
}

/// Real-valued signal over the nodes of a graph.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GraphSignal(Vec<f64>);

impl GraphSignal {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Self(vec![value; n])
    }

    /// Checks the length against `g` and that every entry is finite.
    pub fn validate(&self, g: &EmpiricalGraph) -> Result<()> {
        check_len(g, &self.0)?;
        match self.0.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFinite { index }),
            None => Ok(()),
        }
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }
}

impl From<Vec<f64>> for GraphSignal {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl FromIterator<f64> for GraphSignal {
    fn from_iter<T: IntoIterator<Item = f64>>(iter: T) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl Deref for GraphSignal {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for GraphSignal {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

pub(crate) fn check_len(g: &EmpiricalGraph, x: &[f64]) -> Result<()> {
    if x.len() == g.node_count() {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            expected: g.node_count(),
            actual: x.len(),
        })
    }
}

/// Normalized squared error `‖x − truth‖² / ‖truth‖²`.
pub fn nmse(x: &[f64], truth: &[f64]) -> f64 {
    let err: f64 = x.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum();
    let energy: f64 = truth.iter().map(|t| t * t).sum();
    err / energy
}

/// Sampling set `S` with its initial labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSet {
    nodes: Vec<usize>,
    values: Vec<f64>,
}

impl LabelSet {
    /// Builds a label set over a graph with `node_count` nodes from 0-based
    /// `(node, value)` pairs in any order.
    pub fn new<I>(node_count: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let mut pairs: Vec<(usize, f64)> = pairs.into_iter().collect();
        if pairs.is_empty() {
            return Err(Error::EmptySamplingSet);
        }
        pairs.sort_by_key(|&(i, _)| i);
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::DuplicateLabel(w[0].0));
            }
        }
        for (pos, &(i, y)) in pairs.iter().enumerate() {
            if i >= node_count {
                return Err(Error::NodeOutOfRange {
                    index: i,
                    node_count,
                });
            }
            if !y.is_finite() {
                return Err(Error::NonFinite { index: pos });
            }
        }
        let (nodes, values) = pairs.into_iter().unzip();
        Ok(Self { nodes, values })
    }

    /// Sampled nodes, sorted ascending.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sample count `M`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes.iter().copied().zip(self.values.iter().copied())
    }

    /// Per-node label lookup, `None` for unlabeled nodes.
    pub fn dense(&self, node_count: usize) -> Vec<Option<f64>> {
        let mut out = vec![None; node_count];
        for (i, y) in self.iter() {
            out[i] = Some(y);
        }
        out
    }

    pub fn max_node(&self) -> usize {
        *self.nodes.last().unwrap()
    }

    pub(crate) fn check_graph(&self, g: &EmpiricalGraph) -> Result<()> {
        let index = self.max_node();
        if index < g.node_count() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                index,
                node_count: g.node_count(),
            })
        }
    }
}
