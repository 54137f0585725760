//! Round-synchronous simulation of the distributed solver.
//!
//! Every node keeps only its own state and talks to its neighbors through
//! messages. One outer iteration consists of
//!
//! 1. a broadcast of `x_i`, after which each node computes its row of the
//!    dual field,
//! 2. a broadcast of the dual entries `P_ij`, after which each node forms its
//!    scaled gradient entry and the two descent candidates `q_i`, `q̃_i`,
//! 3. two runs of `K` Metropolis–Hastings consensus rounds estimating the
//!    residual energies of `q` and `q̃` on the sampling set,
//! 4. local projections and the `τ`-weighted combination.
//!
//! A global barrier separates rounds. Nodes are assigned to partitions
//! round-robin so that messages crossing partitions can be counted.
//!
//! The smoothing parameter is fixed for the whole run.

use std::io;
use std::ops::{Add, Div};
use std::path::Path;

use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{check_len, nmse, EmpiricalGraph, GraphSignal, LabelSet};
use crate::solver::{empirical_error, lipschitz_constant, LipschitzMode};

/// `τ ← (1/τ + 1/2)⁻¹`. Starting from `2/3` this yields `2/(k+3)`.
pub fn next_tau<T>(tau: T) -> T
where
    T: One + Add<Output = T> + Div<Output = T>,
{
    let two = T::one() + T::one();
    T::one() / (T::one() / tau + T::one() / two)
}

/// `α ← α + 1/2`. Starting from `1/2` this yields `(k+1)/2`.
pub fn next_alpha<T>(alpha: T) -> T
where
    T: One + Add<Output = T> + Div<Output = T>,
{
    alpha + T::one() / (T::one() + T::one())
}

/// How a node turns its consensus output into a residual estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidualMode {
    /// `r_i = √(N·b_i)`.
    Paper,
    /// `r_i = √(N·b_i / (2M))`, equal to the empirical error under exact
    /// consensus.
    #[default]
    Calibrated,
}

impl std::str::FromStr for ResidualMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "paper" => Ok(Self::Paper),
            "calibrated" => Ok(Self::Calibrated),
            other => Err(format!("unknown residual mode `{other}`")),
        }
    }
}

/// Residual estimate from a consensus value `b ≈ (1/N) Σ_{j∈S} (y_j − q_j)²`.
pub fn residual_from_consensus(b: f64, n: usize, m: usize, mode: ResidualMode) -> Result<f64> {
    residual_at(usize::MAX, b, n, m, mode)
}

fn residual_at(node: usize, b: f64, n: usize, m: usize, mode: ResidualMode) -> Result<f64> {
    if b < -1e-12 || b.is_nan() {
        return Err(Error::NegativeEnergy { node, value: b });
    }
    let b = b.max(0.0);
    Ok(match mode {
        ResidualMode::Paper => (n as f64 * b).sqrt(),
        ResidualMode::Calibrated => (n as f64 * b / (2.0 * m as f64)).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Consensus rounds per residual estimate.
    #[serde(alias = "K")]
    pub consensus_rounds: usize,
    pub partitions: usize,
    pub mu: f64,
    pub eps: f64,
    pub max_iters: usize,
    pub residual_mode: ResidualMode,
    pub lipschitz_mode: LipschitzMode,
    /// Replace gossip by the exact network mean. Test oracle; sends no
    /// consensus messages.
    pub exact_consensus: bool,
    /// Carried into run summaries; the simulation itself draws no random
    /// numbers.
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            consensus_rounds: 200,
            partitions: 8,
            mu: 1.0,
            eps: 0.0,
            max_iters: 2000,
            residual_mode: ResidualMode::Calibrated,
            lipschitz_mode: LipschitzMode::Corrected,
            exact_consensus: false,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(m.to_owned()));
        if self.consensus_rounds == 0 {
            return fail("consensus_rounds must be at least 1");
        }
        if self.partitions == 0 {
            return fail("partitions must be at least 1");
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return fail("mu must be positive");
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return fail("eps must be non-negative");
        }
        if self.max_iters == 0 {
            return fail("max_iters must be positive");
        }
        Ok(())
    }
}

/// 1-based partition of the 0-based node `id`.
pub fn partition_of(id: usize, partitions: usize) -> usize {
    id % partitions + 1
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageStats {
    pub total_messages: u64,
    pub inter_partition_messages: u64,
    pub rounds: u64,
}

/// Messages delivered to one node in one round.
pub trait Inbox {
    /// Value sent by neighbor `sender` this round.
    fn message_from(&self, sender: usize) -> f64;
}

struct SlotInbox<'a> {
    senders: &'a [usize],
    values: &'a [f64],
}

impl Inbox for SlotInbox<'_> {
    fn message_from(&self, sender: usize) -> f64 {
        let pos = self
            .senders
            .binary_search(&sender)
            .expect("message from a non-neighbor");
        self.values[pos]
    }
}

/// Local state of one node. Nodes never see the global graph or signal.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub id: usize,
    pub partition: usize,
    neighbors: Vec<usize>,
    weights: Vec<f64>,
    sqrt_weights: Vec<f64>,
    /// Metropolis–Hastings weights `1/(max{deg_i, deg_j} + 1)`.
    pub u: Vec<f64>,
    pub y: Option<f64>,
    pub x: f64,
    pub x0: f64,
    pub q: f64,
    pub q_tilde: f64,
    pub g_bar: f64,
    pub b: f64,
    pub b_tilde: f64,
    pub r: f64,
    pub r_tilde: f64,
    pub x_hat: f64,
    pub z: f64,
    /// `P_ij` for each neighbor, in neighbor order.
    pub p_out: Vec<f64>,
    pub alpha: f64,
    pub tau: f64,
}

/// Values every node knows up front.
#[derive(Debug, Clone, Copy)]
struct Shared {
    n: usize,
    m: usize,
    mu: f64,
    eps: f64,
    lipschitz: f64,
    residual_mode: ResidualMode,
}

impl NodeState {
    pub fn neighbors(&self) -> &[usize] {
        &self.neighbors
    }

    fn compute_dual(&mut self, xs: &impl Inbox, mu: f64) {
        let diffs: Vec<f64> = self
            .neighbors
            .iter()
            .zip(&self.sqrt_weights)
            .map(|(&j, sw)| sw * (xs.message_from(j) - self.x))
            .collect();
        let gamma = self
            .neighbors
            .iter()
            .zip(&self.weights)
            .map(|(&j, w)| {
                let d = xs.message_from(j) - self.x;
                d * d * w
            })
            .sum::<f64>()
            .sqrt();
        let scale = 1.0 / mu.max(gamma);
        self.p_out = diffs.into_iter().map(|d| d * scale).collect();
    }

    fn local_descent(&mut self, p_in: &impl Inbox, lipschitz: f64) {
        let mut incoming = 0.0;
        let mut outgoing = 0.0;
        for (k, &j) in self.neighbors.iter().enumerate() {
            incoming += self.sqrt_weights[k] * p_in.message_from(j);
            outgoing += self.sqrt_weights[k] * self.p_out[k];
        }
        let g = (incoming - outgoing) / lipschitz;
        self.q = self.x - g;
        self.g_bar -= self.alpha * g;
        self.alpha = next_alpha(self.alpha);
        // `g_bar` holds the negated weighted gradient sum, so it is added.
        self.q_tilde = self.x0 + self.g_bar;
        self.b = self.y.map_or(0.0, |y| (y - self.q) * (y - self.q));
        self.b_tilde = self.y.map_or(0.0, |y| (y - self.q_tilde) * (y - self.q_tilde));
    }

    fn mix(value: f64, u: &[f64], neighbors: &[usize], inbox: &impl Inbox) -> f64 {
        let mut keep = 1.0;
        let mut acc = 0.0;
        for (k, &j) in neighbors.iter().enumerate() {
            keep -= u[k];
            acc += u[k] * inbox.message_from(j);
        }
        keep * value + acc
    }

    fn finish(&mut self, shared: &Shared) -> Result<()> {
        self.r = residual_at(self.id, self.b, shared.n, shared.m, shared.residual_mode)?;
        self.r_tilde = residual_at(self.id, self.b_tilde, shared.n, shared.m, shared.residual_mode)?;
        let clamp = |value: f64, r: f64| match self.y {
            Some(y) if r > shared.eps => y + (shared.eps / r) * (value - y),
            _ => value,
        };
        self.x_hat = clamp(self.q, self.r);
        self.z = clamp(self.q_tilde, self.r_tilde);
        self.x = self.tau * self.z + (1.0 - self.tau) * self.x_hat;
        self.tau = next_tau(self.tau);
        Ok(())
    }
}

/// Per-iteration output of the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub k: usize,
    /// NMSE of the emitted labeling `x̂`.
    pub nmse: Option<f64>,
    /// Mean of the nodes' residual estimates `r_i`.
    pub emp_err_est_mean: f64,
    /// Exact empirical error of `q`, the quantity the `r_i` estimate.
    pub emp_err_true: f64,
    pub total_msgs: u64,
    pub inter_partition_msgs: u64,
}

pub fn write_snapshots_csv<W: io::Write>(snapshots: &[Snapshot], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for s in snapshots {
        w.serialize(s)?;
    }
    w.flush().map_err(|e| Error::io("<snapshots>", e))
}

pub fn save_snapshots_csv(snapshots: &[Snapshot], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_snapshots_csv(snapshots, io::BufWriter::new(file))
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub labeling: GraphSignal,
    pub snapshots: Vec<Snapshot>,
    pub stats: MessageStats,
}

#[derive(Debug, Clone)]
pub struct Simulator {
    graph: EmpiricalGraph,
    nodes: Vec<NodeState>,
    shared: Shared,
    cfg: SimConfig,
    labels: LabelSet,
    truth: Option<Vec<f64>>,
    stats: MessageStats,
    k: usize,
}

/// Initializes every node: `x_i = x0_i`, `α = 1/2`, `τ = 2/3`, `ḡ = 0`,
/// consensus weights from combinatorial degrees.
pub fn init_sim(
    g: &EmpiricalGraph,
    labels: &LabelSet,
    cfg: &SimConfig,
    x0: &[f64],
) -> Result<Simulator> {
    cfg.validate()?;
    GraphSignal::from(x0.to_vec()).validate(g)?;
    labels.check_graph(g)?;
    if g.edge_count() == 0 {
        return Err(Error::NoEdges);
    }
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    let dense = labels.dense(g.node_count());
    let nodes = (0..g.node_count())
        .map(|i| {
            let deg_i = g.combinatorial_degree(i);
            let neighbors = g.neighbors(i).to_vec();
            let u = neighbors
                .iter()
                .map(|&j| 1.0 / (deg_i.max(g.combinatorial_degree(j)) as f64 + 1.0))
                .collect();
            NodeState {
                id: i,
                partition: partition_of(i, cfg.partitions),
                weights: g.weights(i).to_vec(),
                sqrt_weights: g.sqrt_weights(i).to_vec(),
                p_out: vec![0.0; neighbors.len()],
                neighbors,
                u,
                y: dense[i],
                x: x0[i],
                x0: x0[i],
                q: x0[i],
                q_tilde: x0[i],
                g_bar: 0.0,
                b: 0.0,
                b_tilde: 0.0,
                r: 0.0,
                r_tilde: 0.0,
                x_hat: x0[i],
                z: x0[i],
                alpha: 0.5,
                tau: 2.0 / 3.0,
            }
        })
        .collect();
    let shared = Shared {
        n: g.node_count(),
        m: labels.len(),
        mu: cfg.mu,
        eps: cfg.eps,
        lipschitz: lipschitz_constant(g.max_degree(), cfg.mu, cfg.lipschitz_mode),
        residual_mode: cfg.residual_mode,
    };
    Ok(Simulator {
        graph: g.clone(),
        nodes,
        shared,
        cfg: cfg.clone(),
        labels: labels.clone(),
        truth: None,
        stats: MessageStats::default(),
        k: 0,
    })
}

impl Simulator {
    pub fn with_ground_truth(mut self, truth: &[f64]) -> Result<Self> {
        check_len(&self.graph, truth)?;
        self.truth = Some(truth.to_vec());
        Ok(self)
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn stats(&self) -> MessageStats {
        self.stats
    }

    pub fn lipschitz(&self) -> f64 {
        self.shared.lipschitz
    }

    /// Current emitted labeling `x̂`.
    pub fn output(&self) -> GraphSignal {
        self.nodes.iter().map(|n| n.x_hat).collect()
    }

    /// Current combined iterate `x`.
    pub fn iterate(&self) -> GraphSignal {
        self.nodes.iter().map(|n| n.x).collect()
    }

    fn count_round(&mut self) {
        let mut total = 0;
        let mut inter = 0;
        for node in &self.nodes {
            for &j in &node.neighbors {
                total += 1;
                if self.nodes[j].partition != node.partition {
                    inter += 1;
                }
            }
        }
        self.stats.total_messages += total;
        self.stats.inter_partition_messages += inter;
        self.stats.rounds += 1;
    }

    /// Every node sends the same scalar to all its neighbors.
    fn broadcast(&mut self, value: impl Fn(&NodeState) -> f64) -> Vec<f64> {
        self.count_round();
        let sent: Vec<f64> = self.nodes.iter().map(value).collect();
        let mut inboxes = vec![0.0; self.graph.slot_count()];
        for (s, slot) in inboxes.iter_mut().enumerate() {
            *slot = sent[self.graph.slot_target(s)];
        }
        inboxes
    }

    fn inbox<'a>(&'a self, i: usize, inboxes: &'a [f64]) -> SlotInbox<'a> {
        SlotInbox {
            senders: self.graph.neighbors(i),
            values: &inboxes[self.graph.slots(i)],
        }
    }

    fn gossip(&mut self, read: fn(&NodeState) -> f64, write: fn(&mut NodeState, f64)) {
        if self.cfg.exact_consensus {
            let mean = self.nodes.iter().map(read).sum::<f64>() / self.nodes.len() as f64;
            self.nodes.iter_mut().for_each(|n| write(n, mean));
            return;
        }
        for _ in 0..self.cfg.consensus_rounds {
            let inboxes = self.broadcast(read);
            let mixed: Vec<f64> = (0..self.nodes.len())
                .map(|i| {
                    let node = &self.nodes[i];
                    NodeState::mix(read(node), &node.u, &node.neighbors, &self.inbox(i, &inboxes))
                })
                .collect();
            for (node, v) in self.nodes.iter_mut().zip(mixed) {
                write(node, v);
            }
        }
    }

    /// Runs one outer iteration.
    pub fn run_iteration(&mut self) -> Result<Snapshot> {
        let shared = self.shared;

        let xs = self.broadcast(|n| n.x);
        for i in 0..self.nodes.len() {
            let inbox = SlotInbox {
                senders: self.graph.neighbors(i),
                values: &xs[self.graph.slots(i)],
            };
            self.nodes[i].compute_dual(&inbox, shared.mu);
        }

        // Node j sends P_ji to each neighbor i.
        self.count_round();
        let mut ps = vec![0.0; self.graph.slot_count()];
        for i in 0..self.nodes.len() {
            for s in self.graph.slots(i) {
                let mirror = self.graph.mirror(s);
                let j = self.graph.slot_target(s);
                ps[s] = self.nodes[j].p_out[mirror - self.graph.slots(j).start];
            }
        }
        for i in 0..self.nodes.len() {
            let inbox = SlotInbox {
                senders: self.graph.neighbors(i),
                values: &ps[self.graph.slots(i)],
            };
            self.nodes[i].local_descent(&inbox, shared.lipschitz);
        }

        self.gossip(|n| n.b, |n, v| n.b = v);
        self.gossip(|n| n.b_tilde, |n, v| n.b_tilde = v);

        let q: Vec<f64> = self.nodes.iter().map(|n| n.q).collect();
        for node in &mut self.nodes {
            node.finish(&shared)?;
        }
        if let Some(bad) = self.nodes.iter().find(|n| !(n.x.is_finite() && n.x_hat.is_finite())) {
            return Err(Error::NonFinite { index: bad.id });
        }

        let output = self.output();
        let snapshot = Snapshot {
            k: self.k,
            nmse: self.truth.as_deref().map(|t| nmse(&output, t)),
            emp_err_est_mean: self.nodes.iter().map(|n| n.r).sum::<f64>() / self.nodes.len() as f64,
            emp_err_true: empirical_error(&q, &self.labels),
            total_msgs: self.stats.total_messages,
            inter_partition_msgs: self.stats.inter_partition_messages,
        };
        self.k += 1;
        Ok(snapshot)
    }

    /// Runs `max_iters` iterations.
    pub fn run(mut self) -> Result<SimOutput> {
        let mut snapshots = Vec::with_capacity(self.cfg.max_iters);
        for _ in 0..self.cfg.max_iters {
            snapshots.push(self.run_iteration()?);
        }
        Ok(SimOutput {
            labeling: self.output(),
            snapshots,
            stats: self.stats,
        })
    }
}

/// `K` rounds of Metropolis–Hastings averaging of `values` over `g`.
pub fn consensus_average(g: &EmpiricalGraph, values: &[f64], rounds: usize) -> Result<Vec<f64>> {
    check_len(g, values)?;
    let u: Vec<f64> = (0..g.slot_count())
        .map(|s| {
            let j = g.slot_target(s);
            let i = g.slot_target(g.mirror(s));
            1.0 / (g.combinatorial_degree(i).max(g.combinatorial_degree(j)) as f64 + 1.0)
        })
        .collect();
    let mut b = values.to_vec();
    for _ in 0..rounds {
        b = (0..g.node_count())
            .map(|i| {
                let mut keep = 1.0;
                let mut acc = 0.0;
                for s in g.slots(i) {
                    keep -= u[s];
                    acc += u[s] * b[g.slot_target(s)];
                }
                keep * b[i] + acc
            })
            .collect();
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use std::cell::RefCell;
    use std::collections::HashMap;

    use super::*;
    use crate::graph::{generate_two_cluster, TwoClusterConfig};

    #[test]
    fn init_scalars() {
        let g = EmpiricalGraph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let s = LabelSet::new(3, [(0, 1.0)]).unwrap();
        let sim = init_sim(&g, &s, &SimConfig::default(), &[0.0; 3]).unwrap();
        for node in sim.nodes() {
            assert_eq!(node.alpha, 0.5);
            assert_eq!(node.tau, 2.0 / 3.0);
            assert_eq!(node.g_bar, 0.0);
            assert!(node.u.iter().sum::<f64>() < 1.0);
        }
        assert_eq!(sim.nodes()[1].u, vec![1.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(sim.nodes()[0].y, Some(1.0));
        assert_eq!(sim.nodes()[1].y, None);
    }

    #[test]
    fn partitions_are_one_based_round_robin() {
        assert_eq!(partition_of(0, 8), 1);
        assert_eq!(partition_of(7, 8), 8);
        assert_eq!(partition_of(8, 8), 1);
        assert_eq!(partition_of(5, 1), 1);
    }

    #[test]
    fn residual_modes() {
        assert_eq!(residual_from_consensus(0.0, 10, 2, ResidualMode::Paper).unwrap(), 0.0);
        assert_eq!(residual_from_consensus(-1e-13, 10, 2, ResidualMode::Paper).unwrap(), 0.0);
        assert!(residual_from_consensus(-1e-6, 10, 2, ResidualMode::Paper).is_err());
        let paper = residual_from_consensus(0.4, 10, 2, ResidualMode::Paper).unwrap();
        let cal = residual_from_consensus(0.4, 10, 2, ResidualMode::Calibrated).unwrap();
        assert!((paper / cal - 2.0).abs() < 1e-15);
    }

    #[test]
    fn message_counts() {
        let tc = generate_two_cluster(&TwoClusterConfig::default()).unwrap();
        let cfg = SimConfig {
            consensus_rounds: 3,
            partitions: 1,
            max_iters: 1,
            ..Default::default()
        };
        let mut sim = init_sim(&tc.graph, &tc.labels, &cfg, &[0.0; 200]).unwrap();
        sim.run_iteration().unwrap();
        let per_round = 2 * tc.graph.edge_count() as u64;
        assert_eq!(sim.stats().rounds, 2 + 2 * 3);
        assert_eq!(sim.stats().total_messages, per_round * (2 + 2 * 3));
        assert_eq!(sim.stats().inter_partition_messages, 0);

        let cfg = SimConfig { partitions: 8, ..cfg };
        let mut sim = init_sim(&tc.graph, &tc.labels, &cfg, &[0.0; 200]).unwrap();
        let snap = sim.run_iteration().unwrap();
        assert!(snap.inter_partition_msgs > 0);
        assert!(snap.inter_partition_msgs <= snap.total_msgs);
    }

    struct Tracking {
        values: HashMap<usize, f64>,
        seen: RefCell<Vec<usize>>,
    }

    impl Inbox for Tracking {
        fn message_from(&self, sender: usize) -> f64 {
            self.seen.borrow_mut().push(sender);
            self.values.get(&sender).copied().unwrap_or(f64::NAN)
        }
    }

    #[test]
    fn node_updates_only_read_neighbor_messages() {
        let tc = generate_two_cluster(&TwoClusterConfig::default()).unwrap();
        let sim = init_sim(&tc.graph, &tc.labels, &SimConfig::default(), &tc.truth).unwrap();
        for node in sim.nodes().iter().take(40) {
            let mut node = node.clone();
            let inbox = Tracking {
                values: (0..200).map(|j| (j, j as f64 * 0.01)).collect(),
                seen: RefCell::new(Vec::new()),
            };
            node.compute_dual(&inbox, 1.0);
            node.local_descent(&inbox, 32.0);
            let mixed = NodeState::mix(node.b, &node.u, &node.neighbors, &inbox);
            assert!(mixed.is_finite());
            let seen = inbox.seen.into_inner();
            assert!(!seen.is_empty());
            assert!(seen.iter().all(|j| node.neighbors().contains(j)));
            assert!(node.p_out.iter().all(|p| p.is_finite()));
        }
    }

    #[test]
    fn consensus_constant_fixed_point() {
        let tc = generate_two_cluster(&TwoClusterConfig::default()).unwrap();
        let out = consensus_average(&tc.graph, &[2.5; 200], 50).unwrap();
        assert!(out.iter().all(|&v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn tau_and_alpha_sequences_f64() {
        let mut tau = 2.0 / 3.0;
        let mut alpha = 0.5;
        for k in 0..100 {
            assert!((tau - 2.0 / (k as f64 + 3.0)).abs() < 1e-14);
            assert_eq!(alpha, (k as f64 + 1.0) / 2.0);
            tau = next_tau(tau);
            alpha = next_alpha(alpha);
        }
    }
}
