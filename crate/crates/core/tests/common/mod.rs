#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tvss_core::{EdgeField, EmpiricalGraph, LabelSet};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Connected graph on `n` nodes: a random spanning tree plus `extra` random
/// chords, weights uniform in `[0.25, 4)`.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> EmpiricalGraph {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = std::collections::BTreeMap::new();
    for k in 1..n {
        let parent = order[rng.random_range(0..k)];
        let (a, b) = (order[k].min(parent), order[k].max(parent));
        edges.insert((a, b), rng.random_range(0.25..4.0));
    }
    for _ in 0..extra {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i != j {
            edges.entry((i.min(j), i.max(j))).or_insert_with(|| rng.random_range(0.25..4.0));
        }
    }
    EmpiricalGraph::from_edges(n, edges.into_iter().map(|((i, j), w)| (i, j, w))).unwrap()
}

pub fn random_signal(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn random_field(rng: &mut ChaCha8Rng, g: &EmpiricalGraph, scale: f64) -> EdgeField {
    let values = (0..g.slot_count()).map(|_| rng.random_range(-scale..scale)).collect();
    EdgeField::from_slots(g, values).unwrap()
}

pub fn random_labels(rng: &mut ChaCha8Rng, n: usize, m: usize) -> LabelSet {
    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.shuffle(rng);
    LabelSet::new(n, nodes[..m].iter().map(|&i| (i, rng.random_range(-2.0..2.0)))).unwrap()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `max_{‖p‖≤1} ⟨p, a⟩ − μ‖p‖²/2` by golden-section search over the radius
/// along `a`, checked against random directions.
pub fn ball_max(a: &[f64], mu: f64, rng: &mut ChaCha8Rng) -> f64 {
    let na = norm(a);
    let phi = |t: f64| t * na - 0.5 * mu * t * t;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let inv = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = hi - inv * (hi - lo);
        let d = lo + inv * (hi - lo);
        if phi(c) < phi(d) {
            lo = c;
        } else {
            hi = d;
        }
    }
    let best = phi(0.5 * (lo + hi)).max(phi(1.0)).max(0.0);
    for _ in 0..20 {
        let p: Vec<f64> = a.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        let np = norm(&p).max(1.0);
        let p: Vec<f64> = p.iter().map(|v| v / np).collect();
        let val = dot(&p, a) - 0.5 * mu * dot(&p, &p);
        assert!(val <= best + 1e-12, "random direction beats the line search");
    }
    best
}

/// Central finite-difference gradient.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut x = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + h;
            let up = f(&x);
            x[i] = orig - h;
            let down = f(&x);
            x[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Euclidean projection of `q` onto `{x : √(Σ_S (x_i − y_i)²/(2M)) ≤ ε}`
/// from the KKT system: on `S`, `x_i = (q_i + λ y_i)/(1 + λ)` with the
/// multiplier `λ ≥ 0` found by bisection on the active constraint.
/// Returns the projected signal and `λ`.
pub fn projection_by_bisection(q: &[f64], labels: &LabelSet, eps: f64) -> (Vec<f64>, f64) {
    let m = labels.len() as f64;
    let err = |lambda: f64| {
        let s: f64 = labels
            .iter()
            .map(|(i, y)| {
                let d = (q[i] - y) / (1.0 + lambda);
                d * d
            })
            .sum();
        (s / (2.0 * m)).sqrt()
    };
    let apply = |lambda: f64| {
        let mut x = q.to_vec();
        for (i, y) in labels.iter() {
            x[i] = (q[i] + lambda * y) / (1.0 + lambda);
        }
        x
    };
    if err(0.0) <= eps {
        return (q.to_vec(), 0.0);
    }
    let mut hi = 1.0;
    while err(hi) > eps {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if err(mid) > eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (apply(hi), hi)
}
