mod common;

use proptest::prelude::*;
use rand::Rng;
use tvss_core::calculus::laplacian_quadratic_check;
use tvss_core::sim::consensus_average;
use tvss_core::solver::{empirical_error, project_feasible, smoothed_objective};
use tvss_core::{divergence, graph_gradient, label_propagation, total_variation};

use common::*;

fn instance() -> impl Strategy<Value = (u64, usize)> {
    (any::<u64>(), 2usize..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_and_divergence_are_negative_adjoints((seed, n) in instance()) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, n, n);
        let x = random_signal(&mut r, n, 5.0);
        let p = random_field(&mut r, &g, 5.0);
        let lhs = graph_gradient(&g, &x).unwrap().dot(&p);
        let rhs = -dot(&x, &divergence(&g, &p).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn handshake((seed, n) in instance()) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, n, n);
        let degrees: f64 = (0..n).map(|i| g.weighted_degree(i).unwrap()).sum();
        let twice: f64 = 2.0 * g.edges().map(|(_, _, w)| w).sum::<f64>();
        prop_assert!((degrees - twice).abs() <= 1e-12 * twice);
        prop_assert!(g.max_degree() <= degrees);
    }

    #[test]
    fn dirichlet_energy_identity((seed, n) in instance()) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, n, n);
        let x = random_signal(&mut r, n, 2.0);
        let (lhs, rhs) = laplacian_quadratic_check(&g, &x).unwrap();
        prop_assert!((lhs - 2.0 * rhs).abs() <= 1e-10 * (1.0 + lhs));
    }

    #[test]
    fn smoothing_sandwich((seed, n) in instance(), mu in 1e-3f64..10.0) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, n, n);
        let x = random_signal(&mut r, n, 2.0);
        let tv = total_variation(&g, &x).unwrap();
        let f = smoothed_objective(&g, &x, mu).unwrap();
        prop_assert!(f <= tv + 1e-12 * tv);
        prop_assert!(tv - f <= mu * n as f64 / 2.0 + 1e-12 * tv);
    }

    #[test]
    fn projection_is_feasible_and_idempotent((seed, n) in instance(), frac in 0.0f64..1.5) {
        let mut r = rng(seed);
        let labels = random_labels(&mut r, n, 1 + (seed as usize) % n);
        let q = random_signal(&mut r, n, 3.0);
        let eps = frac * empirical_error(&q, &labels);
        let once = project_feasible(&q, &labels, eps).unwrap();
        prop_assert!(empirical_error(&once.signal, &labels) <= eps + 1e-12);
        let twice = project_feasible(&once.signal, &labels, eps).unwrap();
        prop_assert!(max_abs_diff(&once.signal, &twice.signal) <= 1e-12);
        for i in (0..n).filter(|i| !labels.nodes().contains(i)) {
            prop_assert_eq!(once.signal[i], q[i]);
        }
    }

    #[test]
    fn label_propagation_clamps_and_stays_in_hull((seed, n) in instance(), iters in 1usize..60) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, n, n);
        let labels = random_labels(&mut r, n, 1 + (seed as usize) % n);
        let x0 = random_signal(&mut r, n, 1.0);
        let (x, trace) = label_propagation(&g, &labels, iters, &x0, None).unwrap();
        prop_assert_eq!(trace.len(), iters);
        for (i, y) in labels.iter() {
            prop_assert_eq!(x[i], y);
        }
        let hull = labels.values().iter().chain(&x0);
        let lo = hull.clone().cloned().fold(f64::INFINITY, f64::min);
        let hi = hull.cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(x.iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
    }

    #[test]
    fn consensus_contracts_and_preserves_mean((seed, n) in instance(), rounds in 1usize..30) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, n, n);
        let b = random_signal(&mut r, n, 1.0);
        let out = consensus_average(&g, &b, rounds).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        prop_assert!((mean(&out) - mean(&b)).abs() <= 1e-12);
        let spread = |v: &[f64]| {
            v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - v.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        prop_assert!(spread(&out) <= spread(&b) + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn label_propagation_residual_never_grows((seed, n) in instance()) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, n, n);
        let labels = random_labels(&mut r, n, 1 + (seed as usize) % n);
        let x0 = vec![0.0; n];
        let iterates: Vec<Vec<f64>> = (1..25)
            .map(|t| label_propagation(&g, &labels, t, &x0, None).unwrap().0.into_inner())
            .collect();
        let residuals: Vec<f64> = iterates.windows(2).map(|w| max_abs_diff(&w[0], &w[1])).collect();
        for pair in residuals.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-14, "{residuals:?}");
        }
    }

    #[test]
    fn projection_beats_random_feasible_points((seed, n) in instance()) {
        let mut r = rng(seed);
        let labels = random_labels(&mut r, n, 1 + (seed as usize) % n);
        let q = random_signal(&mut r, n, 3.0);
        let eps = 0.3 * empirical_error(&q, &labels);
        let v = project_feasible(&q, &labels, eps).unwrap().signal;
        let dist = |w: &[f64]| norm(&w.iter().zip(&q).map(|(a, b)| a - b).collect::<Vec<_>>());
        for _ in 0..20 {
            let mut w: Vec<f64> = v.iter().map(|x| x + 0.5 * (r.random::<f64>() - 0.5)).collect();
            // Pull the perturbation back inside the constraint by shrinking
            // towards the labels.
            let err = empirical_error(&w, &labels);
            if err > eps {
                for (i, y) in labels.iter() {
                    w[i] = y + (eps / err) * (w[i] - y);
                }
            }
            prop_assert!(dist(&w) >= dist(&v) - 1e-10);
        }
    }

    #[test]
    fn handshake_exact_for_integer_weights(seed in any::<u64>(), n in 2usize..30) {
        let mut r = rng(seed);
        let mut edges = std::collections::BTreeMap::new();
        for i in 1..n {
            edges.insert((r.random_range(0..i), i), r.random_range(1..20i64));
        }
        let g = tvss_core::EmpiricalGraph::from_edges(
            n,
            edges.iter().map(|(&(i, j), &w)| (i, j, w as f64)),
        )
        .unwrap();
        let degrees: f64 = (0..n).map(|i| g.weighted_degree(i).unwrap()).sum();
        let twice: i64 = 2 * edges.values().sum::<i64>();
        prop_assert_eq!(degrees, twice as f64);
    }
}

#[test]
fn simulator_is_bit_deterministic() {
    let data = tvss_core::graph::generate_two_cluster(&Default::default()).unwrap();
    let cfg = tvss_core::SimConfig {
        consensus_rounds: 15,
        max_iters: 10,
        eps: 1e-3,
        ..Default::default()
    };
    let run = || {
        tvss_core::init_sim(&data.graph, &data.labels, &cfg, &[0.0; 200])
            .unwrap()
            .with_ground_truth(&data.truth)
            .unwrap()
            .run()
            .unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.labeling, b.labeling);
    assert_eq!(a.snapshots, b.snapshots);
    assert_eq!(a.stats, b.stats);
}
