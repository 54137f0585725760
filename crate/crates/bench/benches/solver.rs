use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use tvss_bench::{epsilon, two_cluster};
use tvss_core::solver::smoothed_gradient;
use tvss_core::{init_sim, label_propagation, SimConfig, Solver, SolverConfig};

fn gradient(c: &mut Criterion) {
    let mut group = c.benchmark_group("smoothed_gradient");
    for size in [100, 1000, 10_000] {
        let data = two_cluster(size, 1);
        let x: Vec<f64> = (0..data.graph.node_count()).map(|i| (i as f64).sin()).collect();
        group.bench_with_input(BenchmarkId::from_parameter(2 * size), &x, |b, x| {
            b.iter(|| smoothed_gradient(&data.graph, black_box(x), 0.1).unwrap())
        });
    }
    group.finish();
}

fn solvers(c: &mut Criterion) {
    let data = two_cluster(100, 2);
    let x0 = vec![0.0; data.graph.node_count()];
    let iters = 200;
    let mut group = c.benchmark_group("200_iterations");
    group.sample_size(20);
    group.bench_function("accel", |b| {
        let cfg = SolverConfig {
            max_iters: iters,
            ..SolverConfig::accelerated(epsilon(&data))
        };
        let solver = Solver::new(&data.graph, &data.labels, cfg).unwrap();
        b.iter(|| solver.run(black_box(&x0)).unwrap())
    });
    group.bench_function("lp", |b| {
        b.iter(|| label_propagation(&data.graph, &data.labels, iters, black_box(&x0), None).unwrap())
    });
    group.finish();

    let mut group = c.benchmark_group("sim_iteration");
    group.sample_size(10);
    for k in [10, 100] {
        let cfg = SimConfig {
            consensus_rounds: k,
            max_iters: 1,
            eps: epsilon(&data),
            ..Default::default()
        };
        group.bench_with_input(BenchmarkId::new("consensus_k", k), &cfg, |b, cfg| {
            b.iter(|| {
                let mut sim = init_sim(&data.graph, &data.labels, cfg, &x0).unwrap();
                sim.run_iteration().unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, gradient, solvers);
criterion_main!(benches);
