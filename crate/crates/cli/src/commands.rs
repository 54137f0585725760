use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;
use tvss_core::experiment::{run_compare, ExperimentConfig};
use tvss_core::graph::{generate_two_cluster, io};
use tvss_core::sim::save_snapshots_csv;
use tvss_core::solver::paper_kappa;
use tvss_core::{
    init_sim, label_propagation, nmse, EmpiricalGraph, GraphSignal, LabelSet, SimConfig, Solver,
    SolverTrace,
};

use crate::{CompareArgs, Common, GenerateArgs, Method, SolveArgs, Tuning};

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
        cfg.generator.seed = seed;
    }
    fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
    Ok(cfg)
}

/// Applies command-line overrides. `--iters` changes every method so the
/// comparison stays at equal iteration counts.
fn apply_tuning(cfg: &mut ExperimentConfig, t: &Tuning) {
    if let Some(iters) = t.iters {
        cfg.set_iterations(iters);
    }
    if let Some(eps) = t.eps {
        cfg.epsilon_scale = None;
        cfg.solver.epsilon = eps;
        if let Some(sim) = &mut cfg.sim {
            sim.eps = eps;
        }
    }
    if let Some(mu0) = t.mu0 {
        cfg.solver.mu0 = mu0;
        if let Some(sim) = &mut cfg.sim {
            sim.mu = mu0;
        }
    }
    if let Some(kappa) = t.kappa {
        cfg.solver.kappa = kappa;
    }
    if let Some(mode) = t.lipschitz_mode {
        cfg.solver.lipschitz_mode = mode;
        if let Some(sim) = &mut cfg.sim {
            sim.lipschitz_mode = mode;
        }
    }
    if let Some(acc) = t.accumulation {
        cfg.solver.accumulation = acc;
    }
    if let Some(sim) = &mut cfg.sim {
        if let Some(p) = t.partitions {
            sim.partitions = p;
        }
        if let Some(k) = t.consensus_k {
            sim.consensus_rounds = k;
        }
        if let Some(mode) = t.residual_mode {
            sim.residual_mode = mode;
        }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Serialize)]
struct GraphStats {
    nodes: usize,
    edges: usize,
    max_degree: f64,
    max_combinatorial_degree: usize,
    diameter: Option<usize>,
    labeled: usize,
}

fn stats(g: &EmpiricalGraph, labels: &LabelSet) -> GraphStats {
    GraphStats {
        nodes: g.node_count(),
        edges: g.edge_count(),
        max_degree: g.max_degree(),
        max_combinatorial_degree: g.max_combinatorial_degree(),
        diameter: g.diameter(),
        labeled: labels.len(),
    }
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let data = generate_two_cluster(&cfg.generator)?;
    let out = &args.common.out;
    io::save_edge_list(&data.graph, out.join("graph.tsv"))?;
    io::save_signal(&data.truth, out.join("truth.csv"))?;
    io::save_labels(&data.labels, out.join("labels.csv"))?;
    let s = stats(&data.graph, &data.labels);
    write_json(&out.join("stats.json"), &s)?;
    println!(
        "N={} |E|={} d_max={} diameter={} M={}",
        s.nodes,
        s.edges,
        s.max_degree,
        s.diameter.map_or("inf".to_owned(), |d| d.to_string()),
        s.labeled
    );
    Ok(())
}

struct Instance {
    graph: EmpiricalGraph,
    labels: LabelSet,
    truth: Option<GraphSignal>,
}

fn load_instance(args: &SolveArgs, cfg: &ExperimentConfig) -> Result<Instance> {
    match (&args.graph, &args.labels) {
        (Some(graph), Some(labels)) => {
            let graph = io::load_edge_list(graph)?;
            let n = graph.node_count();
            let labels = io::load_labels(labels, n)?;
            let truth = args.truth.as_ref().map(|p| io::load_signal(p, n)).transpose()?;
            Ok(Instance { graph, labels, truth })
        }
        _ => {
            let data = generate_two_cluster(&cfg.generator)?;
            Ok(Instance {
                graph: data.graph,
                labels: data.labels,
                truth: Some(data.truth),
            })
        }
    }
}

fn save_trace(trace: &SolverTrace, path: PathBuf) -> Result<()> {
    trace.save_csv(&path)?;
    Ok(())
}

pub fn solve(args: &SolveArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    match args.method {
        Method::Nesterov => cfg.solver.kappa = 1.0,
        Method::Accel if args.tuning.kappa.is_none() && cfg.solver.kappa == 1.0 => {
            cfg.solver.kappa = paper_kappa()
        }
        Method::Sim if cfg.sim.is_none() => {
            cfg.sim = Some(SimConfig {
                max_iters: cfg.solver.max_iters,
                ..SimConfig::default()
            })
        }
        _ => {}
    }
    apply_tuning(&mut cfg, &args.tuning);
    let inst = load_instance(args, &cfg)?;
    let (g, labels, truth) = (&inst.graph, &inst.labels, inst.truth.as_deref());

    let epsilon = match (args.tuning.eps, cfg.epsilon_scale, truth) {
        (Some(eps), _, _) => eps,
        (None, Some(scale), Some(t)) => scale * t.iter().map(|v| v * v).sum::<f64>().sqrt(),
        _ => cfg.solver.epsilon,
    };
    let x0 = vec![0.0; g.node_count()];
    let out = &args.common.out;
    let started = Instant::now();

    let (labeling, summary) = match args.method {
        Method::Nesterov | Method::Accel => {
            let solver_cfg = tvss_core::SolverConfig {
                epsilon,
                ..cfg.solver.clone()
            };
            let mut solver = Solver::new(g, labels, solver_cfg.clone())?;
            if let Some(t) = truth {
                solver = solver.with_ground_truth(t)?;
            }
            let result = solver.run(&x0)?;
            save_trace(&result.trace, out.join("trace.csv"))?;
            let last = result.trace.last().copied();
            (
                result.labeling,
                json!({
                    "method": method_name(args.method),
                    "iterations": result.trace.len(),
                    "config": solver_cfg,
                    "final": last,
                }),
            )
        }
        Method::Lp => {
            let (x, trace) = label_propagation(g, labels, cfg.lp_iters, &x0, truth)?;
            save_trace(&trace, out.join("trace.csv"))?;
            (
                x,
                json!({
                    "method": "lp",
                    "iterations": trace.len(),
                    "final": trace.last().copied(),
                }),
            )
        }
        Method::Sim => {
            let sim_cfg = SimConfig {
                eps: epsilon,
                ..cfg.sim.clone().expect("sim config present")
            };
            let mut sim = init_sim(g, labels, &sim_cfg, &x0)?;
            if let Some(t) = truth {
                sim = sim.with_ground_truth(t)?;
            }
            let result = sim.run()?;
            save_snapshots_csv(&result.snapshots, out.join("trace.csv"))?;
            (
                result.labeling,
                json!({
                    "method": "sim",
                    "iterations": result.snapshots.len(),
                    "config": sim_cfg,
                    "messages": result.stats,
                    "final": result.snapshots.last(),
                }),
            )
        }
    };
    let wall = started.elapsed().as_secs_f64();

    io::save_signal(&labeling, out.join("labeling.csv"))?;
    write_json(&out.join("summary.json"), &summary)?;
    write_json(&out.join("timings.json"), &json!({ method_name(args.method): wall }))?;
    match truth {
        Some(t) => println!("{}: NMSE {:.6e}", method_name(args.method), nmse(&labeling, t)),
        None => println!("{}: done", method_name(args.method)),
    }
    Ok(())
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Nesterov => "nesterov",
        Method::Accel => "accel",
        Method::Lp => "lp",
        Method::Sim => "sim",
    }
}

/// Returns `false` when some Monte-Carlo runs failed.
pub fn compare(args: &CompareArgs) -> Result<bool> {
    let mut cfg = load_config(&args.common)?;
    if args.sim && cfg.sim.is_none() {
        cfg.sim = Some(SimConfig {
            max_iters: cfg.solver.max_iters,
            mu: cfg.solver.mu0,
            lipschitz_mode: cfg.solver.lipschitz_mode,
            ..SimConfig::default()
        });
    }
    if let Some(runs) = args.runs {
        cfg.monte_carlo_runs = runs;
    }
    apply_tuning(&mut cfg, &args.tuning);
    if cfg.lp_iters != cfg.solver.max_iters {
        bail!(
            "label propagation runs {} iterations but the solver runs {}",
            cfg.lp_iters,
            cfg.solver.max_iters
        );
    }
    let out = &args.common.out;
    let cmp = run_compare(&cfg)?;
    let file = fs::File::create(out.join("curves.csv")).context("creating curves.csv")?;
    cmp.write_curves_csv(std::io::BufWriter::new(file))?;
    write_json(&out.join("summary.json"), &cmp.summary)?;
    write_json(&out.join("timings.json"), &cmp.summary.wall_time)?;
    write_json(&out.join("config.json"), &cfg)?;

    let s = &cmp.summary;
    print!(
        "runs={} iterations={} NMSE_nest={:.4e} NMSE_LP={:.4e}",
        s.runs, s.iterations, s.nmse_nest, s.nmse_lp
    );
    if let Some(sim) = s.nmse_sim {
        print!(" NMSE_sim={sim:.4e}");
    }
    println!(" nest_better={}/{}", s.nest_better_runs, s.runs);
    for failed in &s.failed_runs {
        eprintln!("run {} (seed {}) failed: {}", failed.run, failed.seed, failed.error);
    }
    Ok(s.complete)
}
