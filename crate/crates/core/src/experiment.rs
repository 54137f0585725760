//! Monte-Carlo comparison of the smoothed TV solver, label propagation and
//! (optionally) the message-passing simulator on synthetic clustered graphs.

use std::io;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{generate_two_cluster, GraphSignal, TwoCluster, TwoClusterConfig};
use crate::lp::label_propagation;
use crate::sim::{init_sim, SimConfig};
use crate::solver::{SolverConfig, Solver, StopRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub generator: TwoClusterConfig,
    pub solver: SolverConfig,
    pub sim: Option<SimConfig>,
    /// Label-propagation sweeps; must equal the solver's iteration count.
    pub lp_iters: usize,
    pub monte_carlo_runs: usize,
    pub seed: u64,
    /// When set, each run uses `ε = epsilon_scale · ‖x^(g)‖₂` for both the
    /// solver and the simulator instead of their configured values.
    pub epsilon_scale: Option<f64>,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let solver = SolverConfig::accelerated(0.0);
        Self {
            lp_iters: solver.max_iters,
            generator: TwoClusterConfig::default(),
            solver,
            sim: None,
            monte_carlo_runs: 100,
            seed: 0,
            epsilon_scale: Some(1e-5),
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn iterations(&self) -> usize {
        self.solver.max_iters
    }

    /// Sets the iteration count of every method at once.
    pub fn set_iterations(&mut self, iters: usize) {
        self.solver.max_iters = iters;
        self.lp_iters = iters;
        if let Some(sim) = &mut self.sim {
            sim.max_iters = iters;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.monte_carlo_runs == 0 {
            return Err(Error::InvalidConfig("monte_carlo_runs must be at least 1".into()));
        }
        self.generator.validate()?;
        self.solver.validate()?;
        if self.solver.stop != StopRule::FixedIters {
            return Err(Error::InvalidConfig(
                "comparisons need a fixed iteration count".into(),
            ));
        }
        let iters = self.solver.max_iters;
        if self.lp_iters != iters {
            return Err(Error::InvalidConfig(format!(
                "lp_iters ({}) differs from solver max_iters ({iters})",
                self.lp_iters
            )));
        }
        if let Some(sim) = &self.sim {
            sim.validate()?;
            if sim.max_iters != iters {
                return Err(Error::InvalidConfig(format!(
                    "sim max_iters ({}) differs from solver max_iters ({iters})",
                    sim.max_iters
                )));
            }
        }
        if let Some(scale) = self.epsilon_scale {
            if !(scale >= 0.0 && scale.is_finite()) {
                return Err(Error::InvalidConfig("epsilon_scale must be non-negative".into()));
            }
        }
        Ok(())
    }

    /// Generator configuration for run `run`.
    pub fn generator_for(&self, run: usize) -> TwoClusterConfig {
        TwoClusterConfig {
            seed: self
                .seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(run as u64),
            ..self.generator.clone()
        }
    }
}

/// Results of one Monte-Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub nmse_nest: f64,
    pub nmse_lp: f64,
    pub nmse_sim: Option<f64>,
    #[serde(skip)]
    pub curve_nest: Vec<f64>,
    #[serde(skip)]
    pub curve_lp: Vec<f64>,
    #[serde(skip)]
    pub curve_sim: Option<Vec<f64>>,
    #[serde(skip)]
    pub wall_time: WallTime,
}

/// Seconds spent per method. Not part of the serialized summary, which
/// must be reproducible.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WallTime {
    pub nest: f64,
    pub lp: f64,
    pub sim: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub runs: usize,
    pub iterations: usize,
    /// Mean over runs of the final NMSE.
    pub nmse_nest: f64,
    pub nmse_lp: f64,
    pub nmse_sim: Option<f64>,
    /// Runs in which the TV solver ends below label propagation.
    pub nest_better_runs: usize,
    pub per_run: Vec<RunResult>,
    /// False when some runs failed; averages then cover the successful runs
    /// only.
    pub complete: bool,
    pub failed_runs: Vec<FailedRun>,
    #[serde(skip)]
    pub wall_time: WallTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedRun {
    pub run: usize,
    pub seed: u64,
    pub error: String,
}

/// Mean NMSE per iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    pub nmse_nest: f64,
    pub nmse_lp: f64,
    pub nmse_sim: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub summary: RunSummary,
    pub curves: Vec<CurvePoint>,
}

impl Comparison {
    pub fn write_curves_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for p in &self.curves {
            w.serialize(p)?;
        }
        w.flush().map_err(|e| Error::io("<curves>", e))
    }
}

/// Runs one Monte-Carlo instance on a pre-generated dataset.
pub fn run_instance(
    cfg: &ExperimentConfig,
    run: usize,
    seed: u64,
    data: &TwoCluster,
) -> Result<RunResult> {
    let n = data.graph.node_count();
    let x0 = GraphSignal::zeros(n);
    let epsilon = match cfg.epsilon_scale {
        Some(scale) => scale * data.truth.norm_squared().sqrt(),
        None => cfg.solver.epsilon,
    };

    let started = Instant::now();
    let solver_cfg = SolverConfig {
        epsilon,
        ..cfg.solver.clone()
    };
    let out = Solver::new(&data.graph, &data.labels, solver_cfg)?
        .with_ground_truth(&data.truth)?
        .run(&x0)?;
    let nest_time = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let (_, lp_trace) =
        label_propagation(&data.graph, &data.labels, cfg.lp_iters, &x0, Some(&data.truth))?;
    let lp_time = started.elapsed().as_secs_f64();

    let (curve_sim, sim_time) = match &cfg.sim {
        Some(sim_cfg) => {
            let started = Instant::now();
            let sim_cfg = SimConfig {
                eps: if cfg.epsilon_scale.is_some() { epsilon } else { sim_cfg.eps },
                ..sim_cfg.clone()
            };
            let out = init_sim(&data.graph, &data.labels, &sim_cfg, &x0)?
                .with_ground_truth(&data.truth)?
                .run()?;
            let curve: Vec<f64> = out.snapshots.iter().filter_map(|s| s.nmse).collect();
            (Some(curve), Some(started.elapsed().as_secs_f64()))
        }
        None => (None, None),
    };

    let curve_nest = out.trace.nmse_curve();
    let curve_lp = lp_trace.nmse_curve();
    Ok(RunResult {
        run,
        seed,
        epsilon,
        nmse_nest: *curve_nest.last().unwrap(),
        nmse_lp: *curve_lp.last().unwrap(),
        nmse_sim: curve_sim.as_ref().map(|c| *c.last().unwrap()),
        curve_nest,
        curve_lp,
        curve_sim,
        wall_time: WallTime {
            nest: nest_time,
            lp: lp_time,
            sim: sim_time,
        },
    })
}

/// Runs `monte_carlo_runs` independent instances in parallel, each with a
/// freshly drawn graph, cluster levels and sampling set.
///
/// Aggregation happens in run order, so the result does not depend on the
/// number of worker threads. Failed runs are listed in the summary, which is
/// then marked incomplete; if every run fails the first error is returned.
pub fn run_compare(cfg: &ExperimentConfig) -> Result<Comparison> {
    cfg.validate()?;
    let outcomes: Vec<(usize, u64, Result<RunResult>)> = (0..cfg.monte_carlo_runs)
        .into_par_iter()
        .map(|run| {
            let gen = cfg.generator_for(run);
            let outcome = generate_two_cluster(&gen).and_then(|data| run_instance(cfg, run, gen.seed, &data));
            (run, gen.seed, outcome)
        })
        .collect();
    let mut results = Vec::new();
    let mut failed_runs = Vec::new();
    let mut first_error = None;
    for (run, seed, outcome) in outcomes {
        match outcome {
            Ok(r) => results.push(r),
            Err(e) => {
                failed_runs.push(FailedRun {
                    run,
                    seed,
                    error: e.to_string(),
                });
                first_error.get_or_insert(e);
            }
        }
    }
    if results.is_empty() {
        return Err(first_error.expect("at least one run"));
    }

    let runs = results.len() as f64;
    let iterations = cfg.iterations();
    let mean = |f: &dyn Fn(&RunResult) -> f64| results.iter().map(f).sum::<f64>() / runs;
    let has_sim = cfg.sim.is_some();

    let curves = (0..iterations)
        .map(|k| CurvePoint {
            k,
            nmse_nest: mean(&|r| r.curve_nest[k]),
            nmse_lp: mean(&|r| r.curve_lp[k]),
            nmse_sim: has_sim.then(|| mean(&|r| r.curve_sim.as_ref().unwrap()[k])),
        })
        .collect();

    let wall_time = WallTime {
        nest: results.iter().map(|r| r.wall_time.nest).sum(),
        lp: results.iter().map(|r| r.wall_time.lp).sum(),
        sim: has_sim.then(|| results.iter().filter_map(|r| r.wall_time.sim).sum()),
    };
    let summary = RunSummary {
        runs: results.len(),
        iterations,
        nmse_nest: mean(&|r| r.nmse_nest),
        nmse_lp: mean(&|r| r.nmse_lp),
        nmse_sim: has_sim.then(|| mean(&|r| r.nmse_sim.unwrap())),
        nest_better_runs: results.iter().filter(|r| r.nmse_nest < r.nmse_lp).count(),
        per_run: results,
        complete: failed_runs.is_empty(),
        failed_runs,
        wall_time,
    };
    Ok(Comparison { summary, curves })
}
