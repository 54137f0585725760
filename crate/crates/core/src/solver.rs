//! Constrained total-variation minimization with Nesterov smoothing.
//!
//! Solves `min ‖x‖_TV` subject to `emp_err(x) ≤ ε` by minimizing the
//! smoothed objective
//!
//! ```text
//! f_μ(x) = max_{P ∈ 𝒫} ⟨P, ∇x⟩_F − (μ/2)‖P‖_F²,   𝒫 = {P : ‖p_i‖₂ ≤ 1 ∀i}
//! ```
//!
//! with Nesterov's optimal first-order scheme. Both projections onto the
//! feasible set have closed forms, so every iteration costs two gradient /
//! divergence sweeps over the edges.
//!
//! With `kappa = 1` the smoothing parameter stays at `mu0`; with `kappa < 1`
//! it decays geometrically as `mu0 · kappa^k`.

use serde::{Deserialize, Serialize};

use crate::calculus::{
    divergence_unchecked, gradient_unchecked, local_variation_unchecked, EdgeField,
};
use crate::error::{Error, Result};
use crate::graph::{check_len, nmse, EmpiricalGraph, GraphSignal, LabelSet};
use crate::trace::{SolverTrace, TraceRecord};

/// Which bound on `‖∇‖_op²` feeds the Lipschitz constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LipschitzMode {
    /// `‖∇‖_op² ≤ 2·d_max`, giving `L̂ = 2·d_max/μ`. Not a valid bound in
    /// general: a single unit edge already has `‖∇‖_op² = 4`.
    Paper,
    /// `‖∇‖_op² ≤ 4·d_max`, giving `L̂ = 4·d_max/μ`.
    #[default]
    Corrected,
}

impl LipschitzMode {
    /// Upper bound on `‖∇‖_op²` used by this mode.
    pub fn operator_norm_sq(self, d_max: f64) -> f64 {
        match self {
            LipschitzMode::Paper => 2.0 * d_max,
            LipschitzMode::Corrected => 4.0 * d_max,
        }
    }
}

impl std::str::FromStr for LipschitzMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "paper" => Ok(Self::Paper),
            "corrected" => Ok(Self::Corrected),
            other => Err(format!("unknown lipschitz mode `{other}`")),
        }
    }
}

/// How the weighted gradient history enters the `z` step when `μ` varies.
///
/// Both agree for a fixed smoothing parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accumulation {
    /// `q̃_k = q̃_{k−1} − (α_k/L̂_k) g_k`: each gradient keeps the step size
    /// of the iteration that produced it.
    #[default]
    PerStep,
    /// `q̃_k = x_0 − (Σ_l α_l g_l)/L̂_k`: the whole history is rescaled by the
    /// current step size, which shrinks old steps as `μ` decays.
    Rescaled,
}

impl std::str::FromStr for Accumulation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "per_step" | "per-step" => Ok(Self::PerStep),
            "rescaled" => Ok(Self::Rescaled),
            other => Err(format!("unknown accumulation `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum StopRule {
    #[default]
    FixedIters,
    /// Stop once `|f_k − f_{k−1}| ≤ threshold · |f_{k−1}|`.
    RelObjective { threshold: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub mu0: f64,
    pub kappa: f64,
    pub max_iters: usize,
    pub lipschitz_mode: LipschitzMode,
    pub accumulation: Accumulation,
    pub stop: StopRule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            mu0: 1.0,
            kappa: 1.0,
            max_iters: 2000,
            lipschitz_mode: LipschitzMode::Corrected,
            accumulation: Accumulation::PerStep,
            stop: StopRule::FixedIters,
        }
    }
}

/// Decay factor that shrinks `μ` by `2·10⁻⁵` over 2000 iterations.
pub fn paper_kappa() -> f64 {
    2e-5f64.powf(1.0 / 2000.0)
}

impl SolverConfig {
    /// The accelerated setup used for the two-cluster benchmark.
    pub fn accelerated(epsilon: f64) -> Self {
        Self {
            epsilon,
            kappa: paper_kappa(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(m.to_owned()));
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return fail("epsilon must be finite and non-negative");
        }
        if !(self.mu0 > 0.0 && self.mu0.is_finite()) {
            return fail("mu0 must be positive");
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return fail("kappa must lie in (0, 1]");
        }
        if self.max_iters == 0 {
            return fail("max_iters must be positive");
        }
        if let StopRule::RelObjective { threshold } = self.stop {
            if !(threshold > 0.0) {
                return fail("relative-objective threshold must be positive");
            }
        }
        Ok(())
    }

    /// Smoothing parameter at zero-based iteration `k`.
    pub fn mu_at(&self, k: usize) -> f64 {
        if self.kappa == 1.0 {
            self.mu0
        } else {
            self.mu0 * self.kappa.powf(k as f64)
        }
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("smoothing parameter must be positive, got {mu}")))
    }
}

/// `√((1/2M) Σ_{i∈S} (x_i − y_i)²)`.
pub fn empirical_error(x: &[f64], labels: &LabelSet) -> f64 {
    let sum: f64 = labels.iter().map(|(i, y)| (x[i] - y) * (x[i] - y)).sum();
    (sum / (2.0 * labels.len() as f64)).sqrt()
}

/// Maximizer of `⟨P, ∇x⟩ − (μ/2)‖P‖²` over `𝒫`: row `i` is
/// `∇_i x / max{μ, ‖∇_i x‖}`.
pub fn dual_field(g: &EmpiricalGraph, x: &[f64], mu: f64) -> Result<EdgeField> {
    check_len(g, x)?;
    check_mu(mu)?;
    Ok(dual_field_unchecked(g, x, mu))
}

fn dual_field_unchecked(g: &EmpiricalGraph, x: &[f64], mu: f64) -> EdgeField {
    let mut p = gradient_unchecked(g, x);
    let norms = local_variation_unchecked(g, x);
    for (i, norm) in norms.into_iter().enumerate() {
        let scale = 1.0 / mu.max(norm);
        for s in g.slots(i) {
            p.slots_mut()[s] *= scale;
        }
    }
    p
}

/// Per-node Huber function: the value of `max_{‖p‖≤1} ⟨p, a⟩ − (μ/2)‖p‖²`
/// for `‖a‖ = norm`.
pub fn huber(norm: f64, mu: f64) -> f64 {
    if norm >= mu {
        norm - mu / 2.0
    } else {
        norm * norm / (2.0 * mu)
    }
}

/// Smoothed total variation `f_μ(x) = Σ_i huber(‖∇_i x‖, μ)`.
pub fn smoothed_objective(g: &EmpiricalGraph, x: &[f64], mu: f64) -> Result<f64> {
    check_len(g, x)?;
    check_mu(mu)?;
    Ok(smoothed_objective_unchecked(g, x, mu))
}

fn smoothed_objective_unchecked(g: &EmpiricalGraph, x: &[f64], mu: f64) -> f64 {
    local_variation_unchecked(g, x)
        .into_iter()
        .map(|a| huber(a, mu))
        .sum()
}

/// `∇f_μ(x) = −div P_μ(x)`.
pub fn smoothed_gradient(g: &EmpiricalGraph, x: &[f64], mu: f64) -> Result<GraphSignal> {
    check_len(g, x)?;
    check_mu(mu)?;
    Ok(smoothed_gradient_unchecked(g, x, mu))
}

fn smoothed_gradient_unchecked(g: &EmpiricalGraph, x: &[f64], mu: f64) -> GraphSignal {
    let mut grad = divergence_unchecked(g, &dual_field_unchecked(g, x, mu));
    grad.iter_mut().for_each(|v| *v = -*v);
    grad
}

/// Step-size constant `L̂ = ‖∇‖_op² / μ` with the mode's operator-norm bound.
pub fn lipschitz_constant(d_max: f64, mu: f64, mode: LipschitzMode) -> f64 {
    mode.operator_norm_sq(d_max) / mu
}

/// Euclidean projection onto `{x : emp_err(x) ≤ ε}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub signal: GraphSignal,
    /// Scaled dual variable `max{0, r/ε − 1}`; `+∞` for `ε = 0 < r`.
    pub lambda_eps: f64,
    /// Empirical error of the input.
    pub residual: f64,
}

/// Projects `q` onto the feasible set.
///
/// With `r = emp_err(q) > ε`, labeled entries are pulled towards their labels,
/// `v_i = y_i + (ε/r)(q_i − y_i)`; unlabeled entries are never touched.
pub fn project_feasible(q: &[f64], labels: &LabelSet, eps: f64) -> Result<Projection> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidConfig(format!("epsilon must be non-negative, got {eps}")));
    }
    if labels.max_node() >= q.len() {
        return Err(Error::NodeOutOfRange {
            index: labels.max_node(),
            node_count: q.len(),
        });
    }
    Ok(project_unchecked(q.to_vec(), labels, eps))
}

fn project_unchecked(mut v: Vec<f64>, labels: &LabelSet, eps: f64) -> Projection {
    let r = empirical_error(&v, labels);
    let lambda_eps = if r <= eps {
        0.0
    } else if eps == 0.0 {
        for (i, y) in labels.iter() {
            v[i] = y;
        }
        f64::INFINITY
    } else {
        let shrink = eps / r;
        for (i, y) in labels.iter() {
            v[i] = y + shrink * (v[i] - y);
        }
        r / eps - 1.0
    };
    Projection {
        signal: v.into(),
        lambda_eps,
        residual: r,
    }
}

/// Iterations after which the non-smooth problem is solved to accuracy
/// `delta` when `μ = delta / N`: `(2/δ)·radius·√(N·‖∇‖_op²)`, with `radius`
/// bounding `‖x̂_μ − x0‖₂`.
pub fn iteration_bound(delta: f64, radius: f64, d_max: f64, n: usize, mode: LipschitzMode) -> f64 {
    let op_sq = mode.operator_norm_sq(d_max);
    (2.0 / delta) * radius * (n as f64 * op_sq).sqrt()
}

/// Smoothing parameter `μ = δ / N` matching [`iteration_bound`].
pub fn smoothing_for_accuracy(delta: f64, n: usize) -> f64 {
    delta / n as f64
}

/// Iterate state of the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    /// Completed iterations.
    pub k: usize,
    pub x: GraphSignal,
    pub v: GraphSignal,
    pub z: GraphSignal,
    /// `Σ_l α_l g_l` over completed iterations.
    pub g_accum: GraphSignal,
    /// `Σ_l (α_l/L̂_l) g_l` over completed iterations.
    pub step_accum: GraphSignal,
    /// Weight of the next gradient, `(k + 1)/2`.
    pub alpha: f64,
    pub x0: GraphSignal,
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub labeling: GraphSignal,
    pub trace: SolverTrace,
}

/// Solver bound to one problem instance.
#[derive(Debug, Clone)]
pub struct Solver<'a> {
    graph: &'a EmpiricalGraph,
    labels: &'a LabelSet,
    cfg: SolverConfig,
    d_max: f64,
    truth: Option<&'a [f64]>,
}

impl<'a> Solver<'a> {
    pub fn new(graph: &'a EmpiricalGraph, labels: &'a LabelSet, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        labels.check_graph(graph)?;
        if graph.edge_count() == 0 {
            return Err(Error::NoEdges);
        }
        if !graph.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(Self {
            graph,
            labels,
            d_max: graph.max_degree(),
            cfg,
            truth: None,
        })
    }

    /// Records NMSE against `truth` in every trace record.
    pub fn with_ground_truth(mut self, truth: &'a [f64]) -> Result<Self> {
        check_len(self.graph, truth)?;
        self.truth = Some(truth);
        Ok(self)
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn lipschitz_at(&self, k: usize) -> f64 {
        lipschitz_constant(self.d_max, self.cfg.mu_at(k), self.cfg.lipschitz_mode)
    }

    pub fn start(&self, x0: &[f64]) -> Result<SolverState> {
        GraphSignal::from(x0.to_vec()).validate(self.graph)?;
        let n = x0.len();
        Ok(SolverState {
            k: 0,
            x: x0.to_vec().into(),
            v: x0.to_vec().into(),
            z: x0.to_vec().into(),
            g_accum: GraphSignal::zeros(n),
            step_accum: GraphSignal::zeros(n),
            alpha: 0.5,
            x0: x0.to_vec().into(),
        })
    }

    /// Performs one iteration and returns its diagnostics. On a non-finite
    /// iterate the state is left untouched.
    pub fn step(&self, state: &mut SolverState) -> Result<TraceRecord, usize> {
        let (g, labels, eps) = (self.graph, self.labels, self.cfg.epsilon);
        let k = state.k;
        let mu = self.cfg.mu_at(k);
        let lipschitz = self.lipschitz_at(k);

        let grad = smoothed_gradient_unchecked(g, &state.x, mu);
        let q: Vec<f64> = state
            .x
            .iter()
            .zip(grad.iter())
            .map(|(x, gr)| x - gr / lipschitz)
            .collect();
        let v = project_unchecked(q, labels, eps);

        let g_accum: Vec<f64> = state
            .g_accum
            .iter()
            .zip(grad.iter())
            .map(|(acc, gr)| acc + state.alpha * gr)
            .collect();
        let step_accum: Vec<f64> = state
            .step_accum
            .iter()
            .zip(grad.iter())
            .map(|(acc, gr)| acc + state.alpha / lipschitz * gr)
            .collect();
        let q_tilde: Vec<f64> = match self.cfg.accumulation {
            Accumulation::PerStep => state.x0.iter().zip(&step_accum).map(|(x0, acc)| x0 - acc).collect(),
            Accumulation::Rescaled => state
                .x0
                .iter()
                .zip(&g_accum)
                .map(|(x0, acc)| x0 - acc / lipschitz)
                .collect(),
        };
        let z = project_unchecked(q_tilde, labels, eps).signal;

        let tau = 2.0 / (k as f64 + 3.0);
        let x_next: GraphSignal = z
            .iter()
            .zip(v.signal.iter())
            .map(|(z, v)| tau * z + (1.0 - tau) * v)
            .collect();

        if x_next.iter().chain(v.signal.iter()).any(|a| !a.is_finite()) {
            return Err(k);
        }

        let record = TraceRecord {
            k,
            mu,
            f_mu: smoothed_objective_unchecked(g, &v.signal, mu),
            tv: local_variation_unchecked(g, &v.signal).iter().sum(),
            emp_err: empirical_error(&v.signal, labels),
            lambda_eps: v.lambda_eps,
            nmse: self.truth.map(|t| nmse(&v.signal, t)),
        };

        state.k += 1;
        state.x = x_next;
        state.v = v.signal;
        state.z = z;
        state.g_accum = g_accum.into();
        state.step_accum = step_accum.into();
        state.alpha += 0.5;
        Ok(record)
    }

    pub fn run(&self, x0: &[f64]) -> Result<SolveOutput> {
        let mut state = self.start(x0)?;
        let mut trace = SolverTrace::default();
        for _ in 0..self.cfg.max_iters {
            match self.step(&mut state) {
                Ok(record) => trace.records.push(record),
                Err(iteration) => {
                    return Err(Error::Diverged {
                        iteration,
                        trace: Box::new(trace),
                    })
                }
            }
            if let (StopRule::RelObjective { threshold }, [.., prev, last]) =
                (self.cfg.stop, trace.records.as_slice())
            {
                if (last.f_mu - prev.f_mu).abs() <= threshold * prev.f_mu.abs() {
                    break;
                }
            }
        }
        Ok(SolveOutput {
            labeling: state.v,
            trace,
        })
    }
}

/// Runs the solver from `x0` and returns the final `v_k` with its trace.
pub fn solve(
    g: &EmpiricalGraph,
    labels: &LabelSet,
    cfg: &SolverConfig,
    x0: &[f64],
) -> Result<SolveOutput> {
    Solver::new(g, labels, cfg.clone())?.run(x0)
}
