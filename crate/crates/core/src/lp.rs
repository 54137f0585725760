//! Label propagation baseline.
//!
//! Clamped harmonic iteration: every unlabeled node takes the weighted
//! average of its neighbors from the previous sweep, labeled nodes are reset
//! to their labels. Fixed points minimize the Laplacian quadratic form
//! `xᵀ(D − W)x` subject to the labels.

use crate::error::{Error, Result};
use crate::graph::{check_len, nmse, EmpiricalGraph, GraphSignal, LabelSet};
use crate::calculus::local_variation_unchecked;
use crate::solver::empirical_error;
use crate::trace::{SolverTrace, TraceRecord};

/// Runs `iters` synchronous sweeps from `x0`.
///
/// Trace records use `mu = 0` and report the total variation in `f_mu`.
pub fn label_propagation(
    g: &EmpiricalGraph,
    labels: &LabelSet,
    iters: usize,
    x0: &[f64],
    truth: Option<&[f64]>,
) -> Result<(GraphSignal, SolverTrace)> {
    check_len(g, x0)?;
    labels.check_graph(g)?;
    if let Some(t) = truth {
        check_len(g, t)?;
    }
    if iters == 0 {
        return Err(Error::InvalidConfig("label propagation needs at least one iteration".into()));
    }
    let clamp = labels.dense(g.node_count());
    if let Some(i) = (0..g.node_count()).find(|&i| clamp[i].is_none() && g.combinatorial_degree(i) == 0) {
        return Err(Error::IsolatedUnlabeled(i));
    }
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    let degree: Vec<f64> = (0..g.node_count()).map(|i| g.weights(i).iter().sum()).collect();

    let mut x = x0.to_vec();
    let mut trace = SolverTrace::default();
    for k in 0..iters {
        x = (0..g.node_count())
            .map(|i| match clamp[i] {
                Some(y) => y,
                None => {
                    let s: f64 = g
                        .neighbors(i)
                        .iter()
                        .zip(g.weights(i))
                        .map(|(&j, w)| w * x[j])
                        .sum();
                    s / degree[i]
                }
            })
            .collect();
        let tv = local_variation_unchecked(g, &x).iter().sum();
        trace.records.push(TraceRecord {
            k,
            mu: 0.0,
            f_mu: tv,
            tv,
            emp_err: empirical_error(&x, labels),
            lambda_eps: 0.0,
            nmse: truth.map(|t| nmse(&x, t)),
        });
    }
    Ok((x.into(), trace))
}
