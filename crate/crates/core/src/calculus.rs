//! Discrete calculus on an [`EmpiricalGraph`].
//!
//! The gradient of a signal `x` assigns to every directed edge `(i, j)` the
//! value `√W_ij (x_j − x_i)`. The divergence is the negative adjoint of the
//! gradient with respect to the Frobenius and Euclidean inner products:
//!
//! ```text
//! (div P)_i = Σ_{j ∈ N(i)} √W_ij P_ij − √W_ji P_ji
//! ```
//!
//! Row `i` of a field holds the entries `P_ij` for `j ∈ N(i)`, stored in the
//! graph's slot order.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{check_len, EmpiricalGraph, GraphSignal};

/// Real values on the directed edges of a graph, aligned with its slots.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeField {
    values: Vec<f64>,
}

impl EdgeField {
    pub fn zeros(g: &EmpiricalGraph) -> Self {
        Self {
            values: vec![0.0; g.slot_count()],
        }
    }

    /// Wraps slot-aligned values.
    pub fn from_slots(g: &EmpiricalGraph, values: Vec<f64>) -> Result<Self> {
        if values.len() != g.slot_count() {
            return Err(Error::LengthMismatch {
                expected: g.slot_count(),
                actual: values.len(),
            });
        }
        Ok(Self { values })
    }

    /// Builds a field from sparse `(i, j, P_ij)` entries; unlisted entries are
    /// zero. Fails if some `(i, j)` is not an edge.
    pub fn from_entries<I>(g: &EmpiricalGraph, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut field = Self::zeros(g);
        for (i, j, v) in entries {
            let slot = g.find_slot(i, j).ok_or(Error::OutsideSupport { i, j })?;
            field.values[slot] = v;
        }
        Ok(field)
    }

    pub fn slots(&self) -> &[f64] {
        &self.values
    }

    pub fn slots_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row<'a>(&'a self, g: &EmpiricalGraph, i: usize) -> &'a [f64] {
        &self.values[g.slots(i)]
    }

    pub fn get(&self, g: &EmpiricalGraph, i: usize, j: usize) -> f64 {
        g.find_slot(i, j).map_or(0.0, |s| self.values[s])
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &EdgeField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Euclidean norm of every row.
    pub fn row_norms(&self, g: &EmpiricalGraph) -> Vec<f64> {
        (0..g.node_count())
            .map(|i| self.row(g, i).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }

    /// Debug dump, one `i<TAB>j<TAB>value` line per slot with 1-based nodes.
    pub fn to_tsv(&self, g: &EmpiricalGraph) -> String {
        let mut out = String::new();
        for i in 0..g.node_count() {
            for s in g.slots(i) {
                writeln!(out, "{}\t{}\t{}", i + 1, g.slot_target(s) + 1, self.values[s]).unwrap();
            }
        }
        out
    }
}

/// Graph gradient `∇x`.
pub fn graph_gradient(g: &EmpiricalGraph, x: &[f64]) -> Result<EdgeField> {
    check_len(g, x)?;
    Ok(gradient_unchecked(g, x))
}

pub(crate) fn gradient_unchecked(g: &EmpiricalGraph, x: &[f64]) -> EdgeField {
    let mut values = Vec::with_capacity(g.slot_count());
    for (i, &xi) in x.iter().enumerate() {
        for s in g.slots(i) {
            values.push(g.slot_sqrt_weight(s) * (x[g.slot_target(s)] - xi));
        }
    }
    EdgeField { values }
}

/// Graph divergence `div P`.
pub fn divergence(g: &EmpiricalGraph, p: &EdgeField) -> Result<GraphSignal> {
    if p.values.len() != g.slot_count() {
        return Err(Error::LengthMismatch {
            expected: g.slot_count(),
            actual: p.values.len(),
        });
    }
    Ok(divergence_unchecked(g, p))
}

pub(crate) fn divergence_unchecked(g: &EmpiricalGraph, p: &EdgeField) -> GraphSignal {
    (0..g.node_count())
        .map(|i| {
            g.slots(i)
                .map(|s| g.slot_sqrt_weight(s) * (p.values[s] - p.values[g.mirror(s)]))
                .sum()
        })
        .collect()
}

/// Local variations `‖∇_i x‖₂` for every node.
pub fn local_variation(g: &EmpiricalGraph, x: &[f64]) -> Result<Vec<f64>> {
    check_len(g, x)?;
    Ok(local_variation_unchecked(g, x))
}

pub(crate) fn local_variation_unchecked(g: &EmpiricalGraph, x: &[f64]) -> Vec<f64> {
    (0..g.node_count())
        .map(|i| {
            g.slots(i)
                .map(|s| {
                    let d = x[g.slot_target(s)] - x[i];
                    g.slot_weight(s) * d * d
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Total variation `Σ_i ‖∇_i x‖₂`.
pub fn total_variation(g: &EmpiricalGraph, x: &[f64]) -> Result<f64> {
    Ok(local_variation(g, x)?.iter().sum())
}

/// Returns `(‖∇x‖_F², xᵀ(D − W)x)`. The first equals twice the second for
/// every graph and signal.
pub fn laplacian_quadratic_check(g: &EmpiricalGraph, x: &[f64]) -> Result<(f64, f64)> {
    let lhs = graph_gradient(g, x)?.frobenius_norm().powi(2);
    let mut rhs = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        let mut lx = 0.0;
        for s in g.slots(i) {
            lx += g.slot_weight(s) * (xi - x[g.slot_target(s)]);
        }
        rhs += xi * lx;
    }
    Ok((lhs, rhs))
}

/// Result of [`operator_norm_estimate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorNorm {
    /// Estimate of `‖∇‖_op`, never above the true value up to rounding.
    pub value: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit before the tolerance was met.
    pub converged: bool,
}

pub const POWER_ITERATION_CAP: usize = 100_000;

/// Estimates `‖∇‖_op` by power iteration on `∇*∇ = −div ∇`.
///
/// The reported value is the square root of the Rayleigh quotient
/// `‖∇v‖² / ‖v‖²`, stopping once successive estimates agree to relative
/// tolerance `tol`.
pub fn operator_norm_estimate(g: &EmpiricalGraph, tol: f64, seed: u64) -> Result<OperatorNorm> {
    if g.edge_count() == 0 {
        return Err(Error::NoEdges);
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig("tolerance must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..g.node_count())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    normalize(&mut v);

    let mut previous = 0.0;
    for iteration in 1..=POWER_ITERATION_CAP {
        let grad = gradient_unchecked(g, &v);
        let rayleigh = grad.dot(&grad);
        let estimate = rayleigh.sqrt();
        if iteration > 1 && (estimate - previous).abs() <= tol * estimate {
            return Ok(OperatorNorm {
                value: estimate,
                iterations: iteration,
                converged: true,
            });
        }
        previous = estimate;
        let mut next = divergence_unchecked(g, &grad).into_inner();
        next.iter_mut().for_each(|x| *x = -*x);
        if normalize(&mut next) == 0.0 {
            // Start vector was in the kernel; the constant vector is the only
            // such direction on a connected graph, so perturb and continue.
            next = (0..g.node_count()).map(|i| i as f64).collect();
            normalize(&mut next);
        }
        v = next;
    }
    Ok(OperatorNorm {
        value: previous,
        iterations: POWER_ITERATION_CAP,
        converged: false,
    })
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge(w: f64) -> EmpiricalGraph {
        EmpiricalGraph::from_edges(2, [(0, 1, w)]).unwrap()
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = EmpiricalGraph::from_edges(3, [(0, 1, 2.0), (1, 2, 0.5)]).unwrap();
        let p = graph_gradient(&g, &[4.0; 3]).unwrap();
        assert!(p.slots().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_single_edge() {
        let g = edge(1.0);
        let p = graph_gradient(&g, &[0.0, 1.0]).unwrap();
        assert_eq!(p.get(&g, 0, 1), 1.0);
        assert_eq!(p.get(&g, 1, 0), -1.0);

        let g = edge(4.0);
        let p = graph_gradient(&g, &[0.0, 1.0]).unwrap();
        assert_eq!(p.get(&g, 0, 1), 2.0);
        assert_eq!(p.get(&g, 1, 0), -2.0);
    }

    #[test]
    fn gradient_length_mismatch() {
        assert!(matches!(
            graph_gradient(&edge(1.0), &[0.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn divergence_examples() {
        let g = edge(1.0);
        let zero = divergence(&g, &EdgeField::zeros(&g)).unwrap();
        assert_eq!(&zero[..], &[0.0, 0.0]);
        let p = EdgeField::from_entries(&g, [(0, 1, 1.0)]).unwrap();
        assert_eq!(&divergence(&g, &p).unwrap()[..], &[1.0, -1.0]);
        let grad = graph_gradient(&g, &[3.0, 3.0]).unwrap();
        assert_eq!(&divergence(&g, &grad).unwrap()[..], &[0.0, 0.0]);
    }

    #[test]
    fn field_outside_support() {
        let g = EmpiricalGraph::from_edges(3, [(0, 1, 1.0)]).unwrap();
        assert!(matches!(
            EdgeField::from_entries(&g, [(0, 2, 1.0)]),
            Err(Error::OutsideSupport { i: 0, j: 2 })
        ));
        assert!(EdgeField::from_slots(&g, vec![0.0; 3]).is_err());
    }

    #[test]
    fn total_variation_examples() {
        let g = edge(1.0);
        assert_eq!(total_variation(&g, &[5.0, 5.0]).unwrap(), 0.0);
        assert_eq!(total_variation(&g, &[0.0, 1.0]).unwrap(), 2.0);
        assert_eq!(total_variation(&g, &[0.0, -3.0]).unwrap(), 6.0);
    }

    #[test]
    fn tv_vanishes_on_piecewise_constant_components() {
        let g = EmpiricalGraph::from_edges(4, [(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert_eq!(total_variation(&g, &[1.0, 1.0, -2.0, -2.0]).unwrap(), 0.0);
    }

    #[test]
    fn laplacian_single_edge() {
        let g = edge(1.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (lhs, rhs) = laplacian_quadratic_check(&g, &[s, -s]).unwrap();
        assert!((lhs - 4.0).abs() < 1e-14);
        assert!((rhs - 2.0).abs() < 1e-14);
        assert_eq!(laplacian_quadratic_check(&g, &[1.0, 1.0]).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn operator_norm_single_edge() {
        for w in [1.0, 4.0, 0.3] {
            let est = operator_norm_estimate(&edge(w), 1e-12, 7).unwrap();
            assert!(est.converged);
            assert!((est.value - 2.0 * w.sqrt()).abs() <= 1e-8 * est.value);
        }
    }

    #[test]
    fn operator_norm_edgeless_errors() {
        let g = EmpiricalGraph::from_edges(3, []).unwrap();
        assert!(matches!(
            operator_norm_estimate(&g, 1e-6, 0),
            Err(Error::NoEdges)
        ));
    }

    #[test]
    fn field_dump() {
        let g = edge(1.0);
        let p = EdgeField::from_entries(&g, [(0, 1, 0.5), (1, 0, -1.0)]).unwrap();
        assert_eq!(p.to_tsv(&g), "1\t2\t0.5\n2\t1\t-1\n");
    }
}
