//! Semi-supervised learning of graph signals by total-variation
//! minimization, with a label-propagation baseline and a message-passing
//! simulator of the distributed solver.

pub mod calculus;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod lp;
pub mod sim;
pub mod solver;
pub mod trace;

pub use calculus::{divergence, graph_gradient, local_variation, total_variation, EdgeField};
pub use error::{Error, Result};
pub use graph::{nmse, EmpiricalGraph, GraphSignal, LabelSet};
pub use lp::label_propagation;
pub use sim::{init_sim, ResidualMode, SimConfig, SimOutput, Simulator};
pub use solver::{solve, Accumulation, LipschitzMode, SolveOutput, Solver, SolverConfig, StopRule};
pub use trace::{SolverTrace, TraceRecord};
