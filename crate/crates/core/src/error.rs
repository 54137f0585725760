use std::path::PathBuf;

use thiserror::Error;

use crate::trace::SolverTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node index {index} out of range for graph with {node_count} nodes")]
    NodeOutOfRange { index: usize, node_count: usize },

    #[error("self-loop at node {0}")]
    SelfLoop(usize),

    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),

    #[error("edge ({i}, {j}) has non-positive or non-finite weight {weight}")]
    InvalidWeight { i: usize, j: usize, weight: f64 },

    #[error("graph must have at least one node")]
    EmptyGraph,

    #[error("graph has no edges")]
    NoEdges,

    #[error("graph is not connected")]
    Disconnected,

    #[error("signal has length {actual}, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("signal entry {index} is not finite")]
    NonFinite { index: usize },

    #[error("edge field entry ({i}, {j}) lies outside the edge set")]
    OutsideSupport { i: usize, j: usize },

    #[error("sampling set is empty")]
    EmptySamplingSet,

    #[error("node {0} appears twice in the sampling set")]
    DuplicateLabel(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("generator cannot satisfy constraints: {0}")]
    Infeasible(String),

    #[error("unlabeled node {0} has no neighbors")]
    IsolatedUnlabeled(usize),

    #[error("negative consensus energy {value} at node {node}")]
    NegativeEnergy { node: usize, value: f64 },

    #[error("iterate became non-finite at iteration {iteration}")]
    Diverged {
        iteration: usize,
        trace: Box<SolverTrace>,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
