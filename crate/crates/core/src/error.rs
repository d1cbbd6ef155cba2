use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph must have at least one node")]
    EmptyGraph,
    #[error("node id {id} out of range for {num_nodes} nodes")]
    NodeOutOfRange { id: usize, num_nodes: usize },
    #[error("node set is empty")]
    EmptyNodeSet,
    #[error("graph has no sampleable edges")]
    EmptyEdgeSet,
    #[error("every node is isolated; node distribution has zero mass")]
    AllIsolated,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("batch contains no loss-contributing training nodes")]
    NoTrainingNodes,
    #[error("non-finite loss {loss} at iteration {iteration}")]
    NonFiniteLoss { iteration: u64, loss: f64 },
    #[error("all edge aggregates are zero")]
    ZeroAggregates,
    #[error("edge {edge} has probability 0 but a nonzero aggregate (infinite variance)")]
    InfiniteVariance { edge: usize },
    #[error("evaluation set is empty")]
    EmptyEvalSet,
    #[error("no simple {degree}-regular graph on {nodes} nodes")]
    InfeasibleDegree { degree: usize, nodes: usize },
    #[error("block {0} has zero nodes")]
    EmptyBlock(usize),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("inconsistent dataset: {0}")]
    Inconsistent(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed artifact: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("artifact bound to graph {found:016x}, expected {expected:016x}")]
    GraphHashMismatch { expected: u64, found: u64 },
}

/// Coarse failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidConfig(_) => ErrorClass::Usage,
            Error::NonFiniteLoss { .. }
            | Error::ZeroAggregates
            | Error::InfiniteVariance { .. }
            | Error::AllIsolated => ErrorClass::Numeric,
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
