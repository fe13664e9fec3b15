use thiserror::Error;

/// Errors raised by graph construction, the solvers and the model fits.
#[derive(Debug, Error)]
pub enum NetcohError {
    #[error("self-loop on node {0}")]
    SelfLoop(usize),

    #[error("node id {id} out of range for a graph with {n} nodes")]
    NodeOutOfRange { id: usize, n: usize },

    #[error("invalid weight {weight} on edge ({u}, {v})")]
    InvalidWeight { u: usize, v: usize, weight: f64 },

    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric (entry ({row}, {col}) differs from its transpose)")]
    NotSymmetric { row: usize, col: usize },

    /// The RNC system matrix is singular: no column-space direction of X
    /// may lie in the null space of the penalty.
    #[error("estimator does not exist: {0}; set --gamma > 0")]
    EstimatorDoesNotExist(String),

    #[error("all observations are censored; no events to fit")]
    NoEvents,

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("new nodes {0:?} have no path to a training node; use a positive prediction ridge")]
    IsolatedNewNodes(Vec<usize>),

    #[error("problem too large for dense evaluation: {size} > {limit}")]
    TooLarge { size: usize, limit: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, NetcohError>;
