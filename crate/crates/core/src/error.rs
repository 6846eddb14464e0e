use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("node {0} has zero degree; normalized Laplacian undefined")]
    ZeroDegreeNode(usize),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("eigensolver failed to converge: {0}")]
    ConvergenceFailure(String),

    #[error("secular root {index} could not be bracketed ({detail})")]
    BracketFailure { index: usize, detail: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("plan does not match graph: {0}")]
    PlanMismatch(String),

    #[error("operator of size {n} exceeds dense limit {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("graph is disconnected")]
    Disconnected,

    #[error("linear solver did not converge after {iterations} iterations (residual {residual:e})")]
    SolverNotConverged { iterations: usize, residual: f64 },

    #[error("interface has no edges")]
    EmptyInterface,

    #[error("spectral value {value} outside filter domain [0, {max}]")]
    Domain { value: f64, max: f64 },

    #[error("layer configuration does not match factorization: {0}")]
    ConfigMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
