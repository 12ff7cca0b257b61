use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: self-loop at vertex {vertex}")]
    SelfLoop { line: usize, vertex: usize },
    #[error("line {line}: duplicate edge ({u}, {v})")]
    DuplicateEdge { line: usize, u: usize, v: usize },
    #[error("line {line}: non-positive weight {weight}")]
    NonPositiveWeight { line: usize, weight: f64 },
    #[error("vertex {vertex} out of range for n = {n}")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("vertex {0} is isolated (degree 0)")]
    IsolatedVertex(usize),
    #[error("color class {0} is empty")]
    EmptyClass(usize),
    #[error("color {color} of vertex {vertex} is not below k = {k}")]
    ColorOutOfRange { vertex: usize, color: usize, k: usize },
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("vertex {0} appears in more than one set")]
    OverlappingSets(usize),
    #[error("set {set} is not independent: edge ({u}, {v})")]
    NotIndependent { set: usize, u: usize, v: usize },
    #[error("matrix is not symmetric at ({i}, {j})")]
    Asymmetric { i: usize, j: usize },
    #[error("bottom threshold rank {available} is below the requested {required}")]
    InsufficientRank { available: usize, required: usize },
    #[error("eigenspace dimension {dim} exceeds the rank cap {cap}")]
    RankCapExceeded { dim: usize, cap: usize },
    #[error("eigenspace above the threshold is empty")]
    EmptyEigenspace,
    #[error("net of {projected} points exceeds the cap of {cap}; coarsen the resolution")]
    NetTooLarge { projected: f64, cap: usize },
    #[error("model matrix nonzero pattern is disconnected")]
    DisconnectedModel,
    #[error("model matrix is not reversible at ({a}, {b})")]
    NotReversible { a: usize, b: usize },
    #[error("model entry ({a}, {b}) would be negative: {value}")]
    NegativeModelEntry { a: usize, b: usize, value: f64 },
    #[error("graph is not regular")]
    NonRegular,
    #[error("graph is disconnected")]
    Disconnected,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("retry budget exhausted: {0}")]
    RetryBudget(String),
    #[error("recovery failed: {0}")]
    RecoveryFailed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of an algorithm on valid input, as opposed to bad input.
    pub fn is_algorithmic(&self) -> bool {
        matches!(
            self,
            Error::RecoveryFailed(_) | Error::RetryBudget(_) | Error::InsufficientRank { .. } | Error::EmptyEigenspace
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
