use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("one-to-one violated: vertex {vertex} maps two colors to {target}")]
    OneToOneViolated { vertex: usize, target: usize },

    #[error("target {target} out of range for vertex {vertex} (n = {n})")]
    TargetOutOfRange { vertex: usize, target: usize, n: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("structural error in field `{field}`: {message}")]
    Structure { field: &'static str, message: String },

    #[error("chain has {} recurrent classes (expected exactly one)", .0.len())]
    MultipleRecurrentClasses(Vec<Vec<usize>>),

    #[error("target set is not almost surely reachable from the start distribution")]
    UnreachableTarget,

    #[error("state space of {states} states exceeds the configured cap of {cap}")]
    StateSpaceTooLarge { states: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("row {row} sums to {sum} instead of 1")]
    NotStochastic { row: usize, sum: f64 },

    #[error("{what} did not converge after {iterations} iterations (last change {last_delta:e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        last_delta: f64,
    },

    #[error("singular linear system")]
    Singular,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
