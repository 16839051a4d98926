use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate metric at {at:?}")]
    DegenerateMetric { at: Vec<f64> },

    #[error("point {at:?} outside chart range: {reason}")]
    Domain { at: Vec<f64>, reason: String },

    #[error("degenerate plane: |v ^ w|^2 = {area2:e}")]
    DegeneratePlane { area2: f64 },

    #[error("frame is not orthonormal (residual {residual:e})")]
    Frame { residual: f64 },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("map is not strictly area decreasing: min p = {min_p}")]
    NotAreaDecreasing { min_p: f64 },

    #[error("p = {p} <= 0 at node {node}")]
    NonPositiveP { p: f64, node: usize },

    #[error("corrupted flow state: {0}")]
    State(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid value for `{key}`: {reason}")]
    Validation { key: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
