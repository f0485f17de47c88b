use thiserror::Error;

/// Errors raised by the reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh request: {0}")]
    Mesh(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular stiffness matrix: {0}")]
    SingularStiffness(String),

    #[error("resonant frequency omega = {omega}: {detail}")]
    Resonant { omega: f64, detail: String },

    #[error("point ({x}, {y}) lies outside the source mesh")]
    OutsideMesh { x: f64, y: f64 },

    #[error("empty test space: the inversion mesh has no interior vertex")]
    EmptyTestSpace,

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("rank deficient normal system (smallest Ritz value {smallest_ritz:e}): {detail}")]
    RankDeficient { smallest_ritz: f64, detail: String },

    #[error("eigen iteration did not converge after {iterations} iterations (max residual {max_residual:e})")]
    NoConvergence {
        iterations: usize,
        max_residual: f64,
        residuals: Vec<f64>,
    },

    #[error("left inverse does not exist; singular values {singular_values:?}")]
    NotLeftInvertible { singular_values: Vec<f64> },

    #[error("resolvent integration blew up after t = {last_valid_t}")]
    BlowUp { last_valid_t: f64 },

    #[error("exact map has zero norm")]
    ZeroExactNorm,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
