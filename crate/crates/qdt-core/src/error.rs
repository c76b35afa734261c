use thiserror::Error;

/// Errors raised anywhere in the reconstruction pipeline.
#[derive(Debug, Error)]
pub enum QdtError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("detector series did not converge within {cap} photons per port (remaining bound {bound:.3e})")]
    SeriesTruncation { cap: usize, bound: f64 },

    #[error("model invalid: {0}")]
    ModelInvalid(String),

    #[error("infeasible constraints at coordinate {coordinate}: bounds sum to [{lo_sum}, {hi_sum}] but equality target is {target}")]
    Infeasible {
        coordinate: usize,
        lo_sum: f64,
        hi_sum: f64,
        target: f64,
    },

    #[error("solver stopped after {iterations} iterations with KKT residual {residual:.3e}")]
    MaxIterations {
        iterations: usize,
        residual: f64,
        best: Box<crate::qp::Solution>,
    },

    #[error("inconsistent reconstruction state at l={l}, j={j}, outcome {n}: {reason}")]
    InconsistentState {
        l: usize,
        j: usize,
        n: usize,
        reason: String,
    },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("size cap exceeded: {0}")]
    CapExceeded(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, QdtError>;
