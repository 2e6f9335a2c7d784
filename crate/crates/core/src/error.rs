use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid group point: {0}")]
    InvalidPoint(String),

    #[error("invalid window or resolution: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("index mismatch: {0}")]
    IndexMismatch(String),

    #[error("family is not {0}-dense: {1} uncovered nodes (first at index {2})")]
    NotDense(String, usize, usize),

    #[error("family is not separated: members {0} and {1} overlap")]
    NotSeparated(usize, usize),

    #[error("kernel invalid: {0}")]
    KernelInvalid(String),

    #[error("gate `{gate}` failed: measured {measured:.6e} exceeds allowed {allowed:.6e}")]
    GateFailed {
        gate: String,
        measured: f64,
        allowed: f64,
    },

    #[error("no admissible epsilon on this window: {0}")]
    EpsilonUnattainable(String),

    #[error("series diverged: {0}")]
    SeriesDiverged(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
