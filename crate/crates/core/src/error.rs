use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("cell mass at index {index} must be strictly positive, found {value}")]
    NonPositiveWeight { index: usize, value: f64 },

    #[error("negative entry in {what} at ({row}, {col}): {value}")]
    NegativeEntry {
        what: &'static str,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("column {column} violates mass conservation by {deviation:.3e}")]
    MassConservation { column: usize, deviation: f64 },

    #[error("operator is not stochastic: {detail}")]
    NotStochastic { detail: String },

    #[error("model is not irreducible: {detail}")]
    NotIrreducible { detail: String },

    #[error("time {t} is not on the evaluation grid (cell width {delta})")]
    OffGridTime { t: f64, delta: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("audit failed at t = {t}: {check} exceeded tolerance by {margin:.3e}")]
    AuditFailure {
        t: f64,
        check: &'static str,
        margin: f64,
    },

    #[error("search exhausted: {0}")]
    SearchExhausted(String),

    #[error("numerical solver failure: {0}")]
    SolverFailure(String),
}
