//! Error type shared across the solver library.

use thiserror::Error;

/// Errors produced by problem construction, oracles, and solver loops.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite input in {context}")]
    NonFinite { context: &'static str },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("not strictly feasible: g(x) = {g} (need g(x) < 0)")]
    NotStrictlyFeasible { g: f64 },

    #[error("level parameter too large: r_ini = {r_ini} must be below r_tilde = {r_tilde}")]
    LevelTooLarge { r_ini: f64, r_tilde: f64 },

    #[error("line search diverged (last L_hat = {l_hat})")]
    LineSearchDiverged { l_hat: f64 },

    #[error("inner iteration cap {cap} exceeded at level r = {r}")]
    InnerCapExceeded { cap: u64, r: f64 },

    #[error("degenerate split: group {group} is empty in the {part} split")]
    DegenerateSplit { group: &'static str, part: &'static str },

    #[error("no feasible candidates: no record with g <= {tol}")]
    NoFeasibleCandidates { tol: f64 },

    #[error("unknown first-order method '{0}' (expected 'sgd' or 'agm')")]
    UnknownMethod(String),

    #[error("csv ingestion failed: {0}")]
    CsvFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True when the error stems from bad inputs or configuration rather
    /// than a failure while solving.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::NonFinite { .. }
                | Error::InvalidParameter(_)
                | Error::LevelTooLarge { .. }
                | Error::UnknownMethod(_)
                | Error::CsvFormat(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
