use thiserror::Error;

use crate::data::ValidationReport;

/// Errors shared by every analysis module.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: need at least {needed} observations, got {got}")]
    InsufficientData {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("input lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("{what} has no non-tied pair")]
    AllTied { what: &'static str },

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("degenerate scale bounds: min {min} must be below max {max}")]
    DegenerateBounds { min: f64, max: f64 },

    #[error("confidence level {0} must lie strictly inside (0, 1)")]
    InvalidLevel(f64),

    #[error("tau {0} lies outside [-1, 1]")]
    TauOutOfRange(f64),

    #[error("reliability {0} must be positive to disattenuate")]
    NonPositiveReliability(f64),

    #[error("distance variance is zero (constant input)")]
    ZeroDistanceVariance,

    #[error("dissimilarity matrix is not symmetric with a zero diagonal")]
    AsymmetricDissimilarity,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("missing column '{0}' in input header")]
    MissingColumn(String),

    #[error("row {row}: cannot parse '{value}' as a score")]
    UnparseableScore { row: usize, value: String },

    #[error("rating table failed validation:\n{0}")]
    Validation(Box<ValidationReport>),

    #[error("no shared units between the two tables")]
    DisjointUnits,

    #[error("can't resolve {kind} id '{id}'")]
    UnknownId { kind: &'static str, id: String },

    #[error("rater '{rater}' has multiple prompt series for task '{task}'; select one")]
    AmbiguousPrompt { rater: String, task: String },

    #[error("ensemble weights sum to zero")]
    ZeroTotalWeight,

    #[error("ensemble needs at least two members, got {0}")]
    TooFewMembers(usize),

    #[error("design is not balanced: {0}")]
    UnbalancedDesign(String),

    #[error("sampler did not converge: max split R-hat {max_rhat:.4} exceeds {threshold}")]
    NotConverged { max_rhat: f64, threshold: f64 },

    #[error("total variance is zero; shares undefined")]
    ZeroTotalVariance,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
