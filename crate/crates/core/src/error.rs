use thiserror::Error;

/// Errors raised while building designs, fitting models or running selection.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DmrError {
    #[error("design is rank deficient; offending columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("unknown level {level:?} in factor column {column:?} at row {row}")]
    UnknownLevel {
        column: String,
        level: String,
        row: usize,
    },

    #[error("too few rows: n = {n} must exceed the number of parameters p = {p}")]
    TooFewRows { n: usize, p: usize },

    #[error("invalid column specification: {0}")]
    InvalidSpec(String),

    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("residual variance of the full model is zero; the response is exactly collinear with the design")]
    ZeroVariance,

    #[error("residual sum of squares is zero at path step {step}; the criterion is undefined")]
    ZeroRss { step: usize },

    #[error("constraint rows are linearly dependent at path step {step}")]
    DegenerateConstraints { step: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl DmrError {
    /// True for failures of the numerical kind (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            DmrError::RankDeficient { .. }
                | DmrError::ZeroVariance
                | DmrError::ZeroRss { .. }
                | DmrError::DegenerateConstraints { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, DmrError>;
