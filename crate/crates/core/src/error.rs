use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("sub-dimension d = {d} exceeds the joint-table cap of {cap}")]
    InfeasibleDimension { d: usize, cap: usize },

    #[error("sub-dimension d = {d} exceeds the column count L = {l}")]
    DimensionExceedsColumns { d: usize, l: usize },

    #[error("search space of {partitions} partitions exceeds the cap of {cap}")]
    SearchCapExceeded { partitions: u128, cap: u128 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    /// Short machine-readable tag used in JSON error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Invalid(_) => "invalid",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::InfeasibleDimension { .. } => "infeasible_dimension",
            Error::DimensionExceedsColumns { .. } => "dimension_exceeds_columns",
            Error::SearchCapExceeded { .. } => "search_cap_exceeded",
            Error::Precondition(_) => "precondition",
            Error::Io { .. } => "io",
            Error::Format(_) => "format",
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::InfeasibleDimension { .. }
                | Error::DimensionExceedsColumns { .. }
                | Error::SearchCapExceeded { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
