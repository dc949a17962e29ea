//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument left the domain of a function (q-exponential, q-logarithm, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The shape parameter (or accuracy parameter) is outside the admissible region.
    #[error("infeasible parameter: {message} (allowed q in {allowed})")]
    Feasibility { message: String, allowed: String },

    #[error("convergence failure: {0}")]
    Convergence(String),

    #[error("length mismatch: expected {expected} values, found {found}")]
    Alignment { expected: usize, found: usize },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("irregular time grid: {0}")]
    Grid(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// An optimizer drove a constrained parameter onto its floor.
    #[error("parameter pinned to its boundary: {0}")]
    Boundary(String),

    #[error("no feasible candidate: {0}")]
    Infeasible(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse error category, stable across releases; the CLI maps it to exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorCategory {
    Domain,
    Feasibility,
    Convergence,
    Alignment,
    Parse,
    Grid,
    Degenerate,
    Boundary,
    Infeasible,
    InvalidParameter,
    Io,
}

impl ErrorCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Domain => "domain",
            ErrorCategory::Feasibility => "feasibility",
            ErrorCategory::Convergence => "convergence",
            ErrorCategory::Alignment => "alignment",
            ErrorCategory::Parse => "parse",
            ErrorCategory::Grid => "grid",
            ErrorCategory::Degenerate => "degenerate",
            ErrorCategory::Boundary => "boundary",
            ErrorCategory::Infeasible => "infeasible",
            ErrorCategory::InvalidParameter => "invalid-parameter",
            ErrorCategory::Io => "io",
        }
    }
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Domain(_) => ErrorCategory::Domain,
            Error::Feasibility { .. } => ErrorCategory::Feasibility,
            Error::Convergence(_) => ErrorCategory::Convergence,
            Error::Alignment { .. } => ErrorCategory::Alignment,
            Error::Parse { .. } => ErrorCategory::Parse,
            Error::Grid(_) => ErrorCategory::Grid,
            Error::Degenerate(_) => ErrorCategory::Degenerate,
            Error::Boundary(_) => ErrorCategory::Boundary,
            Error::Infeasible(_) => ErrorCategory::Infeasible,
            Error::InvalidParameter(_) => ErrorCategory::InvalidParameter,
            Error::Io(_) => ErrorCategory::Io,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
