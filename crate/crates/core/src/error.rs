use thiserror::Error;

use crate::model::Feasibility;

/// Errors raised by model evaluation, information assembly and the optimizers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("design point outside the design space: {0}")]
    DesignSpace(Feasibility),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("information matrix is singular: {0}")]
    Singular(String),

    #[error("candidate set cannot support a nonsingular design: {0}")]
    Infeasible(String),

    #[error("prior sample is empty after filtering ({dropped} draws dropped)")]
    EmptyPrior { dropped: usize },

    #[error("unsupported model family: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
