use thiserror::Error;

/// Errors raised while building or evaluating scenario-tree problems.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("stage {stage} out of range (tree has {stages} stages)")]
    StageOutOfRange { stage: usize, stages: usize },
    #[error("invalid function: {0}")]
    InvalidFunction(String),
    #[error("no closed form: {0}")]
    NoClosedForm(String),
    #[error("measurability violation: {0}")]
    Measurability(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("expected a {expected} problem, found {found}")]
    TagMismatch { expected: String, found: String },
    #[error("process is not adapted at stage {0}")]
    NotAdapted(usize),
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
