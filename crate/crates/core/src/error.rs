use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("enumeration budget exceeded: {required} items requested, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("signal has empty support")]
    EmptySupport,

    #[error("inconsistent probabilities: {0}")]
    InconsistentProbabilities(String),

    #[error("unsupported ensemble for this operation: {0}")]
    UnsupportedEnsemble(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}
