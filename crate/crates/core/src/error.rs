use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid offspring law: {0}")]
    InvalidLaw(String),

    #[error("tree size {n} is not attainable under this offspring law")]
    UnattainableSize { n: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("subordinator horizon too short: (1+L_T)^-1 = {achieved:.3e} exceeds threshold {threshold:.3e}")]
    HorizonTooShort { achieved: f64, threshold: f64 },

    #[error("bound violated for k = {k}: slack {slack:.3e}")]
    BoundViolation { k: f64, slack: f64 },

    #[error("test skipped: {0}")]
    TestSkipped(String),
}
