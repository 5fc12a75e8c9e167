use alloc::string::String;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("divergent integral: {0}")]
    DivergentIntegral(String),
    #[error("domain violation: {0}")]
    DomainViolation(String),
    #[error("infeasible marginals: {0}")]
    InfeasibleMarginals(String),
    #[error("grid too coarse: captured mass {captured} below required {required}")]
    GridTooCoarse { captured: f64, required: f64 },
    #[error("constant not validated: {0}")]
    NotValidated(String),
}

pub type Result<T> = core::result::Result<T, Error>;
