use thiserror::Error;

/// Errors raised by simulation, estimation and testing routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum YuleError {
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),
    #[error("degenerate denominator: {0}")]
    Degenerate(String),
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),
}

pub type Result<T> = std::result::Result<T, YuleError>;

pub(crate) fn domain(msg: impl Into<String>) -> YuleError {
    YuleError::Domain(msg.into())
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(YuleError::Domain(msg()))
    }
}
