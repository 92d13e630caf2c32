use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FluxError {
    #[error("inconsistent constraint store")]
    Inconsistent,
    #[error("usage error: {0}")]
    Usage(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("arity mismatch for `{functor}`: expected {expected}, got {got}")]
    Arity { functor: String, expected: usize, got: usize },
    #[error("ordering or arithmetic on a symbolic constant")]
    SymbolArithmetic,
    #[error("environment refused `{0}`")]
    Refused(String),
}

pub type Result<T> = std::result::Result<T, FluxError>;
