use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("unseen context {context:?}: no observed transitions")]
    UnseenContext { context: Vec<usize> },
    #[error("degenerate evidence: {0}")]
    DegenerateEvidence(String),
    #[error("degenerate support: {0}")]
    DegenerateSupport(String),
    #[error("parse error at token {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("inconsistent context: no hypothesis reproduces every example")]
    InconsistentContext,
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
