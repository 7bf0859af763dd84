use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("pole: {0}")]
    Pole(String),

    #[error("no convergence after {terms} terms/iterations: {what}")]
    NonConvergence { what: String, terms: usize },

    #[error("{0} is not a point of the time scale")]
    Membership(f64),

    #[error("expected u < v, got u = {0}, v = {1}")]
    Order(f64, f64),

    #[error("missing derivative: {0}")]
    MissingDerivative(String),

    #[error("unbounded: {0}")]
    Unbounded(String),

    #[error("tail regime not certified: {0}")]
    Regime(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn pole(msg: impl Into<String>) -> Self {
        Error::Pole(msg.into())
    }

    pub(crate) fn no_convergence(what: impl Into<String>, terms: usize) -> Self {
        Error::NonConvergence {
            what: what.into(),
            terms,
        }
    }

    /// True for [`Error::NonConvergence`]; the CLI maps these to a distinct exit code.
    pub fn is_non_convergence(&self) -> bool {
        matches!(self, Error::NonConvergence { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
