use thiserror::Error;

/// Failure modes shared by every module of the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A lattice shift or support would leave the computation box.
    #[error("range error: {0}")]
    Range(String),
    /// The torus grid is too coarse for the quadrature to be exact.
    #[error("precision error: {0}")]
    Precision(String),
    /// A normalizing constant is too close to zero to divide by.
    #[error("conditioning error: {0}")]
    Conditioning(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// A supremum search ran past its cap.
    #[error("unbounded: {0}")]
    Unbounded(String),
    /// A dense factorization did not converge.
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("usage error: {0}")]
    Usage(String),
    /// Malformed file or configuration contents.
    #[error("format error: {0}")]
    Format(String),
    #[error("check `{id}` failed: {source}")]
    InCheck { id: String, source: Box<Error> },
}

impl Error {
    /// True for failures that come from the numerics rather than from the
    /// caller's input (non-convergent SVD, insufficient quadrature).
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Precision(_) | Error::Numeric(_) | Error::Unbounded(_) => true,
            Error::InCheck { source, .. } => source.is_numeric(),
            _ => false,
        }
    }

    pub(crate) fn in_check(self, id: &str) -> Error {
        match self {
            e @ Error::InCheck { .. } => e,
            other => Error::InCheck {
                id: id.to_string(),
                source: Box::new(other),
            },
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
