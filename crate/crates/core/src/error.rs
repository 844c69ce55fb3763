use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("linear solve did not converge after {iterations} iterations (residual {residual:.3e})")]
    LinearSolve { iterations: usize, residual: f64 },

    #[error(
        "Newton iteration did not converge at time step {step} after {iterations} iterations \
         (residual {residual:.3e})"
    )]
    Newton {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("singular regression matrix at exercise date {date}; reduce the basis")]
    SingularRegression { date: usize },

    #[error("surface kind mismatch: expected {expected}, got {got}")]
    SurfaceKind {
        expected: &'static str,
        got: &'static str,
    },

    #[error("boundary and Monte Carlo grid mismatch: {0}")]
    GridMismatch(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
