use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("invalid network: {0}")]
    Validation(String),

    #[error("disconnected graph: {components} components with sizes {sizes:?}")]
    Disconnected { components: usize, sizes: Vec<usize> },

    #[error("unbalanced injections: sum p = {imbalance:e} (no steady state with zero frequency)")]
    Unbalanced { imbalance: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown probe {0}")]
    UnknownProbe(usize),

    #[error("non-finite state at t = {time} s")]
    NonFinite { time: f64 },

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("grid mismatch: expected hash {expected}, found {found}")]
    GridMismatch { expected: String, found: String },

    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("artificial diffusion did not converge after {iterations} iterations (smoothness {smoothness:e})")]
    DiffusionNotConverged { iterations: usize, smoothness: f64 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse { context: context.into(), message: message.to_string() }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}
