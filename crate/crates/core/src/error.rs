use std::path::PathBuf;

/// Errors produced by the toolkit.
///
/// `Structural` covers malformed or inconsistent inputs (mismatched line
/// counts, empty corpora); `Argument` covers out-of-range parameters.
/// `Evaluation` is a failed training or scoring run and `Protocol` an
/// external evaluator that broke the request/response contract.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Structural(String),
    #[error("{0}")]
    Argument(String),
    #[error("evaluation failed: {0}")]
    Evaluation(String),
    #[error("evaluator protocol violation: {0}")]
    Protocol(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn protocol(msg: impl Into<String>) -> Self {
        Error::Protocol(msg.into())
    }
}
