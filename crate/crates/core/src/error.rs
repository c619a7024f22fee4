use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid construction parameters (qubit counts, basis sizes, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// An API was called with arguments that violate its contract.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Operation requires state that has not been established yet.
    #[error("state error: {0}")]
    State(String),

    #[error("unsupported circuit: {0}")]
    UnsupportedCircuit(String),

    #[error("property violated: {0}")]
    Property(String),

    #[error("numerical abort: {0}")]
    Numerical(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
