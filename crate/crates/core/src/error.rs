use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {msg}")]
    Parse { path: String, msg: String },

    #[error("invalid {field}: {msg}")]
    Invalid { field: String, msg: String },

    #[error("unsupported schema version {found:?}, expected {expected:?}")]
    Version { found: String, expected: String },

    #[error("path has {0} points, need at least 2")]
    DegeneratePath(usize),

    #[error("covariance is not positive-definite: {0:?}")]
    NotPositiveDefinite(Vec<f64>),

    #[error("unknown infraction kind {0:?}")]
    UnknownKind(String),

    #[error("missing column {0:?}")]
    MissingColumn(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("all weights vanished after projection; try a smaller regularization (lambda = {0})")]
    ZeroWeights(f64),
}

impl Error {
    pub fn invalid(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            msg: msg.into(),
        }
    }

    pub fn parse(path: impl Into<String>, msg: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            msg: msg.to_string(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
