use std::path::PathBuf;

use crate::lasso::LassoFit;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Error categories shared across the library. The CLI maps each category to
/// its own exit status.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed matrix structure or mismatched dimensions.
    #[error("structural error: {0}")]
    Structural(String),

    /// Invalid options or inputs that make the requested computation ill-posed.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed or inconsistent input data.
    #[error("data error: {0}")]
    Data(String),

    /// Coordinate descent did not reach tolerance. Carries the last iterate.
    #[error("lasso did not converge after {iterations} sweeps at lambda={lambda:e} (last change {last_change:e})")]
    NotConverged {
        iterations: usize,
        lambda: f64,
        last_change: f64,
        last_iterate: Box<LassoFit>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn structural(msg: impl Into<String>) -> Error {
    Error::Structural(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn data(msg: impl Into<String>) -> Error {
    Error::Data(msg.into())
}
