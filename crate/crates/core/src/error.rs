use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad input values, shapes or configuration.
    #[error("invalid input: {0}")]
    Validation(String),

    /// A malformed row in a tabular input; `row` is the 1-based file line.
    #[error("row {row}: {message}")]
    Parse { row: u64, message: String },

    /// A numerical failure inside the sampler, e.g. a precision matrix that
    /// lost positive definiteness.
    #[error("numerical failure in {update}{}: {detail}", .iteration.map(|i| format!(" at iteration {i}")).unwrap_or_default())]
    Numerical {
        update: &'static str,
        iteration: Option<usize>,
        detail: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn numerical(update: &'static str, detail: impl Into<String>) -> Self {
        Error::Numerical {
            update,
            iteration: None,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attaches the sweep index to a numerical failure.
    pub fn at_iteration(self, iteration: usize) -> Self {
        match self {
            Error::Numerical { update, detail, .. } => Error::Numerical {
                update,
                iteration: Some(iteration),
                detail,
            },
            other => other,
        }
    }
}
