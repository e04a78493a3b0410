use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed dataset or checkpoint bytes.
    #[error("format error in `{field}` at byte {offset}: {message}")]
    Format {
        field: &'static str,
        offset: u64,
        message: String,
    },

    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid argument `{name}`: {message}")]
    Argument { name: &'static str, message: String },

    /// Configuration validation failure; `field` is the offending config key.
    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("spike rate explosion: {spikes} spikes in {duration_ms} ms over {neurons} neurons exceeds the {cap_khz} kHz cap")]
    RateExplosion {
        spikes: u64,
        duration_ms: f64,
        neurons: usize,
        cap_khz: f64,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn argument(name: &'static str, message: impl Into<String>) -> Self {
        Error::Argument {
            name,
            message: message.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
