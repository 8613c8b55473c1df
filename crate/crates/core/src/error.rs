use std::path::PathBuf;

/// Every failure the toolkit can report.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("unsupported size {height}x{width}: dimensions must be powers of two")]
    UnsupportedSize { height: usize, width: usize },

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("contract error: {0}")]
    Contract(String),

    #[error("mask generation failed: {0}")]
    Generation(String),

    #[error("solver diverged at iteration {iter}")]
    Divergence { iter: usize },

    #[error("training aborted at epoch {epoch}, step {step}: {msg}")]
    Training { epoch: usize, step: usize, msg: String },

    #[error("non-finite gradient in parameter {0}")]
    NonFiniteGradient(String),

    #[error("format error at byte offset {offset}: {msg}")]
    Format { offset: usize, msg: String },

    #[error("{path}: {msg}")]
    File { path: PathBuf, msg: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("metric error: {0}")]
    Metric(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Dimension(msg.into()))
}
