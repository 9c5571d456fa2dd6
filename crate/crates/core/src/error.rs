use thiserror::Error;

/// Errors produced anywhere in the estimation toolkit.
#[derive(Debug, Error)]
pub enum ShapError {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The request exceeds an enumeration or representation limit.
    #[error("capacity error: {0}")]
    Capacity(String),
    /// An estimator configuration does not fit the game it is applied to.
    #[error("config error: {0}")]
    Config(String),
    #[error("argument error: {0}")]
    Argument(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("training error: {0}")]
    Training(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, ShapError>;

impl ShapError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        ShapError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
