use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid search space: {0}")]
    InvalidSpace(String),

    #[error("configuration does not match search space: {0}")]
    Structure(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("hypervolume is only supported for 1 to {max} objectives, got {got}")]
    UnsupportedDimension { got: usize, max: usize },

    #[error("indicator undefined: {0}")]
    UndefinedIndicator(&'static str),

    #[error("cannot fit transform: no finite observations")]
    CannotFit,

    #[error("cannot train surrogate: {0}")]
    CannotTrain(&'static str),

    #[error("operation not supported: {0}")]
    Unsupported(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, actual })
    }
}
