use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A chain, pulse or angle violated one of its construction invariants.
    /// The message names the invariant.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("degenerate slice: {0}")]
    DegenerateSlice(String),

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("pattern is not normalizable: {0}")]
    NonNormalizable(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
