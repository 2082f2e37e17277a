use std::io;

use thiserror::Error;

/// Errors produced by the localization library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("insufficient matches: found {found}, need at least {required}")]
    InsufficientMatches { found: usize, required: usize },

    #[error("degenerate geometry: every query keypoint pair is coincident")]
    DegenerateGeometry,

    #[error("no candidate to select from")]
    NoCandidate,

    #[error("unsupported format version {found} (this build reads version {supported})")]
    VersionMismatch { found: u32, supported: u32 },

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid_arg(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
