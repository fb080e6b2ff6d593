use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A physical configuration that cannot be simulated or estimated, e.g. a
    /// symbol rate that does not land the FBG taps on the sample grid.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// The receiver was asked to estimate taps under conditions where the
    /// correlation estimator is known to be biased.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("operation not supported for {0} frames")]
    UnsupportedScheme(&'static str),

    #[error("degenerate estimate: {0}")]
    Degenerate(String),

    #[error("tone at {tone_hz} Hz not found: peak is {peak_db:.1} dB above the median floor (need 10 dB)")]
    ToneNotFound { tone_hz: f64, peak_db: f64 },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },

    #[error("{0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(context: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
