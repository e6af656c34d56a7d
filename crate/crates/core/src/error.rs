use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("degenerate pair: x and y coincide")]
    DegeneratePair,

    #[error("kernel evaluated at a singular point (|x - y| = 0)")]
    SingularPoint,

    #[error("vacuum: density {value:e} at {location} is below the floor {floor:e}")]
    Vacuum {
        value: f64,
        floor: f64,
        location: String,
    },

    #[error("stale kernel cache: {0}")]
    StaleCache(String),

    #[error("blow-up at t = {t}: non-finite values in {field}")]
    BlowUp { t: f64, field: String },

    #[error("unsupported dimension {0} for this operation")]
    UnsupportedDimension(usize),

    #[error("snapshot format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    /// True for the errors that signal mathematical breakdown of a run
    /// (vacuum or non-finite state) rather than misuse.
    pub fn is_breakdown(&self) -> bool {
        matches!(self, Error::Vacuum { .. } | Error::BlowUp { .. })
    }
}
