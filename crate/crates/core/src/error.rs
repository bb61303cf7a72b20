use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid depth {0}: must be positive and finite")]
    InvalidDepth(f64),

    #[error("point is behind the camera (z = {0})")]
    BehindCamera(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("format error in section `{section}`: {reason}")]
    Format { section: &'static str, reason: String },

    #[error("unsupported container version {found} (expected {expected})")]
    Version { found: u16, expected: u16 },

    #[error("nothing to inpaint from: every pixel is a hole")]
    Unfillable,

    #[error("metric `{0}` is undefined on an empty region")]
    UndefinedMetric(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    /// True for errors caused by bad configuration or missing inputs rather
    /// than by processing itself.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::InvalidParameter(_) | Error::Io { .. }
        )
    }

    pub(crate) fn format(section: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            section,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
