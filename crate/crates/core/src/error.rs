use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("EmptyMask: mask has no foreground pixels")]
    EmptyMask,

    #[error("DegenerateMask: {0} foreground pixel(s), need at least 2")]
    DegenerateMask(usize),

    #[error("EmptyBuffer: no valid cutouts available")]
    EmptyBuffer,

    #[error("ShapeMismatch: {what} is {left:?} but {other} is {right:?}")]
    ShapeMismatch {
        what: &'static str,
        left: (u32, u32),
        other: &'static str,
        right: (u32, u32),
    },

    #[error("OutOfFrame: transformed cutout does not overlap the scene")]
    OutOfFrame,

    #[error("SpecError: {0}")]
    Spec(String),

    #[error("EncodingError: {0}")]
    Encoding(String),

    #[error("ConfigError: {0}")]
    Config(String),

    #[error("ParseError: {path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("IoError: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("IoError: {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("IoError: {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn image(path: impl Into<PathBuf>, source: image::ImageError) -> Self {
        Error::Image {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag, used for skip reasons in records and reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyMask => "EmptyMask",
            Error::DegenerateMask(_) => "DegenerateMask",
            Error::EmptyBuffer => "EmptyBuffer",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::OutOfFrame => "OutOfFrame",
            Error::Spec(_) => "SpecError",
            Error::Encoding(_) => "EncodingError",
            Error::Config(_) => "ConfigError",
            Error::Parse { .. } => "ParseError",
            Error::Io { .. } | Error::Image { .. } | Error::Json { .. } => "IoError",
        }
    }
}
