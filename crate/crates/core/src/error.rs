use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{context}: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        context: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("hand region contains no pixels")]
    EmptyRegion,

    #[error("estimated depth is invalid at region pixel ({x}, {y})")]
    InvalidSample { x: usize, y: usize },

    #[error("need at least 3 corresponding points, got {found}")]
    InsufficientPoints { found: usize },

    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(&'static str),

    #[error("depth map has no valid pixels")]
    NoValidDepth,

    #[error("latent shape mismatch in {context}: {left:?} vs {right:?}")]
    ShapeMismatch {
        context: &'static str,
        left: (usize, usize, usize),
        right: (usize, usize, usize),
    },

    #[error("timestep {t} outside 1..={max}")]
    TimestepOutOfRange { t: usize, max: usize },

    #[error("denoiser failed: {0}")]
    Denoiser(String),

    #[error("{}: parse error at byte {offset}: {message}", path.display())]
    Parse {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable snake_case identifier of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Validation { .. } => "validation",
            Error::EmptyRegion => "empty_region",
            Error::InvalidSample { .. } => "invalid_sample",
            Error::InsufficientPoints { .. } => "insufficient_points",
            Error::DegenerateConfiguration(_) => "degenerate_configuration",
            Error::NoValidDepth => "no_valid_depth",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::TimestepOutOfRange { .. } => "timestep_out_of_range",
            Error::Denoiser(_) => "denoiser",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
