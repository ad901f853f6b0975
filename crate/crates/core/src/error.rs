use thiserror::Error;

use crate::prediction::CategoryId;
use crate::warp::{FlowDirection, WarpDirection};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("raster dimensions must be positive, got {width}x{height}")]
    EmptyRaster { width: usize, height: usize },

    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("buffer holds {actual} values, raster needs {expected}")]
    BufferLength { expected: usize, actual: usize },

    #[error("mask has no foreground pixels")]
    EmptyMask,

    #[error("intersection over minimum is undefined for two empty masks")]
    BothMasksEmpty,

    #[error("category mismatch: {0} vs {1}")]
    CategoryMismatch(CategoryId, CategoryId),

    #[error("frame mismatch: {0} vs {1}")]
    FrameMismatch(usize, usize),

    #[error("run lengths sum to {actual}, raster has {expected} pixels")]
    RunLengthSum { expected: usize, actual: usize },

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("score stack has no categories")]
    NoCategories,

    #[error("raster {width}x{height} is too small, need at least {min}x{min}")]
    RasterTooSmall {
        width: usize,
        height: usize,
        min: usize,
    },

    #[error("flow {flow:?} cannot drive a {warp:?} warp without inversion")]
    DirectionMismatch {
        flow: FlowDirection,
        warp: WarpDirection,
    },

    #[error("no ground-truth instances to evaluate against")]
    NoGroundTruth,

    #[error("both tracks are empty")]
    EmptyTracks,

    #[error("invalid scene: {0}")]
    InvalidScene(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub(crate) fn ensure_same_dims(left: (usize, usize), right: (usize, usize)) -> Result<()> {
    if left == right {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { left, right })
    }
}
