//! Weakly supervised video instance segmentation toolkit.
//!
//! Pixel-level pseudo-label generation from class activation maps and
//! optical flow, cross-frame label transfer, and evaluation metrics.

pub mod assignment;
pub mod error;
pub mod eval;
pub mod field;
pub mod flowirn;
pub mod mask;
pub mod maskconsist;
pub mod prediction;
pub mod rle;
pub mod synth;
pub mod warp;

pub use error::{Error, Result};
pub use field::{DisplacementField, FlowField, VectorField};
pub use mask::{bbox_of_mask, box_iou, mask_iom, mask_iou, BBox, BinaryMask};
pub use prediction::{
    merge_predictions, CategoryId, InstanceLabelMap, Prediction, PredictionSet, Provenance,
};
pub use rle::{rle_decode, rle_encode};
