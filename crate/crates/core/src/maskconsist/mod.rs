//! Temporally consistent pseudo-labels from a pair of frames.
//!
//! Predictions on each frame are expanded with merged fragments, matched
//! across frames by bipartite assignment on warped-mask overlap, and stable
//! matches are transferred as new labels to the other frame. The result is
//! combined with the original pseudo-labels under IoM suppression.

mod combine;
mod expand;
mod graph;
mod step;
mod transfer;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use combine::{combine_labels, iom_nms};
pub use expand::expand_predictions;
pub use graph::{build_match_graph, hungarian_match, MatchGraph, MatchPair, MatchSet};
pub use step::{
    consist_sequence, maskconsist_step, FrameLabels, PairSampling, SequenceOutput, StepOutput,
    StepReport,
};
pub use transfer::transfer_labels;

/// Overlap used for cross-frame edge weights.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeOverlap {
    #[default]
    Mask,
    Box,
}

/// How a sequence of frame pairs shares labels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Propagation {
    /// Pairs run in temporal order; each frame's combined labels become its
    /// pseudo-labels for the next pair it takes part in.
    #[default]
    Chained,
    /// Every pair sees only the original pseudo-labels; transfers into a
    /// frame from all its pairs are combined at the end.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskConsistConfig {
    /// Frame gap between the paired frames.
    pub delta: usize,
    /// Box IoU a prediction needs with a same-category pseudo-label, both for
    /// fragment merging and for the transfer gate.
    pub box_iou_threshold: f64,
    /// IoM above which the smaller of two labels is suppressed.
    pub iom_threshold: f64,
    /// Number of highest-scoring predictions kept as candidates.
    pub top_k: usize,
    pub edge_overlap: EdgeOverlap,
    pub propagation: Propagation,
}

impl Default for MaskConsistConfig {
    fn default() -> Self {
        Self {
            delta: 5,
            box_iou_threshold: 0.5,
            iom_threshold: 0.5,
            top_k: 100,
            edge_overlap: EdgeOverlap::Mask,
            propagation: Propagation::Chained,
        }
    }
}

impl MaskConsistConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delta == 0 {
            return Err(Error::invalid("delta", "frame gap must be at least 1"));
        }
        for (name, t) in [
            ("box_iou_threshold", self.box_iou_threshold),
            ("iom_threshold", self.iom_threshold),
        ] {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::invalid(name, format!("{t} must lie in (0, 1]")));
            }
        }
        if self.top_k == 0 {
            return Err(Error::invalid("top_k", "must keep at least one prediction"));
        }
        Ok(())
    }
}
