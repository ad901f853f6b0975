use super::{MatchSet, MaskConsistConfig};
use crate::error::{ensure_same_dims, Error, Result};
use crate::mask::box_iou;
use crate::prediction::{merge_predictions, PredictionSet, Provenance};
use crate::warp::{warp_prediction, SamplingField};

/// Transfers matched source predictions onto the target frame.
///
/// For each matched pair `(i, j)` the source pseudo-labels are scanned in
/// order; at the first one with the same category and box IoU above the
/// threshold, `W(source[i])` is merged with `target[j]` and emitted, and the
/// scan for that pair stops.
pub fn transfer_labels(
    matches: &MatchSet,
    source: &PredictionSet,
    target: &PredictionSet,
    pseudo_src: &PredictionSet,
    sampling: &SamplingField,
    cfg: &MaskConsistConfig,
) -> Result<PredictionSet> {
    ensure_same_dims(source.dims(), target.dims())?;
    ensure_same_dims(source.dims(), sampling.dims())?;
    if pseudo_src.frame() != source.frame() {
        return Err(Error::FrameMismatch(source.frame(), pseudo_src.frame()));
    }
    let (w, h) = target.dims();
    let mut out = PredictionSet::empty(target.frame(), w, h, Provenance::Transferred);
    for pair in matches.pairs() {
        let (Some(src), Some(dst)) = (source.get(pair.left), target.get(pair.right)) else {
            return Err(Error::invalid(
                "match",
                format!("pair ({}, {}) indexes past the candidate sets", pair.left, pair.right),
            ));
        };
        let gated = pseudo_src.iter().any(|label| {
            label.category() == src.category()
                && box_iou(&src.bbox(), &label.bbox()) > cfg.box_iou_threshold
        });
        if !gated {
            continue;
        }
        if let Some(warped) = warp_prediction(src, sampling)? {
            let warped = warped.with_frame(target.frame());
            out.push(merge_predictions(&warped, dst)?)?;
        }
    }
    Ok(out)
}
