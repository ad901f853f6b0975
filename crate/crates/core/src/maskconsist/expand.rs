use super::MaskConsistConfig;
use crate::error::{ensure_same_dims, Error, Result};
use crate::mask::box_iou;
use crate::prediction::{merge_predictions, PredictionSet, Provenance};

/// Candidate set for one frame: the `top_k` highest-scoring predictions plus,
/// for each pseudo-label, the union of all same-category candidates whose box
/// IoU with it exceeds the threshold (when at least two such fragments exist).
pub fn expand_predictions(
    preds: &PredictionSet,
    pseudo: &PredictionSet,
    cfg: &MaskConsistConfig,
) -> Result<PredictionSet> {
    if preds.frame() != pseudo.frame() {
        return Err(Error::FrameMismatch(preds.frame(), pseudo.frame()));
    }
    ensure_same_dims(preds.dims(), pseudo.dims())?;

    let mut candidates = preds.clone();
    candidates.sort_by_score();
    let mut top = candidates.into_predictions();
    top.truncate(cfg.top_k);

    let (w, h) = preds.dims();
    let mut out = PredictionSet::new(preds.frame(), w, h, Provenance::Expanded, top.clone())?;
    for label in pseudo {
        let mut group = top.iter().filter(|p| {
            p.category() == label.category() && box_iou(&p.bbox(), &label.bbox()) > cfg.box_iou_threshold
        });
        let Some(first) = group.next() else { continue };
        let mut merged = first.clone();
        let mut count = 1;
        for p in group {
            merged = merge_predictions(&merged, p)?;
            count += 1;
        }
        if count >= 2 && out.iter().all(|q| q.mask() != merged.mask()) {
            out.push(merged)?;
        }
    }
    Ok(out)
}
