use serde::{Deserialize, Serialize};

use super::{CorruptionKind, CorruptionRecord};
use crate::error::{Error, Result};
use crate::mask::mask_iou;
use crate::prediction::PredictionSet;

/// How well repaired labels restore corrupted ground truth.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RecoveryScore {
    pub dropped: usize,
    /// Dropped object-frames covered by a same-category label at or above the IoU bar.
    pub recovered: usize,
    pub eroded: usize,
    /// Eroded object-frames whose best same-category label reaches the IoU bar.
    pub repaired: usize,
    /// Labels on frames without corruption that match no ground-truth instance.
    pub false_positives: usize,
    /// Smallest best-IoU over dropped object-frames (1 when nothing was dropped).
    pub min_recovered_iou: f64,
}

impl RecoveryScore {
    pub fn recovery_rate(&self) -> f64 {
        if self.dropped == 0 {
            1.0
        } else {
            self.recovered as f64 / self.dropped as f64
        }
    }
}

/// IoU of the best same-category label in `labels` against `gt[index]`.
fn best_iou(labels: &PredictionSet, gt: &PredictionSet, index: usize) -> Result<f64> {
    let g = &gt.predictions()[index];
    labels
        .iter()
        .filter(|p| p.category() == g.category())
        .try_fold(0.0f64, |best, p| Ok(best.max(mask_iou(p.mask(), g.mask())?)))
}

/// Labels left unmatched after greedily pairing each ground-truth instance
/// with its best unmatched same-category label at IoU >= 0.5.
fn unmatched(labels: &PredictionSet, gt: &PredictionSet) -> Result<usize> {
    let mut taken = vec![false; labels.len()];
    for g in gt.iter() {
        let mut best: Option<(usize, f64)> = None;
        for (k, p) in labels.iter().enumerate() {
            if taken[k] || p.category() != g.category() {
                continue;
            }
            let iou = mask_iou(p.mask(), g.mask())?;
            if iou >= 0.5 && best.is_none_or(|(_, b)| iou > b) {
                best = Some((k, iou));
            }
        }
        if let Some((k, _)) = best {
            taken[k] = true;
        }
    }
    Ok(taken.iter().filter(|&&t| !t).count())
}

/// Scores `labels` against the ground truth a corruption manifest was drawn from.
pub fn score_recovery(
    gt: &[PredictionSet],
    object_ids: &[Vec<usize>],
    manifest: &[CorruptionRecord],
    labels: &[PredictionSet],
    iou_threshold: f64,
) -> Result<RecoveryScore> {
    if gt.len() != labels.len() || gt.len() != object_ids.len() {
        return Err(Error::invalid("recovery inputs", "ground truth, object ids and labels must cover the same frames"));
    }
    let mut s = RecoveryScore {
        min_recovered_iou: 1.0,
        ..Default::default()
    };
    for rec in manifest {
        let ids = object_ids
            .get(rec.frame)
            .ok_or_else(|| Error::invalid("corruption record", format!("frame {} out of range", rec.frame)))?;
        let index = ids
            .iter()
            .position(|&o| o == rec.object)
            .ok_or_else(|| Error::invalid("corruption record", format!("object {} absent on frame {}", rec.object, rec.frame)))?;
        let iou = best_iou(&labels[rec.frame], &gt[rec.frame], index)?;
        let good = iou >= iou_threshold;
        match rec.kind {
            CorruptionKind::Dropped => {
                s.dropped += 1;
                s.recovered += usize::from(good);
                s.min_recovered_iou = s.min_recovered_iou.min(iou);
            }
            CorruptionKind::Eroded => {
                s.eroded += 1;
                s.repaired += usize::from(good);
            }
        }
    }
    for (f, (g, l)) in gt.iter().zip(labels).enumerate() {
        if manifest.iter().all(|r| r.frame != f) {
            s.false_positives += unmatched(l, g)?;
        }
    }
    Ok(s)
}
