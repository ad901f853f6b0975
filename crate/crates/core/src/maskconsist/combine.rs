use std::cmp::Ordering;

use super::MaskConsistConfig;
use crate::error::{ensure_same_dims, Error, Result};
use crate::mask::mask_iom;
use crate::prediction::{Prediction, PredictionSet, Provenance};

/// Intersection-over-minimum suppression.
///
/// Every pair with IoM above `threshold` is visited in descending IoM order
/// (ties by lower index pair). When both members are still alive the smaller
/// one is suppressed; on equal area the later one goes. Returns a keep flag
/// per input.
pub fn iom_nms(labels: &[&Prediction], threshold: f64) -> Result<Vec<bool>> {
    let n = labels.len();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (labels[i], labels[j]);
            let (ba, bb) = (a.bbox(), b.bbox());
            if ba.x1 <= bb.x0 || bb.x1 <= ba.x0 || ba.y1 <= bb.y0 || bb.y1 <= ba.y0 {
                continue;
            }
            let iom = mask_iom(a.mask(), b.mask())?;
            if iom > threshold {
                pairs.push((iom, i, j));
            }
        }
    }
    pairs.sort_by(|x, y| match y.0.total_cmp(&x.0) {
        Ordering::Equal => (x.1, x.2).cmp(&(y.1, y.2)),
        other => other,
    });
    let mut keep = vec![true; n];
    for (_, i, j) in pairs {
        if !(keep[i] && keep[j]) {
            continue;
        }
        let loser = if labels[i].area() < labels[j].area() { i } else { j };
        keep[loser] = false;
    }
    Ok(keep)
}

/// `pseudo ∪ transferred` with IoM suppression. Pseudo-labels come first, so
/// an exact duplicate of an existing pseudo-label is the one dropped.
pub fn combine_labels(
    transferred: &PredictionSet,
    pseudo: &PredictionSet,
    cfg: &MaskConsistConfig,
) -> Result<PredictionSet> {
    if transferred.frame() != pseudo.frame() {
        return Err(Error::FrameMismatch(pseudo.frame(), transferred.frame()));
    }
    ensure_same_dims(transferred.dims(), pseudo.dims())?;
    let all: Vec<&Prediction> = pseudo.iter().chain(transferred.iter()).collect();
    let keep = iom_nms(&all, cfg.iom_threshold)?;
    let (w, h) = pseudo.dims();
    let kept = all
        .into_iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(p, _)| p.clone())
        .collect();
    PredictionSet::new(pseudo.frame(), w, h, Provenance::Combined, kept)
}
