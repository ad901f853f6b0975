use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::error::{ensure_same_dims, Error, Result};
use crate::mask::mask_iou;
use crate::prediction::{CategoryId, PredictionSet};

/// Overlaps of one evaluation unit (a frame or a video) for one category.
#[derive(Debug, Clone, Default)]
pub(crate) struct Unit {
    /// Prediction scores in input order.
    pub scores: Vec<f64>,
    /// `overlaps[p][g]` between prediction `p` and ground truth `g`.
    pub overlaps: Vec<Vec<f64>>,
    pub n_gt: usize,
}

/// All units for one category.
#[derive(Debug, Clone)]
pub(crate) struct CategoryTable {
    pub units: Vec<Unit>,
}

impl CategoryTable {
    fn n_gt(&self) -> usize {
        self.units.iter().map(|u| u.n_gt).sum()
    }
}

/// Greedy score-descending one-to-one matching inside one unit. Each
/// prediction takes the unmatched ground truth with the highest overlap at
/// or above `tau` (ties to the lower index). Returns `(score, is_tp)` for the
/// considered predictions in match order.
pub(crate) fn match_unit(unit: &Unit, tau: f64, max_dets: Option<usize>) -> Vec<(f64, bool)> {
    let mut order: Vec<usize> = (0..unit.scores.len()).collect();
    order.sort_by(|&a, &b| unit.scores[b].total_cmp(&unit.scores[a]));
    if let Some(k) = max_dets {
        order.truncate(k);
    }
    let mut taken = vec![false; unit.n_gt];
    order
        .into_iter()
        .map(|p| {
            let mut best: Option<(usize, f64)> = None;
            for (g, &o) in unit.overlaps[p].iter().enumerate() {
                if taken[g] || o < tau {
                    continue;
                }
                if best.is_none_or(|(_, b)| o > b) {
                    best = Some((g, o));
                }
            }
            if let Some((g, _)) = best {
                taken[g] = true;
            }
            (unit.scores[p], best.is_some())
        })
        .collect()
}

/// Area under the all-point interpolated precision-recall curve.
pub(crate) fn average_precision(mut dets: Vec<(f64, bool)>, n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    dets.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut tp = 0usize;
    let mut points = Vec::with_capacity(dets.len());
    for (k, &(_, hit)) in dets.iter().enumerate() {
        tp += usize::from(hit);
        points.push((tp as f64 / n_gt as f64, tp as f64 / (k + 1) as f64));
    }
    // precision envelope, right to left
    for k in (0..points.len().saturating_sub(1)).rev() {
        points[k].1 = points[k].1.max(points[k + 1].1);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (recall, precision) in points {
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    ap
}

/// Mean AP and mean recall over categories with ground truth.
pub(crate) fn evaluate(tables: &[CategoryTable], tau: f64, max_dets: Option<usize>) -> Result<(f64, f64)> {
    let per_category: Vec<(f64, f64)> = tables
        .par_iter()
        .filter(|t| t.n_gt() > 0)
        .map(|t| {
            let n_gt = t.n_gt();
            let dets: Vec<(f64, bool)> = t.units.iter().flat_map(|u| match_unit(u, tau, max_dets)).collect();
            let recall = dets.iter().filter(|d| d.1).count() as f64 / n_gt as f64;
            (average_precision(dets, n_gt), recall)
        })
        .collect();
    if per_category.is_empty() {
        return Err(Error::NoGroundTruth);
    }
    let n = per_category.len() as f64;
    let ap = per_category.iter().map(|c| c.0).sum::<f64>() / n;
    let recall = per_category.iter().map(|c| c.1).sum::<f64>() / n;
    Ok((ap, recall))
}

/// Per-category mask-IoU tables for frame-level evaluation. Frames are
/// paired by position.
pub(crate) fn frame_tables(preds: &[PredictionSet], gts: &[PredictionSet]) -> Result<Vec<CategoryTable>> {
    if preds.len() != gts.len() {
        return Err(Error::invalid(
            "evaluation frames",
            format!("{} prediction frames vs {} ground-truth frames", preds.len(), gts.len()),
        ));
    }
    for (p, g) in preds.iter().zip(gts) {
        if p.frame() != g.frame() {
            return Err(Error::FrameMismatch(p.frame(), g.frame()));
        }
        ensure_same_dims(p.dims(), g.dims())?;
    }
    let categories: BTreeSet<CategoryId> = gts.iter().flat_map(|g| g.iter().map(|p| p.category())).collect();
    categories
        .into_par_iter()
        .map(|category| {
            let units = preds
                .iter()
                .zip(gts)
                .map(|(p, g)| {
                    let ps: Vec<_> = p.iter().filter(|x| x.category() == category).collect();
                    let gs: Vec<_> = g.iter().filter(|x| x.category() == category).collect();
                    let overlaps = ps
                        .iter()
                        .map(|a| gs.iter().map(|b| mask_iou(a.mask(), b.mask())).collect::<Result<Vec<_>>>())
                        .collect::<Result<Vec<_>>>()?;
                    Ok(Unit {
                        scores: ps.iter().map(|x| x.score()).collect(),
                        overlaps,
                        n_gt: gs.len(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(CategoryTable { units })
        })
        .collect()
}

/// Frame-level average precision at mask-IoU threshold `tau`, averaged over
/// the categories present in the ground truth.
pub fn ap_frame(preds: &[PredictionSet], gts: &[PredictionSet], tau: f64) -> Result<f64> {
    check_threshold(tau)?;
    let tables = frame_tables(preds, gts)?;
    Ok(evaluate(&tables, tau, None)?.0)
}

pub(crate) fn check_threshold(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("IoU threshold", format!("{tau} outside (0, 1)")))
    }
}
