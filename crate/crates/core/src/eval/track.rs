use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_dims, Error, Result};
use crate::mask::{mask_iou, BinaryMask};
use crate::maskconsist::{hungarian_match, MatchGraph};
use crate::prediction::{CategoryId, PredictionSet};
use crate::warp::{warp_mask, SamplingField, WarpDirection, DEFAULT_MASK_THRESHOLD};

/// A sequence of masks of one instance, keyed by frame index.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    category: CategoryId,
    score: f64,
    masks: BTreeMap<usize, BinaryMask>,
}

impl Track {
    pub fn new(category: CategoryId, score: f64, masks: BTreeMap<usize, BinaryMask>) -> Result<Self> {
        let Some(first) = masks.values().next() else {
            return Err(Error::invalid("track", "needs at least one frame"));
        };
        let dims = first.dims();
        for m in masks.values() {
            ensure_same_dims(dims, m.dims())?;
        }
        if !score.is_finite() {
            return Err(Error::invalid("track score", format!("{score} is not finite")));
        }
        Ok(Self {
            category,
            score,
            masks,
        })
    }

    pub fn category(&self) -> CategoryId {
        self.category
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn masks(&self) -> &BTreeMap<usize, BinaryMask> {
        &self.masks
    }

    pub fn dims(&self) -> (usize, usize) {
        self.masks.values().next().map(|m| m.dims()).unwrap_or_default()
    }

    pub fn frames(&self) -> impl Iterator<Item = usize> + '_ {
        self.masks.keys().copied()
    }
}

/// Sum of per-frame intersections over the sum of per-frame unions. A frame
/// where only one track is present adds that mask's area to the union.
pub fn video_iou(a: &Track, b: &Track) -> Result<f64> {
    ensure_same_dims(a.dims(), b.dims())?;
    let mut inter = 0usize;
    let mut union = 0usize;
    for (f, ma) in &a.masks {
        match b.masks.get(f) {
            Some(mb) => {
                let i = ma.intersection_area(mb)?;
                inter += i;
                union += ma.area() + mb.area() - i;
            }
            None => union += ma.area(),
        }
    }
    for (f, mb) in &b.masks {
        if !a.masks.contains_key(f) {
            union += mb.area();
        }
    }
    if union == 0 {
        return Err(Error::EmptyTracks);
    }
    Ok(inter as f64 / union as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// Minimum mask IoU between a warped track and a new prediction.
    pub iou_threshold: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self { iou_threshold: 0.3 }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iou_threshold > 0.0 && self.iou_threshold <= 1.0 {
            Ok(())
        } else {
            Err(Error::invalid(
                "tracker IoU threshold",
                format!("{} outside (0, 1]", self.iou_threshold),
            ))
        }
    }
}

struct Building {
    category: CategoryId,
    masks: BTreeMap<usize, BinaryMask>,
    scores: Vec<f64>,
    last: BinaryMask,
}

/// Links per-frame predictions into tracks.
///
/// `samplings[k]` warps frame `k` onto frame `k + 1`. Tracks alive on frame
/// `k` have their last mask warped forward and are matched one-to-one to
/// same-category predictions with IoU at or above the threshold; matched
/// tracks are extended, the rest end, and unmatched predictions open new
/// tracks. Track score is the mean member score. Tracks come out in the
/// order they were opened.
pub fn greedy_track(
    per_frame: &[PredictionSet],
    samplings: &[SamplingField],
    cfg: &TrackerConfig,
) -> Result<Vec<Track>> {
    cfg.validate()?;
    if per_frame.is_empty() {
        return Ok(Vec::new());
    }
    if samplings.len() + 1 != per_frame.len() {
        return Err(Error::invalid(
            "sampling fields",
            format!("{} frames need {} fields, got {}", per_frame.len(), per_frame.len() - 1, samplings.len()),
        ));
    }
    let dims = per_frame[0].dims();
    for s in per_frame {
        ensure_same_dims(dims, s.dims())?;
    }
    for s in samplings {
        ensure_same_dims(dims, s.dims())?;
        if s.direction() != WarpDirection::TToT2 {
            return Err(Error::invalid("sampling field", "tracking warps forward in time"));
        }
    }

    let mut tracks: Vec<Building> = Vec::new();
    let mut active: Vec<usize> = Vec::new();
    for (k, set) in per_frame.iter().enumerate() {
        let mut claimed = vec![false; set.len()];
        let mut next_active = Vec::new();
        if k > 0 && !active.is_empty() && !set.is_empty() {
            let warped = active
                .iter()
                .map(|&t| warp_mask(&tracks[t].last, &samplings[k - 1], DEFAULT_MASK_THRESHOLD))
                .collect::<Result<Vec<_>>>()?;
            let mut weights = BTreeMap::new();
            for (i, (&t, w)) in active.iter().zip(&warped).enumerate() {
                for (j, p) in set.iter().enumerate() {
                    if p.category() != tracks[t].category {
                        continue;
                    }
                    let iou = mask_iou(w, p.mask())?;
                    if iou >= cfg.iou_threshold {
                        weights.insert((i, j), iou);
                    }
                }
            }
            let graph = MatchGraph::from_weights(active.len(), set.len(), weights)?;
            for pair in hungarian_match(&graph).pairs() {
                let t = active[pair.left];
                let p = &set.predictions()[pair.right];
                let b = &mut tracks[t];
                b.masks.insert(set.frame(), p.mask().clone());
                b.scores.push(p.score());
                b.last = p.mask().clone();
                claimed[pair.right] = true;
                next_active.push(t);
            }
        }
        for (j, p) in set.iter().enumerate() {
            if claimed[j] {
                continue;
            }
            next_active.push(tracks.len());
            tracks.push(Building {
                category: p.category(),
                masks: BTreeMap::from([(set.frame(), p.mask().clone())]),
                scores: vec![p.score()],
                last: p.mask().clone(),
            });
        }
        next_active.sort_unstable();
        active = next_active;
    }
    tracks
        .into_iter()
        .map(|b| {
            let score = b.scores.iter().sum::<f64>() / b.scores.len() as f64;
            Track::new(b.category, score, b.masks)
        })
        .collect()
}
