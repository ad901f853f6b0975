use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use super::ap::{check_threshold, evaluate, CategoryTable, Unit};
use super::track::{video_iou, Track};
use crate::error::{Error, Result};
use crate::prediction::CategoryId;

/// Predicted and ground-truth tracks of one video.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VideoEval {
    pub predictions: Vec<Track>,
    pub ground_truth: Vec<Track>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VideoMetrics {
    /// AP averaged over the threshold list.
    pub map: f64,
    pub ap50: f64,
    pub ap75: f64,
    /// Recall averaged over thresholds with at most 1 / 10 tracks per video
    /// and category.
    pub ar1: f64,
    pub ar10: f64,
}

/// 0.50, 0.55, ..., 0.90.
pub fn default_video_thresholds() -> Vec<f64> {
    (0..9).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

fn video_tables(videos: &[VideoEval]) -> Result<Vec<CategoryTable>> {
    let categories: BTreeSet<CategoryId> = videos
        .iter()
        .flat_map(|v| v.ground_truth.iter().map(|t| t.category()))
        .collect();
    categories
        .into_par_iter()
        .map(|category| {
            let units = videos
                .iter()
                .map(|v| {
                    let ps: Vec<&Track> = v.predictions.iter().filter(|t| t.category() == category).collect();
                    let gs: Vec<&Track> = v.ground_truth.iter().filter(|t| t.category() == category).collect();
                    let overlaps = ps
                        .iter()
                        .map(|a| {
                            gs.iter()
                                .map(|b| match video_iou(a, b) {
                                    Err(Error::EmptyTracks) => Ok(0.0),
                                    other => other,
                                })
                                .collect::<Result<Vec<_>>>()
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok(Unit {
                        scores: ps.iter().map(|t| t.score()).collect(),
                        overlaps,
                        n_gt: gs.len(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(CategoryTable { units })
        })
        .collect()
}

/// Video-level AP and AR with video IoU as the overlap, using the same
/// greedy matching as frame-level AP with each video as one unit.
pub fn video_ap(videos: &[VideoEval], thresholds: &[f64]) -> Result<VideoMetrics> {
    if thresholds.is_empty() {
        return Err(Error::invalid("IoU thresholds", "list is empty"));
    }
    for &t in thresholds {
        check_threshold(t)?;
    }
    let tables = video_tables(videos)?;
    let mean = |f: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
        let mut sum = 0.0;
        for &t in thresholds {
            sum += f(t)?;
        }
        Ok(sum / thresholds.len() as f64)
    };
    Ok(VideoMetrics {
        map: mean(&|t| Ok(evaluate(&tables, t, None)?.0))?,
        ap50: evaluate(&tables, 0.5, None)?.0,
        ap75: evaluate(&tables, 0.75, None)?.0,
        ar1: mean(&|t| Ok(evaluate(&tables, t, Some(1))?.1))?,
        ar10: mean(&|t| Ok(evaluate(&tables, t, Some(10))?.1))?,
    })
}
