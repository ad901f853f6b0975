//! Class activation maps: seeding and flow-based amplification.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_dims, Error, Result};
use crate::field::FlowField;
use crate::prediction::{CategoryId, InstanceLabelMap};

/// Default foreground threshold applied to per-category normalized CAMs.
pub const DEFAULT_FG_THRESHOLD: f64 = 0.3;

/// One non-negative score map per category, all on the same raster.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMapStack {
    categories: Vec<CategoryId>,
    width: usize,
    height: usize,
    scores: Vec<f64>,
}

impl ScoreMapStack {
    /// `scores` holds the maps back to back, category-major then row-major.
    pub fn new(
        categories: Vec<CategoryId>,
        width: usize,
        height: usize,
        scores: Vec<f64>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyRaster { width, height });
        }
        let expected = categories.len() * width * height;
        if scores.len() != expected {
            return Err(Error::BufferLength {
                expected,
                actual: scores.len(),
            });
        }
        if categories.iter().any(|c| c.is_background()) {
            return Err(Error::invalid("categories", "category 0 is background"));
        }
        let mut seen = categories.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != categories.len() {
            return Err(Error::invalid("categories", "duplicate category id"));
        }
        if let Some(bad) = scores.iter().find(|s| !s.is_finite() || **s < 0.0) {
            return Err(Error::invalid(
                "scores",
                format!("{bad} is not a finite non-negative score"),
            ));
        }
        Ok(Self {
            categories,
            width,
            height,
            scores,
        })
    }

    pub fn categories(&self) -> &[CategoryId] {
        &self.categories
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn raw(&self) -> &[f64] {
        &self.scores
    }

    pub fn map(&self, index: usize) -> &[f64] {
        let n = self.pixel_count();
        &self.scores[index * n..(index + 1) * n]
    }

    pub(crate) fn map_mut(&mut self, index: usize) -> &mut [f64] {
        let n = self.pixel_count();
        &mut self.scores[index * n..(index + 1) * n]
    }

    /// Every map divided by its own maximum; all-zero maps stay zero.
    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        for c in 0..self.categories.len() {
            let map = out.map_mut(c);
            let max = map.iter().copied().fold(0.0, f64::max);
            if max > 0.0 {
                map.iter_mut().for_each(|s| *s /= max);
            }
        }
        out
    }

    /// Index of the highest-scoring category at a pixel; ties go to the earlier category.
    pub fn argmax(&self, pixel: usize) -> Option<(usize, f64)> {
        let n = self.pixel_count();
        let mut best: Option<(usize, f64)> = None;
        for c in 0..self.categories.len() {
            let s = self.scores[c * n + pixel];
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((c, s));
            }
        }
        best
    }
}

/// Flow amplification settings: scores are multiplied by `coefficient` where
/// the flow magnitude exceeds its `percentile`-th nearest-rank percentile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmplifyConfig {
    pub coefficient: f64,
    pub percentile: f64,
}

impl AmplifyConfig {
    /// Settings tuned for short consumer video clips.
    pub const YOUTUBE_VIS: AmplifyConfig = AmplifyConfig {
        coefficient: 2.0,
        percentile: 0.8,
    };

    /// Settings tuned for driving scenes.
    pub const CITYSCAPES: AmplifyConfig = AmplifyConfig {
        coefficient: 5.0,
        percentile: 0.5,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.coefficient.is_finite() && self.coefficient > 0.0) {
            return Err(Error::invalid(
                "amplification coefficient",
                format!("{} must be positive", self.coefficient),
            ));
        }
        if !(self.percentile > 0.0 && self.percentile < 1.0) {
            return Err(Error::invalid(
                "percentile",
                format!("{} must lie in (0, 1)", self.percentile),
            ));
        }
        Ok(())
    }
}

impl Default for AmplifyConfig {
    fn default() -> Self {
        Self::YOUTUBE_VIS
    }
}

/// Nearest-rank percentile of per-pixel flow magnitude.
pub fn flow_magnitude_percentile(flow: &FlowField, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("percentile", format!("{p} must lie in (0, 1)")));
    }
    let mut mags = flow.magnitudes();
    if mags.is_empty() {
        return Err(Error::EmptyRaster {
            width: flow.width(),
            height: flow.height(),
        });
    }
    let rank = nearest_rank(p, mags.len());
    let (_, value, _) = mags.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Ok(*value)
}

/// 1-based nearest rank `ceil(p * n)`, clamped to `[1, n]`.
pub(crate) fn nearest_rank(p: f64, n: usize) -> usize {
    ((p * n as f64).ceil() as usize).clamp(1, n)
}

/// Multiplies every category's score by the amplification coefficient at
/// pixels whose flow magnitude is above the configured percentile.
pub fn amplify_cam(cams: &ScoreMapStack, flow: &FlowField, cfg: &AmplifyConfig) -> Result<ScoreMapStack> {
    cfg.validate()?;
    ensure_same_dims(cams.dims(), flow.dims())?;
    let threshold = flow_magnitude_percentile(flow, cfg.percentile)?;
    let moving: Vec<bool> = flow.magnitudes().iter().map(|&m| m > threshold).collect();
    let mut out = cams.clone();
    for c in 0..cams.categories.len() {
        for (s, _) in out.map_mut(c).iter_mut().zip(&moving).filter(|(_, &m)| m) {
            *s *= cfg.coefficient;
        }
    }
    Ok(out)
}

/// Semantic seeds: each pixel takes its highest-scoring category when that
/// score exceeds `fg_threshold`; each 4-connected region of one category
/// becomes its own instance.
pub fn cam_seeds(cams: &ScoreMapStack, fg_threshold: f64) -> Result<InstanceLabelMap> {
    if cams.categories.is_empty() {
        return Err(Error::NoCategories);
    }
    let (width, height) = cams.dims();
    let classes: Vec<u32> = (0..cams.pixel_count())
        .map(|i| match cams.argmax(i) {
            Some((c, s)) if s > fg_threshold => cams.categories[c].0,
            _ => 0,
        })
        .collect();
    let (labels, component_class) = connected_components(width, height, &classes);
    let categories: BTreeMap<u32, CategoryId> = component_class
        .iter()
        .enumerate()
        .map(|(k, &c)| (k as u32 + 1, CategoryId(c)))
        .collect();
    InstanceLabelMap::new(width, height, labels, categories)
}

/// 4-connected components of equal nonzero class. Component ids start at 1
/// and follow the raster order of each component's first pixel.
pub(crate) fn connected_components(width: usize, height: usize, classes: &[u32]) -> (Vec<u32>, Vec<u32>) {
    let mut labels = vec![0u32; classes.len()];
    let mut component_class = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..classes.len() {
        if classes[start] == 0 || labels[start] != 0 {
            continue;
        }
        let class = classes[start];
        component_class.push(class);
        let id = component_class.len() as u32;
        labels[start] = id;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % width, i / width);
            let mut visit = |j: usize| {
                if classes[j] == class && labels[j] == 0 {
                    labels[j] = id;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < width {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - width);
            }
            if y + 1 < height {
                visit(i + width);
            }
        }
    }
    (labels, component_class)
}
