//! Instance predictions (mask, box, category, score) and per-frame collections.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_dims, Error, Result};
use crate::mask::{bbox_of_mask, BBox, BinaryMask};

/// Object category label; `0` is background.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct CategoryId(pub u32);

impl CategoryId {
    pub const BACKGROUND: CategoryId = CategoryId(0);

    pub fn is_background(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for CategoryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A single instance: mask, its tight box, category and confidence on one frame.
///
/// The box is always derived from the mask, so the two cannot disagree.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    mask: BinaryMask,
    bbox: BBox,
    category: CategoryId,
    score: f64,
    frame: usize,
}

impl Prediction {
    pub fn new(mask: BinaryMask, category: CategoryId, score: f64, frame: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::invalid(
                "score",
                format!("{score} is outside [0, 1]"),
            ));
        }
        let bbox = bbox_of_mask(&mask)?;
        Ok(Self {
            mask,
            bbox,
            category,
            score,
            frame,
        })
    }

    pub fn mask(&self) -> &BinaryMask {
        &self.mask
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    pub fn category(&self) -> CategoryId {
        self.category
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn frame(&self) -> usize {
        self.frame
    }

    pub fn area(&self) -> usize {
        self.mask.area()
    }

    pub fn with_score(mut self, score: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::invalid(
                "score",
                format!("{score} is outside [0, 1]"),
            ));
        }
        self.score = score;
        Ok(self)
    }

    /// Same content re-labelled as belonging to another frame.
    pub fn with_frame(mut self, frame: usize) -> Self {
        self.frame = frame;
        self
    }

    pub fn into_mask(self) -> BinaryMask {
        self.mask
    }
}

/// Union of two same-category predictions on one frame.
///
/// The box is recomputed from the merged mask; the score is the larger of the two.
pub fn merge_predictions(a: &Prediction, b: &Prediction) -> Result<Prediction> {
    if a.category != b.category {
        return Err(Error::CategoryMismatch(a.category, b.category));
    }
    if a.frame != b.frame {
        return Err(Error::FrameMismatch(a.frame, b.frame));
    }
    let mask = a.mask.union(&b.mask)?;
    Prediction::new(mask, a.category, a.score.max(b.score), a.frame)
}

/// Where a set of predictions came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Model,
    Expanded,
    #[serde(rename = "flow_irn")]
    FlowIrn,
    Transferred,
    Combined,
}

/// Ordered predictions for one frame, all on the same raster.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    frame: usize,
    width: usize,
    height: usize,
    provenance: Provenance,
    predictions: Vec<Prediction>,
}

impl PredictionSet {
    pub fn empty(frame: usize, width: usize, height: usize, provenance: Provenance) -> Self {
        Self {
            frame,
            width,
            height,
            provenance,
            predictions: Vec::new(),
        }
    }

    pub fn new(
        frame: usize,
        width: usize,
        height: usize,
        provenance: Provenance,
        predictions: Vec<Prediction>,
    ) -> Result<Self> {
        let mut set = Self::empty(frame, width, height, provenance);
        for p in predictions {
            set.push(p)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, p: Prediction) -> Result<()> {
        if p.frame != self.frame {
            return Err(Error::FrameMismatch(self.frame, p.frame));
        }
        ensure_same_dims(self.dims(), p.mask.dims())?;
        self.predictions.push(p);
        Ok(())
    }

    pub fn frame(&self) -> usize {
        self.frame
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn predictions(&self) -> &[Prediction] {
        &self.predictions
    }

    pub fn into_predictions(self) -> Vec<Prediction> {
        self.predictions
    }

    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Prediction> {
        self.predictions.get(i)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Prediction> {
        self.predictions.iter()
    }

    /// Stable sort by descending score.
    pub fn sort_by_score(&mut self) {
        self.predictions
            .sort_by(|a, b| b.score.total_cmp(&a.score));
    }
}

impl<'a> IntoIterator for &'a PredictionSet {
    type Item = &'a Prediction;
    type IntoIter = std::slice::Iter<'a, Prediction>;

    fn into_iter(self) -> Self::IntoIter {
        self.predictions.iter()
    }
}

/// Per-pixel instance ids (0 = background) with the category of each instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceLabelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    categories: BTreeMap<u32, CategoryId>,
}

impl InstanceLabelMap {
    pub fn new(
        width: usize,
        height: usize,
        labels: Vec<u32>,
        categories: BTreeMap<u32, CategoryId>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyRaster { width, height });
        }
        if labels.len() != width * height {
            return Err(Error::BufferLength {
                expected: width * height,
                actual: labels.len(),
            });
        }
        if categories.contains_key(&0) {
            return Err(Error::invalid("label map", "instance id 0 is background"));
        }
        if let Some(&missing) = labels
            .iter()
            .find(|&&l| l != 0 && !categories.contains_key(&l))
        {
            return Err(Error::invalid(
                "label map",
                format!("instance {missing} has no category"),
            ));
        }
        Ok(Self {
            width,
            height,
            labels,
            categories,
        })
    }

    pub fn background(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0; width * height], BTreeMap::new())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn categories(&self) -> &BTreeMap<u32, CategoryId> {
        &self.categories
    }

    pub fn category_of(&self, instance: u32) -> Option<CategoryId> {
        self.categories.get(&instance).copied()
    }

    /// Category at a pixel, background for unlabelled pixels.
    pub fn pixel_category(&self, x: usize, y: usize) -> CategoryId {
        self.category_of(self.label(x, y))
            .unwrap_or(CategoryId::BACKGROUND)
    }

    pub fn instance_count(&self) -> usize {
        self.categories.len()
    }

    pub fn instance_mask(&self, instance: u32) -> BinaryMask {
        let mut mask = BinaryMask::new(self.width, self.height).expect("validated dims");
        for (i, &l) in self.labels.iter().enumerate() {
            if l == instance && l != 0 {
                mask.set_index(i, true);
            }
        }
        mask
    }

    /// One prediction per instance that has at least one pixel, in id order.
    pub fn to_predictions(
        &self,
        frame: usize,
        score: f64,
        provenance: Provenance,
    ) -> Result<PredictionSet> {
        let mut set = PredictionSet::empty(frame, self.width, self.height, provenance);
        for (&id, &category) in &self.categories {
            let mask = self.instance_mask(id);
            if !mask.is_empty() {
                set.push(Prediction::new(mask, category, score, frame)?)?;
            }
        }
        Ok(set)
    }
}
