//! Instance grouping by following per-pixel displacement vectors to a centroid.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use crate::error::{ensure_same_dims, Result};
use crate::field::DisplacementField;
use crate::prediction::{CategoryId, InstanceLabelMap};

pub const DEFAULT_MAX_ITERS: u32 = 100;

/// Follows `p <- round(p + d(p))` from every foreground seed pixel until it
/// stops moving (or `max_iters` steps). Pixels that end at the same point
/// with the same seed category form one instance; walks that leave the
/// raster become background.
///
/// Instance ids are assigned in raster order of each instance's first pixel.
pub fn group_by_displacement(
    disp: &DisplacementField,
    seeds: &InstanceLabelMap,
    max_iters: u32,
) -> Result<InstanceLabelMap> {
    ensure_same_dims(disp.dims(), seeds.dims())?;
    let (w, h) = disp.dims();
    let endpoints: Vec<Option<(usize, usize, CategoryId)>> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let category = seeds.category_of(seeds.labels()[i])?;
            let (x, y) = follow(disp, i % w, i / w, max_iters)?;
            Some((x, y, category))
        })
        .collect();

    let mut ids: HashMap<(usize, usize, CategoryId), u32> = HashMap::new();
    let mut categories = BTreeMap::new();
    let mut labels = vec![0u32; w * h];
    for (label, end) in labels.iter_mut().zip(&endpoints) {
        if let Some(key) = end {
            let next = ids.len() as u32 + 1;
            let id = *ids.entry(*key).or_insert(next);
            categories.insert(id, key.2);
            *label = id;
        }
    }
    InstanceLabelMap::new(w, h, labels, categories)
}

fn follow(disp: &DisplacementField, x: usize, y: usize, max_iters: u32) -> Option<(usize, usize)> {
    let (w, h) = (disp.width() as f64, disp.height() as f64);
    let (mut px, mut py) = (x, y);
    for _ in 0..max_iters {
        let (dx, dy) = disp.at(px, py);
        let nx = (px as f64 + dx).round();
        let ny = (py as f64 + dy).round();
        if nx < 0.0 || ny < 0.0 || nx >= w || ny >= h {
            return None;
        }
        let (nx, ny) = (nx as usize, ny as usize);
        if (nx, ny) == (px, py) {
            break;
        }
        (px, py) = (nx, ny);
    }
    Some((px, py))
}
