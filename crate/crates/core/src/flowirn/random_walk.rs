//! Score propagation by a random walk whose transition weights come from
//! boundary-aware pixel affinities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::affinity::{BoundaryMap, NeighborStencil, NeighborhoodSpec};
use super::cam::ScoreMapStack;
use crate::error::{ensure_same_dims, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomWalkParams {
    pub steps: u32,
    pub beta: f64,
}

impl Default for RandomWalkParams {
    fn default() -> Self {
        Self { steps: 8, beta: 1.0 }
    }
}

impl RandomWalkParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::invalid("beta", format!("{} must be non-negative", self.beta)));
        }
        Ok(())
    }
}

/// Row-stochastic sparse transition matrix over the pixels of a raster.
///
/// `rows[i]` lists `(j, T_ij)`. The weight between neighbors is
/// `alpha_ij ^ beta`; a pixel whose weights sum to zero transitions to itself.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    rows: Vec<Vec<(usize, f64)>>,
}

impl TransitionMatrix {
    pub fn new(boundary: &BoundaryMap, nbhd: &NeighborhoodSpec, beta: f64) -> Self {
        let (w, h) = boundary.dims();
        let stencil = NeighborStencil::new(nbhd);
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); w * h];
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                for (k, &(dx, dy)) in stencil.offsets.iter().enumerate() {
                    if let Some(alpha) = stencil.affinity(boundary, x, y, k) {
                        let j = (y as i64 + dy) as usize * w + (x as i64 + dx) as usize;
                        let weight = alpha.powf(beta);
                        rows[i].push((j, weight));
                        rows[j].push((i, weight));
                    }
                }
            }
        }
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            let sum: f64 = row.iter().map(|&(_, wt)| wt).sum();
            if sum > 0.0 {
                row.iter_mut().for_each(|(_, wt)| *wt /= sum);
            } else {
                *row = vec![(i, 1.0)];
            }
        }
        Self { rows }
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    /// `T * s`.
    pub fn apply(&self, scores: &[f64]) -> Vec<f64> {
        self.rows
            .par_iter()
            .map(|row| row.iter().map(|&(j, t)| t * scores[j]).sum())
            .collect()
    }
}

/// Applies the transition matrix `steps` times to every category map.
///
/// Each step replaces a pixel's score with the affinity-weighted average of
/// its neighbors' scores, so a spatially uniform map is a fixed point.
pub fn random_walk_refine(
    scores: &ScoreMapStack,
    boundary: &BoundaryMap,
    nbhd: &NeighborhoodSpec,
    params: &RandomWalkParams,
) -> Result<ScoreMapStack> {
    params.validate()?;
    ensure_same_dims(scores.dims(), boundary.dims())?;
    if params.steps == 0 {
        return Ok(scores.clone());
    }
    let transition = TransitionMatrix::new(boundary, nbhd, params.beta);
    let mut out = scores.clone();
    for c in 0..scores.categories().len() {
        let mut current = scores.map(c).to_vec();
        for _ in 0..params.steps {
            current = transition.apply(&current);
        }
        out.map_mut(c).copy_from_slice(&current);
    }
    Ok(out)
}
