//! Flow-boundary loss: pixels with similar flow gradients should have high
//! affinity, and affinity is regularized away from zero.

use rayon::prelude::*;
use serde::Serialize;

use super::affinity::{BoundaryMap, NeighborStencil, NeighborhoodSpec};
use super::jacobian::{FlowJacobianField, JacobianNorm};
use crate::error::{ensure_same_dims, Error, Result};

/// Default weight of the `|1 - alpha|` regularizer.
pub const DEFAULT_LAMBDA: f64 = 2.0;

/// Contribution of one unordered neighbor pair, `i < j` in row-major order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairTerm {
    pub i: usize,
    pub j: usize,
    pub gradient_difference: f64,
    pub alpha: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowBoundaryLoss {
    pub total: f64,
    /// In enumeration order: pixel `i` row-major, then neighbor offset.
    pub pairs: Vec<PairTerm>,
}

/// Sums `||J(i) - J(j)|| * alpha_ij + lambda * |1 - alpha_ij|` over every
/// unordered neighbor pair.
///
/// Row partial sums are reduced in row order, so the total does not depend
/// on the thread count.
pub fn flow_boundary_loss(
    jacobian: &FlowJacobianField,
    boundary: &BoundaryMap,
    nbhd: &NeighborhoodSpec,
    lambda: f64,
    norm: JacobianNorm,
) -> Result<FlowBoundaryLoss> {
    ensure_same_dims(jacobian.dims(), boundary.dims())?;
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::invalid("lambda", format!("{lambda} must be non-negative")));
    }
    let (w, h) = jacobian.dims();
    let stencil = NeighborStencil::new(nbhd);
    let rows: Vec<(f64, Vec<PairTerm>)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut sum = 0.0;
            let mut terms = Vec::new();
            for x in 0..w {
                let ji = jacobian.at(x, y);
                for (k, &(dx, dy)) in stencil.offsets.iter().enumerate() {
                    let Some(alpha) = stencil.affinity(boundary, x, y, k) else {
                        continue;
                    };
                    let (jx, jy) = ((x as i64 + dx) as usize, (y as i64 + dy) as usize);
                    let diff = norm.difference(&ji, &jacobian.at(jx, jy));
                    let value = diff * alpha + lambda * (1.0 - alpha).abs();
                    sum += value;
                    terms.push(PairTerm {
                        i: y * w + x,
                        j: jy * w + jx,
                        gradient_difference: diff,
                        alpha,
                        value,
                    });
                }
            }
            (sum, terms)
        })
        .collect();
    let mut total = 0.0;
    let mut pairs = Vec::new();
    for (sum, terms) in rows {
        total += sum;
        pairs.extend(terms);
    }
    Ok(FlowBoundaryLoss { total, pairs })
}
