use maskcon_core::flowirn::{flow_boundary_loss, flow_jacobian, JacobianNorm, NeighborhoodSpec};
use serde::Serialize;

use crate::config::Config;
use crate::error::Result;
use crate::io::{load_boundary, load_flo, require, OutputTree};

#[derive(Debug, Serialize)]
struct LossReport {
    total: f64,
    pairs: usize,
    mean_affinity: f64,
    radius: u32,
    lambda: f64,
    norm: JacobianNorm,
}

/// Flow-boundary loss of one flow field against one boundary map.
pub fn cmd_fboundary_loss(cfg: &Config) -> Result<OutputTree> {
    let flow = load_flo(cfg, require(&cfg.inputs.flow, "flow")?)?;
    let boundary = load_boundary(cfg, require(&cfg.inputs.boundary, "boundary")?)?;
    let a = &cfg.affinity;
    let jac = flow_jacobian(&flow)?;
    let loss = flow_boundary_loss(&jac, &boundary, &NeighborhoodSpec::new(a.radius)?, a.lambda, a.norm)?;
    let pairs = loss.pairs.len();
    let mean_affinity = if pairs == 0 {
        0.0
    } else {
        loss.pairs.iter().map(|p| p.alpha).sum::<f64>() / pairs as f64
    };
    let mut tree = OutputTree::new();
    tree.add_json(
        "loss.json",
        &LossReport {
            total: loss.total,
            pairs,
            mean_affinity,
            radius: a.radius,
            lambda: a.lambda,
            norm: a.norm,
        },
    );
    Ok(tree)
}
