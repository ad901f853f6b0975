use rayon::prelude::*;

use super::{check_count, seed_frame, SeedStats};
use crate::config::Config;
use crate::error::{CliError, Result};
use crate::io::{load_all, load_cam, load_flo, OutputTree};

/// Flow-amplified CAMs and their seed maps, one per input CAM.
pub fn cmd_fcam(cfg: &Config) -> Result<OutputTree> {
    let inputs = &cfg.inputs;
    let n = inputs.cams.len();
    if n == 0 {
        return Err(CliError::input("inputs.cams is empty"));
    }
    check_count("cam_flows", inputs.cam_flows.len(), n, false)?;
    check_count("displacements", inputs.displacements.len(), n, true)?;
    let cams = load_all(&inputs.cams, |p| load_cam(cfg, p))?;
    let flows = load_all(&inputs.cam_flows, |p| load_flo(cfg, p))?;
    let disps = load_all(&inputs.displacements, |p| load_flo(cfg, p))?;
    let frames = (0..n)
        .into_par_iter()
        .map(|k| seed_frame(cfg, k, &cams[k], Some(&flows[k]), None, disps.get(k)))
        .collect::<Result<Vec<_>>>()?;

    let mut tree = OutputTree::new();
    for (k, f) in frames.iter().enumerate() {
        tree.add_stack("fcam", k, f.amplified.as_ref().expect("flow was supplied"));
        tree.add_label_map("seeds", k, &f.seeds, cfg.overlay)?;
        if let Some(inst) = &f.instances {
            tree.add_label_map("instances", k, inst, cfg.overlay)?;
        }
    }
    let stats: Vec<SeedStats> = frames.iter().map(|f| f.stats).collect();
    tree.add_json("fcam.json", &stats);
    Ok(tree)
}
