use std::path::PathBuf;

use maskcon_core::field::{FlowField, VectorField};
use maskcon_core::prediction::PredictionSet;
use maskcon_core::synth::{corrupt_labels, CorruptedLabels, RenderedScene, Scene};
use serde::Serialize;

use crate::config::{Config, Inputs};
use crate::error::Result;
use crate::formats::{encode_flo, encode_jsonl, PredictionRecord};
use crate::io::{frame_name, OutputTree};

/// A rendered scene with its corrupted pseudo-labels.
pub(super) struct SynthData {
    pub scene: Scene,
    pub rendered: RenderedScene,
    pub corrupted: CorruptedLabels,
}

impl SynthData {
    pub fn build(cfg: &Config) -> Result<Self> {
        let scene = Scene::new(cfg.scene()?)?;
        let rendered = scene.render()?;
        let corrupted = corrupt_labels(&rendered.ground_truth(), &rendered.object_ids(), &cfg.synth.corruption)?;
        Ok(Self {
            scene,
            rendered,
            corrupted,
        })
    }

    pub fn frames(&self) -> usize {
        self.rendered.frames.len()
    }

    /// Flow that amplifies frame `k`'s CAM: towards the next frame, or back
    /// to the previous one on the last frame.
    pub fn cam_flow(&self, k: usize) -> Result<FlowField> {
        let r = &self.rendered;
        match (r.forward_flows.get(k), k.checked_sub(1).and_then(|j| r.backward_flows.get(j))) {
            (Some(f), _) | (None, Some(f)) => Ok(f.clone()),
            (None, None) => {
                let s = self.scene.spec();
                Ok(VectorField::zeros(s.width, s.height)?)
            }
        }
    }
}

fn records(sets: &[PredictionSet], ids: &[Vec<usize>]) -> Vec<PredictionRecord> {
    sets.iter()
        .zip(ids)
        .flat_map(|(s, ids)| s.iter().zip(ids).map(|(p, &o)| PredictionRecord::from_prediction(p, Some(o as u64))))
        .collect()
}

fn flo_path(kind: &str, k: usize) -> String {
    format!("flows/{kind}_{k:04}.flo")
}

/// Writes a complete synthetic dataset: scene, ground truth with object ids,
/// corrupted pseudo-labels with their manifest, CAMs, flows, displacement
/// fields, and an `inputs.json` block that points at all of it.
pub fn cmd_synth(cfg: &Config) -> Result<OutputTree> {
    let data = SynthData::build(cfg)?;
    let spec = data.scene.spec();
    let r = &data.rendered;
    let n = data.frames();
    let gt = r.ground_truth();
    let ids = r.object_ids();
    let delta = cfg.maskconsist.delta;

    let mut tree = OutputTree::new();
    tree.add_json("scene.json", spec);
    tree.add("gt.jsonl", encode_jsonl(&records(&gt, &ids)));
    tree.add("pseudo.jsonl", encode_jsonl(&records(&data.corrupted.labels, &data.corrupted.object_ids)));
    tree.add_json("manifest.json", &data.corrupted.manifest);
    for (k, f) in r.frames.iter().enumerate() {
        tree.add_label_map("labels", k, &f.labels, cfg.overlay)?;
        tree.add_stack("cams", k, &f.cams);
        tree.add(format!("displacement/{}.flo", frame_name(k)), encode_flo(&f.displacement));
    }
    for (k, (fwd, back)) in r.forward_flows.iter().zip(&r.backward_flows).enumerate() {
        tree.add(flo_path("forward", k), encode_flo(fwd));
        tree.add(flo_path("backward", k), encode_flo(back));
    }
    let mut cam_flows: Vec<PathBuf> = (0..n.saturating_sub(1)).map(|k| flo_path("forward", k).into()).collect();
    match n {
        1 => {
            tree.add("flows/zero.flo", encode_flo(&data.cam_flow(0)?));
            cam_flows.push("flows/zero.flo".into());
        }
        _ => cam_flows.push(flo_path("backward", n - 2).into()),
    }
    let (mut pair_back, mut pair_fwd) = (Vec::new(), Vec::new());
    if delta == 1 {
        pair_back = (0..n.saturating_sub(1)).map(|k| flo_path("backward", k).into()).collect();
        pair_fwd = (0..n.saturating_sub(1)).map(|k| flo_path("forward", k).into()).collect();
    } else {
        for k in 0..n.saturating_sub(delta) {
            tree.add(flo_path(&format!("pair_backward_d{delta}"), k), encode_flo(&data.scene.flow_between(k + delta, k)?));
            tree.add(flo_path(&format!("pair_forward_d{delta}"), k), encode_flo(&data.scene.flow_between(k, k + delta)?));
            pair_back.push(flo_path(&format!("pair_backward_d{delta}"), k).into());
            pair_fwd.push(flo_path(&format!("pair_forward_d{delta}"), k).into());
        }
    }
    let frame_files = |dir: &str, ext: &str| -> Vec<PathBuf> { (0..n).map(|k| format!("{dir}/{}.{ext}", frame_name(k)).into()).collect() };
    let inputs = Inputs {
        width: Some(spec.width),
        height: Some(spec.height),
        frames: Some(n),
        cams: frame_files("cams", "camb"),
        cam_flows,
        displacements: frame_files("displacement", "flo"),
        predictions: Some("gt.jsonl".into()),
        pseudo_labels: Some("pseudo.jsonl".into()),
        ground_truth: Some("gt.jsonl".into()),
        flows_backward: (0..n.saturating_sub(1)).map(|k| flo_path("backward", k).into()).collect(),
        pair_flows_backward: pair_back,
        pair_flows_forward: pair_fwd,
        ..Default::default()
    };
    tree.add_json("inputs.json", &InputsBlock { inputs });
    Ok(tree)
}

/// Ready to paste into a config whose file sits in the dataset directory.
#[derive(Serialize)]
struct InputsBlock {
    inputs: Inputs,
}
