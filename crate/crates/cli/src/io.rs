//! Input loading and the in-memory output tree.
//!
//! Commands build their complete output in memory and only then write it,
//! so a failing run never leaves partial files behind.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use maskcon_core::field::VectorField;
use maskcon_core::flowirn::{BoundaryMap, ScoreMapStack};
use maskcon_core::prediction::{CategoryId, InstanceLabelMap, Prediction, PredictionSet, Provenance};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Config;
use crate::error::{CliError, Result};
use crate::formats::{
    decode_camb, decode_flo, decode_json, decode_jsonl, encode_camb, encode_label_png, encode_overlay,
    label_map_to_raster, set_to_raster, CamSidecar, LabelRaster, LabelSidecar, RawStack,
};

/// Relative path to file contents, written in path order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OutputTree {
    files: BTreeMap<PathBuf, Vec<u8>>,
}

impl OutputTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, path: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.insert(path.into(), bytes);
    }

    /// Pretty-printed JSON with a trailing newline.
    pub fn add_json<T: Serialize>(&mut self, path: impl Into<PathBuf>, value: &T) {
        let mut bytes = serde_json::to_vec_pretty(value).expect("report serializes");
        bytes.push(b'\n');
        self.add(path, bytes);
    }

    pub fn files(&self) -> &BTreeMap<PathBuf, Vec<u8>> {
        &self.files
    }

    pub fn get(&self, path: impl AsRef<Path>) -> Option<&[u8]> {
        self.files.get(path.as_ref()).map(Vec::as_slice)
    }

    /// Label PNG, its sidecar and, when requested, an overlay.
    pub fn add_labels(&mut self, dir: &str, frame: usize, raster: &LabelRaster, sidecar: &LabelSidecar, overlay: bool) -> Result<()> {
        let png = encode_label_png(raster).map_err(CliError::input)?;
        self.add(format!("{dir}/{}.png", frame_name(frame)), png);
        self.add_json(format!("{dir}/{}.png.json", frame_name(frame)), sidecar);
        if overlay {
            let rgb = encode_overlay(raster).map_err(CliError::input)?;
            self.add(format!("overlays/{dir}/{}.png", frame_name(frame)), rgb);
        }
        Ok(())
    }

    pub fn add_set(&mut self, dir: &str, set: &PredictionSet, overlay: bool) -> Result<()> {
        let (raster, sidecar) = set_to_raster(set);
        self.add_labels(dir, set.frame(), &raster, &sidecar, overlay)
    }

    pub fn add_label_map(&mut self, dir: &str, frame: usize, map: &InstanceLabelMap, overlay: bool) -> Result<()> {
        let (raster, sidecar) = label_map_to_raster(map);
        self.add_labels(dir, frame, &raster, &sidecar, overlay)
    }

    pub fn add_stack(&mut self, dir: &str, frame: usize, stack: &ScoreMapStack) {
        let (width, height) = stack.dims();
        let raw = RawStack {
            channels: stack.categories().len(),
            width,
            height,
            values: stack.raw().to_vec(),
        };
        let sidecar = CamSidecar {
            categories: stack.categories().iter().map(|c| c.0).collect(),
        };
        self.add(format!("{dir}/{}.camb", frame_name(frame)), encode_camb(&raw));
        self.add_json(format!("{dir}/{}.camb.json", frame_name(frame)), &sidecar);
    }

    /// Writes every file under `root`, creating directories as needed.
    pub fn write_to(&self, root: &Path) -> Result<()> {
        for (rel, bytes) in &self.files {
            let path = root.join(rel);
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir).map_err(|source| CliError::Write {
                    path: dir.to_path_buf(),
                    source,
                })?;
            }
            std::fs::write(&path, bytes).map_err(|source| CliError::Write { path, source })?;
        }
        Ok(())
    }
}

pub fn frame_name(frame: usize) -> String {
    format!("frame_{frame:04}")
}

pub fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

/// Appends `.json` to the full file name: `a.camb` pairs with `a.camb.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn load_flo(cfg: &Config, p: &Path) -> Result<VectorField> {
    let path = cfg.resolve(p);
    decode_flo(&read(&path)?).map_err(|e| CliError::format(path, e))
}

/// Loads a list of files in parallel, keeping list order.
pub fn load_all<T: Send>(paths: &[PathBuf], f: impl Fn(&Path) -> Result<T> + Sync) -> Result<Vec<T>> {
    paths.par_iter().map(|p| f(p)).collect()
}

pub fn load_cam(cfg: &Config, p: &Path) -> Result<ScoreMapStack> {
    let path = cfg.resolve(p);
    let raw = decode_camb(&read(&path)?).map_err(|e| CliError::format(&path, e))?;
    let side_path = sidecar_path(&path);
    let side: CamSidecar = decode_json(&read(&side_path)?).map_err(|e| CliError::format(&side_path, e))?;
    if side.categories.len() != raw.channels {
        return Err(CliError::input(format!(
            "{}: {} categories listed for {} channels",
            side_path.display(),
            side.categories.len(),
            raw.channels
        )));
    }
    let categories = side.categories.into_iter().map(CategoryId).collect();
    ScoreMapStack::new(categories, raw.width, raw.height, raw.values)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn load_boundary(cfg: &Config, p: &Path) -> Result<BoundaryMap> {
    let path = cfg.resolve(p);
    let raw = decode_camb(&read(&path)?).map_err(|e| CliError::format(&path, e))?;
    if raw.channels != 1 {
        return Err(CliError::input(format!("{}: boundary maps need one channel, found {}", path.display(), raw.channels)));
    }
    BoundaryMap::new(raw.width, raw.height, raw.values).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// Predictions with their optional instance ids.
pub fn load_predictions(cfg: &Config, p: &Path, width: usize, height: usize) -> Result<Vec<(Prediction, Option<u64>)>> {
    let path = cfg.resolve(p);
    decode_jsonl(&read(&path)?, width, height).map_err(|e| CliError::format(path, e))
}

/// Splits loaded predictions into `frames` per-frame sets.
pub fn into_frames(
    preds: &[(Prediction, Option<u64>)],
    frames: usize,
    dims: (usize, usize),
    provenance: Provenance,
) -> Result<Vec<PredictionSet>> {
    let list = preds.iter().map(|(p, _)| p.clone()).collect();
    crate::formats::group_by_frame(list, frames, dims.0, dims.1, provenance).map_err(CliError::input)
}

/// Raster size for JSON-lines inputs: explicit config, else the first raster file given.
pub fn raster_dims(cfg: &Config, rasters: &[&PathBuf]) -> Result<(usize, usize)> {
    if let (Some(w), Some(h)) = (cfg.inputs.width, cfg.inputs.height) {
        return Ok((w, h));
    }
    match rasters.first() {
        Some(p) => Ok(load_flo(cfg, p)?.dims()),
        None => Err(CliError::input("set inputs.width and inputs.height or supply a flow file")),
    }
}

/// Clip length: explicit config, else one past the last frame seen, at least `min`.
pub fn clip_frames(cfg: &Config, preds: &[&[(Prediction, Option<u64>)]], min: usize) -> usize {
    cfg.inputs.frames.unwrap_or_else(|| {
        preds
            .iter()
            .flat_map(|list| list.iter().map(|(p, _)| p.frame() + 1))
            .max()
            .unwrap_or(0)
            .max(min)
    })
}

pub fn require<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a PathBuf> {
    p.as_ref().ok_or_else(|| CliError::input(format!("inputs.{key} is required")))
}
