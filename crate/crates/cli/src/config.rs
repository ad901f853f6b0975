//! One JSON document configures every command. Unknown keys are rejected,
//! missing keys take module defaults, and relative input paths resolve
//! against the config file's directory.

use std::path::{Path, PathBuf};

use maskcon_core::eval::{default_video_thresholds, TrackerConfig};
use maskcon_core::flowirn::{
    AmplifyConfig, JacobianNorm, NeighborhoodSpec, RandomWalkParams, DEFAULT_FG_THRESHOLD, DEFAULT_LAMBDA,
    DEFAULT_MAX_ITERS, DEFAULT_RADIUS,
};
use maskcon_core::maskconsist::MaskConsistConfig;
use maskcon_core::synth::{random_scene, CorruptionSpec, RandomSceneParams, SceneSpec};
use maskcon_core::warp::{FlowDirection, FlowInversion, WarpDirection};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::formats::decode_json;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Drives every random draw: scene layout, CAM noise and corruption.
    pub seed: u64,
    /// Output directory. Not echoed, so runs into different directories match.
    #[serde(skip_serializing)]
    pub out: PathBuf,
    /// Worker threads, 0 for one per core. Not echoed: results do not depend on it.
    #[serde(skip_serializing)]
    pub jobs: usize,
    /// Also write RGB overlay PNGs of every label map.
    pub overlay: bool,
    pub cam: CamConfig,
    pub affinity: AffinityConfig,
    pub warp: WarpConfig,
    pub maskconsist: MaskConsistConfig,
    pub tracker: TrackerConfig,
    pub metrics: MetricsConfig,
    pub inputs: Inputs,
    pub synth: SynthConfig,
    pub pipeline: PipelineConfig,
    /// Directory relative input paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            jobs: 0,
            overlay: false,
            cam: CamConfig::default(),
            affinity: AffinityConfig::default(),
            warp: WarpConfig::default(),
            maskconsist: MaskConsistConfig::default(),
            tracker: TrackerConfig::default(),
            metrics: MetricsConfig::default(),
            inputs: Inputs::default(),
            synth: SynthConfig::default(),
            pipeline: PipelineConfig::default(),
            base_dir: PathBuf::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CamConfig {
    pub amplify: AmplifyConfig,
    /// Threshold on per-category normalized scores.
    pub fg_threshold: f64,
}

impl Default for CamConfig {
    fn default() -> Self {
        Self {
            amplify: AmplifyConfig::default(),
            fg_threshold: DEFAULT_FG_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AffinityConfig {
    /// Neighborhood radius for affinities, the loss and the random walk.
    pub radius: u32,
    pub lambda: f64,
    pub norm: JacobianNorm,
    pub random_walk: RandomWalkParams,
    /// Step limit when following displacement vectors.
    pub max_iters: u32,
}

impl Default for AffinityConfig {
    fn default() -> Self {
        Self {
            radius: DEFAULT_RADIUS,
            lambda: DEFAULT_LAMBDA,
            norm: JacobianNorm::default(),
            random_walk: RandomWalkParams::default(),
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WarpConfig {
    pub direction: WarpDirection,
    /// Direction the supplied flow files were estimated in.
    pub flow_direction: FlowDirection,
    pub inversion: FlowInversion,
    /// Frames between source and target; `t_to_t2` adds it, `t2_to_t` subtracts it.
    pub frame_gap: usize,
}

impl Default for WarpConfig {
    fn default() -> Self {
        Self {
            direction: WarpDirection::TToT2,
            flow_direction: FlowDirection::T2ToT,
            inversion: FlowInversion::Strict,
            frame_gap: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Video IoU thresholds averaged into mAP.
    pub thresholds: Vec<f64>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            thresholds: default_video_thresholds(),
        }
    }
}

/// Input files. Per-frame lists are indexed by frame.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    /// Raster size for JSON-lines inputs when no raster file supplies it.
    pub width: Option<usize>,
    pub height: Option<usize>,
    /// Clip length when it cannot be inferred from the inputs.
    pub frames: Option<usize>,
    /// CAM stacks (`.camb` with a `.camb.json` sidecar).
    pub cams: Vec<PathBuf>,
    /// Flow used to amplify each CAM, one per CAM.
    pub cam_flows: Vec<PathBuf>,
    /// Single-channel `.camb` boundary maps, one per CAM.
    pub boundaries: Vec<PathBuf>,
    /// Displacement fields (`.flo`), one per CAM.
    pub displacements: Vec<PathBuf>,
    /// Flow file for `warp` and `fboundary-loss`.
    pub flow: Option<PathBuf>,
    /// Boundary map for `fboundary-loss`.
    pub boundary: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub pseudo_labels: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    /// `flows_backward[k]`: flow from frame `k + 1` to frame `k`.
    pub flows_backward: Vec<PathBuf>,
    /// `pair_flows_backward[k]`: flow from frame `k + delta` to frame `k`.
    /// Defaults to `flows_backward` when `delta` is 1.
    pub pair_flows_backward: Vec<PathBuf>,
    /// `pair_flows_forward[k]`: flow from frame `k` to frame `k + delta`.
    /// Optional with `warp.inversion = "negate"`.
    pub pair_flows_forward: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthPredictions {
    /// Perfect per-frame predictions.
    #[default]
    GroundTruth,
    /// Instances grouped from the flow-amplified CAM seeds.
    Seeds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Explicit scene; when absent one is drawn from `random` with `seed`.
    pub scene: Option<SceneSpec>,
    pub random: RandomSceneParams,
    pub corruption: CorruptionSpec,
    pub predictions: SynthPredictions,
    /// IoU a repaired label needs to count as a recovery.
    pub recovery_iou: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            scene: None,
            random: RandomSceneParams::default(),
            corruption: CorruptionSpec::default(),
            predictions: SynthPredictions::default(),
            recovery_iou: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    #[default]
    Synth,
    Inputs,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub source: Source,
}

/// Command-line values that replace config keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub overlay: bool,
    pub jobs: Option<usize>,
}

impl Config {
    /// Reads, parses and validates a config file, then applies overrides.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: Config =
            decode_json(&bytes).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.out = cfg.base_dir.join(&cfg.out);
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(jobs) = o.jobs {
            self.jobs = jobs;
        }
        self.overlay |= o.overlay;
        // one seed drives everything, so the echoed config is self-consistent
        self.synth.corruption.seed = self.seed;
        if let Some(scene) = &mut self.synth.scene {
            scene.seed = self.seed;
        }
    }

    /// Checks every module setting before any input is touched.
    pub fn validate(&self) -> Result<()> {
        let bad = |e: maskcon_core::Error| CliError::config(e.to_string());
        self.cam.amplify.validate().map_err(bad)?;
        if !(0.0..1.0).contains(&self.cam.fg_threshold) {
            return Err(CliError::config(format!("cam.fg_threshold {} outside [0, 1)", self.cam.fg_threshold)));
        }
        NeighborhoodSpec::new(self.affinity.radius).map_err(bad)?;
        if !(self.affinity.lambda.is_finite() && self.affinity.lambda >= 0.0) {
            return Err(CliError::config(format!("affinity.lambda {} must be non-negative", self.affinity.lambda)));
        }
        self.affinity.random_walk.validate().map_err(bad)?;
        if self.affinity.max_iters == 0 {
            return Err(CliError::config("affinity.max_iters must be at least 1"));
        }
        if self.warp.frame_gap == 0 {
            return Err(CliError::config("warp.frame_gap must be at least 1"));
        }
        self.maskconsist.validate().map_err(bad)?;
        self.tracker.validate().map_err(bad)?;
        let t = &self.metrics.thresholds;
        if t.is_empty() || t.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return Err(CliError::config("metrics.thresholds must be a non-empty list in (0, 1)"));
        }
        self.synth.corruption.validate().map_err(bad)?;
        if !(self.synth.recovery_iou > 0.0 && self.synth.recovery_iou <= 1.0) {
            return Err(CliError::config("synth.recovery_iou must lie in (0, 1]"));
        }
        match &self.synth.scene {
            Some(scene) => scene.validate().map_err(bad)?,
            None => {
                random_scene(&self.synth.random, self.seed).map_err(bad)?;
            }
        }
        if self.inputs.width == Some(0) || self.inputs.height == Some(0) {
            return Err(CliError::config("inputs.width and inputs.height must be positive"));
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    /// The synthetic scene this config describes.
    pub fn scene(&self) -> Result<SceneSpec> {
        match &self.synth.scene {
            Some(s) => Ok(s.clone()),
            None => random_scene(&self.synth.random, self.seed).map_err(|e| CliError::config(e.to_string())),
        }
    }

    /// Pretty JSON of the effective settings, without `out` and `jobs`.
    pub fn echo(&self) -> Vec<u8> {
        let mut text = serde_json::to_vec_pretty(self).expect("config serializes");
        text.push(b'\n');
        text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Config> {
        let mut cfg: Config = decode_json(text.as_bytes()).map_err(|e| CliError::config(e.to_string()))?;
        cfg.apply(&Overrides::default());
        cfg.validate()?;
        Ok(cfg)
    }

    #[test]
    fn empty_document_takes_defaults() {
        let cfg = parse("{}").unwrap();
        assert_eq!(cfg.cam.amplify.coefficient, 2.0);
        assert_eq!(cfg.cam.amplify.percentile, 0.8);
        assert_eq!(cfg.affinity.lambda, 2.0);
        assert_eq!(cfg.maskconsist.delta, 5);
        assert_eq!(cfg.maskconsist.top_k, 100);
        assert_eq!(cfg.tracker.iou_threshold, 0.3);
    }

    #[test]
    fn driving_scene_settings_are_accepted() {
        let cfg = parse(r#"{"cam": {"amplify": {"coefficient": 5.0, "percentile": 0.5}}, "maskconsist": {"delta": 3}}"#).unwrap();
        assert_eq!(cfg.cam.amplify, AmplifyConfig::CITYSCAPES);
        assert_eq!(cfg.maskconsist.delta, 3);
    }

    #[test]
    fn invalid_settings_are_config_errors() {
        for text in [
            r#"{"unknown": 1}"#,
            r#"{"cam": {"fg_threshold": 1.5}}"#,
            r#"{"cam": {"amplify": {"coefficient": 0.0, "percentile": 0.8}}}"#,
            r#"{"affinity": {"radius": 0}}"#,
            r#"{"maskconsist": {"delta": 0}}"#,
            r#"{"maskconsist": {"iom_threshold": 0.0}}"#,
            r#"{"tracker": {"iou_threshold": 2.0}}"#,
            r#"{"metrics": {"thresholds": []}}"#,
            r#"{"synth": {"corruption": {"drop_rate": 2.0}}}"#,
            r#"{"synth": {"random": {"width": 20, "height": 20}}}"#,
            r#"{"seed": "x"}"#,
        ] {
            let e = parse(text).unwrap_err();
            assert_eq!(e.exit_code(), 3, "{text}: {e}");
        }
    }

    #[test]
    fn overrides_win_and_seed_propagates() {
        let mut cfg = parse(r#"{"seed": 4, "synth": {"corruption": {"drop_rate": 0.3, "seed": 99}}}"#).unwrap();
        assert_eq!(cfg.synth.corruption.seed, 4);
        cfg.apply(&Overrides {
            seed: Some(7),
            out: Some("elsewhere".into()),
            overlay: true,
            jobs: Some(3),
        });
        assert_eq!((cfg.seed, cfg.synth.corruption.seed, cfg.jobs), (7, 7, 3));
        assert!(cfg.overlay);
        assert_eq!(cfg.out, PathBuf::from("elsewhere"));
    }

    #[test]
    fn echo_omits_run_location_and_round_trips() {
        let cfg = parse(r#"{"seed": 2, "jobs": 4, "out": "x"}"#).unwrap();
        let text = String::from_utf8(cfg.echo()).unwrap();
        assert!(!text.contains("\"out\"") && !text.contains("\"jobs\""));
        let back = parse(&text).unwrap();
        assert_eq!(back.echo(), cfg.echo());
    }
}
