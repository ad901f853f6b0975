use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use maskcon_cli::formats::{encode_flo, encode_jsonl, PredictionRecord};
use maskcon_core::prediction::{CategoryId, Prediction};
use maskcon_core::{BBox, BinaryMask, VectorField};
use serde_json::{json, Value};
use tempfile::TempDir;

struct Run {
    code: i32,
    stderr: String,
}

fn maskcon(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_maskcon"))
        .args(args)
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().expect("exit code"),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn run_ok(cmd: &str, config: &Path, out: &Path, extra: &[&str]) {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let r = maskcon(&args);
    assert_eq!(r.code, 0, "{cmd} failed: {}", r.stderr);
}

fn write_json(path: &Path, v: &Value) -> PathBuf {
    std::fs::write(path, serde_json::to_vec_pretty(v).unwrap()).unwrap();
    path.to_path_buf()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn jsonl(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn write_jsonl(path: &Path, lines: &[Value]) {
    let text: String = lines.iter().map(|l| format!("{l}\n")).collect();
    std::fs::write(path, text).unwrap();
}

/// Renders a synthetic dataset into `dir/name` and returns that directory.
fn synth(dir: &Path, name: &str, cfg: Value) -> PathBuf {
    let config = write_json(&dir.join(format!("{name}.json")), &cfg);
    let out = dir.join(name);
    run_ok("synth", &config, &out, &[]);
    out
}

/// A config inside a synthetic dataset using its `inputs.json`, merged with `extra`.
fn dataset_config(data: &Path, name: &str, extra: Value) -> PathBuf {
    let mut cfg = read_json(&data.join("inputs.json"));
    for (k, v) in extra.as_object().unwrap() {
        match (cfg.get_mut(k), v) {
            (Some(Value::Object(base)), Value::Object(add)) => base.extend(add.clone()),
            _ => {
                cfg[k] = v.clone();
            }
        }
    }
    write_json(&data.join(name), &cfg)
}

/// A random scene re-rendered with every object but the first held still.
fn still_scene(dir: &Path, frames: usize, seed: u64, move_first: bool) -> PathBuf {
    let probe = synth(dir, "probe", json!({"seed": seed, "synth": {"random": {"frames": frames}}}));
    let mut scene = read_json(&probe.join("scene.json"));
    for (i, o) in scene["objects"].as_array_mut().unwrap().iter_mut().enumerate() {
        if i > 0 || !move_first {
            o["velocity"] = json!([0.0, 0.0]);
        }
    }
    synth(dir, "still", json!({"synth": {"scene": scene}, "maskconsist": {"delta": 1}}))
}

fn rect(frame: usize, category: u32, score: f64, b: [u32; 4]) -> Prediction {
    let mask = BinaryMask::from_box(32, 24, BBox::new(b[0], b[1], b[2], b[3]).unwrap()).unwrap();
    Prediction::new(mask, CategoryId(category), score, frame).unwrap()
}

fn write_preds(path: &Path, preds: &[(Prediction, u64)]) {
    let records: Vec<PredictionRecord> = preds
        .iter()
        .map(|(p, id)| PredictionRecord::from_prediction(p, Some(*id)))
        .collect();
    std::fs::write(path, encode_jsonl(&records)).unwrap();
}

#[test]
fn zero_flow_fcam_reproduces_the_cams() {
    let dir = TempDir::new().unwrap();
    let data = synth(dir.path(), "one", json!({"synth": {"random": {"frames": 1}}}));
    let cfg = dataset_config(&data, "fcam.json", json!({}));
    let out = dir.path().join("fcam");
    run_ok("fcam", &cfg, &out, &[]);
    let cam = std::fs::read(data.join("cams/frame_0000.camb")).unwrap();
    assert_eq!(std::fs::read(out.join("fcam/frame_0000.camb")).unwrap(), cam);
    assert!(out.join("seeds/frame_0000.png").exists());
}

#[test]
fn default_amplification_settings_are_accepted() {
    let dir = TempDir::new().unwrap();
    let data = synth(dir.path(), "d", json!({"synth": {"random": {"frames": 2}}}));
    let cfg = dataset_config(&data, "fcam.json", json!({"cam": {"amplify": {"coefficient": 2.0, "percentile": 0.8}}}));
    let out = dir.path().join("fcam");
    run_ok("fcam", &cfg, &out, &[]);
    let echo = read_json(&out.join("config.json"));
    assert_eq!(echo["cam"]["amplify"], json!({"coefficient": 2.0, "percentile": 0.8}));
}

#[test]
fn seed_map_matches_golden_file() {
    let dir = TempDir::new().unwrap();
    let data = synth(dir.path(), "d", json!({"seed": 7, "synth": {"random": {"frames": 2}}}));
    let cfg = dataset_config(&data, "fcam.json", json!({}));
    let out = dir.path().join("fcam");
    run_ok("fcam", &cfg, &out, &[]);
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/seeds_frame_0000.png");
    let got = std::fs::read(out.join("seeds/frame_0000.png")).unwrap();
    if std::env::var_os("MASKCON_UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(golden.parent().unwrap()).unwrap();
        std::fs::write(&golden, &got).unwrap();
    }
    assert_eq!(got, std::fs::read(&golden).expect("golden file present"));
}

#[test]
fn stable_inputs_transfer_nothing() {
    let dir = TempDir::new().unwrap();
    let data = still_scene(dir.path(), 3, 5, false);
    let cfg = dataset_config(&data, "mc.json", json!({"maskconsist": {"delta": 1}}));
    let out = dir.path().join("mc");
    run_ok("maskconsist", &cfg, &out, &[]);
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["totals"]["transferred"], 0);
    assert_eq!(report["totals"]["pairs"], 2);
    let labels: Vec<Value> = jsonl(&out.join("labels.jsonl"));
    let gt: Vec<Value> = jsonl(&data.join("gt.jsonl"));
    assert_eq!(labels.len(), gt.len());
    for (l, g) in labels.iter().zip(&gt) {
        assert_eq!(l["rle"], g["rle"]);
    }
}

#[test]
fn dropped_label_is_transferred_once() {
    let dir = TempDir::new().unwrap();
    let data = still_scene(dir.path(), 2, 5, true);
    let gt = jsonl(&data.join("gt.jsonl"));
    let dropped = |l: &Value| l["frame"] == 1 && l["instance"] == 0;
    let pseudo: Vec<Value> = gt.iter().filter(|l| !dropped(l)).cloned().collect();
    assert_eq!(pseudo.len() + 1, gt.len());
    write_jsonl(&data.join("dropped.jsonl"), &pseudo);
    let cfg = dataset_config(
        &data,
        "mc.json",
        json!({"inputs": {"pseudo_labels": "dropped.jsonl"}, "maskconsist": {"delta": 1}}),
    );
    let out = dir.path().join("mc");
    run_ok("maskconsist", &cfg, &out, &[]);
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["totals"]["transferred"], 1);
    let labels = jsonl(&out.join("labels.jsonl"));
    assert_eq!(labels.len(), gt.len());
}

#[test]
fn empty_predictions_give_empty_outputs() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    std::fs::write(d.join("empty.jsonl"), "").unwrap();
    std::fs::write(d.join("zero.flo"), encode_flo(&VectorField::zeros(16, 12).unwrap())).unwrap();
    let inputs = json!({
        "width": 16, "height": 12, "frames": 2,
        "predictions": "empty.jsonl", "pseudo_labels": "empty.jsonl", "ground_truth": "empty.jsonl", "flow": "zero.flo",
        "flows_backward": ["zero.flo"], "pair_flows_backward": ["zero.flo"], "pair_flows_forward": ["zero.flo"],
    });
    let cfg = write_json(&d.join("c.json"), &json!({"inputs": inputs, "maskconsist": {"delta": 1}}));
    for cmd in ["maskconsist", "track", "warp"] {
        run_ok(cmd, &cfg, &d.join(cmd), &[]);
    }
    assert_eq!(std::fs::read(d.join("maskconsist/labels.jsonl")).unwrap(), b"");
    assert_eq!(read_json(&d.join("maskconsist/report.json"))["totals"]["transferred"], 0);
    assert_eq!(std::fs::read(d.join("track/tracks.jsonl")).unwrap(), b"");
}

#[test]
fn ground_truth_scores_one_with_fixed_keys() {
    let dir = TempDir::new().unwrap();
    let data = synth(dir.path(), "d", json!({"synth": {"random": {"frames": 4}}}));
    let cfg = dataset_config(&data, "m.json", json!({}));
    let out = dir.path().join("m");
    run_ok("metrics", &cfg, &out, &[]);
    let m = read_json(&out.join("metrics.json"));
    let keys: Vec<&String> = m.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["AP50", "AP75", "AR1", "AR10", "TC", "mAP"]);
    // AR1 keeps one track per category, so it stays below 1 when objects share one.
    for k in ["AP50", "mAP", "AP75", "AR10", "TC"] {
        assert_eq!(m[k], 1.0, "{k}");
    }
    assert!(m["AR1"].as_f64().unwrap() > 0.0);
}

#[test]
fn hand_worked_metrics() {
    // One object; a higher-scored false positive ranks first, so precision
    // at full recall is 1/2 at every threshold, and the single best track misses.
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    write_preds(&d.join("gt.jsonl"), &[(rect(0, 1, 1.0, [2, 2, 10, 10]), 0)]);
    write_preds(
        &d.join("pred.jsonl"),
        &[(rect(0, 1, 0.9, [2, 2, 10, 10]), 0), (rect(0, 1, 0.95, [20, 12, 28, 20]), 1)],
    );
    let inputs = json!({"width": 32, "height": 24, "predictions": "pred.jsonl", "ground_truth": "gt.jsonl"});
    let cfg = write_json(&d.join("c.json"), &json!({"inputs": inputs}));
    run_ok("metrics", &cfg, &d.join("m"), &[]);
    let m = read_json(&d.join("m/metrics.json"));
    for (k, want) in [("AP50", 0.5), ("mAP", 0.5), ("AP75", 0.5), ("AR1", 0.0), ("AR10", 1.0)] {
        assert!((m[k].as_f64().unwrap() - want).abs() < 1e-12, "{k}: {}", m[k]);
    }
    assert_eq!(m["TC"], Value::Null);
}

#[test]
fn synth_is_deterministic_across_runs_and_threads() {
    let dir = TempDir::new().unwrap();
    let cfg = write_json(&dir.path().join("c.json"), &json!({"seed": 4, "synth": {"corruption": {"drop_rate": 0.3}}}));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_ok("synth", &cfg, &a, &["--jobs", "1", "--overlay"]);
    run_ok("synth", &cfg, &b, &["--jobs", "3", "--overlay"]);
    let (ta, tb) = (tree(&a), tree(&b));
    assert!(ta.keys().any(|p| p.starts_with("overlays")));
    assert_eq!(ta, tb);
    let c = dir.path().join("c");
    run_ok("synth", &cfg, &c, &["--seed", "5"]);
    assert_ne!(std::fs::read(a.join("manifest.json")).unwrap(), std::fs::read(c.join("manifest.json")).unwrap());
}

#[test]
fn pipeline_on_clean_synthetic_data() {
    let dir = TempDir::new().unwrap();
    let cfg = write_json(&dir.path().join("c.json"), &json!({"seed": 2, "synth": {"random": {"frames": 8}}}));
    let out = dir.path().join("p");
    run_ok("pipeline", &cfg, &out, &[]);
    let s = read_json(&out.join("summary.json"));
    assert_eq!(s["recovery"]["dropped"], 0);
    assert_eq!(s["recovery"]["recovered"], 0);
    assert_eq!(s["recovery"]["false_positives"], 0);
    assert_eq!(s["metrics"]["AP50"], 1.0);
    assert_eq!(s["seeds"]["ap50"], 1.0);
    assert_eq!(read_json(&out.join("metrics.json")), s["metrics"]);
}

#[test]
fn pipeline_runs_on_synth_files() {
    let dir = TempDir::new().unwrap();
    let data = synth(
        dir.path(),
        "d",
        json!({"seed": 1, "synth": {"random": {"frames": 6}, "corruption": {"drop_rate": 0.3}}, "maskconsist": {"delta": 1}}),
    );
    let cfg = dataset_config(&data, "p.json", json!({"pipeline": {"source": "inputs"}, "maskconsist": {"delta": 1}}));
    let out = dir.path().join("p");
    run_ok("pipeline", &cfg, &out, &[]);
    let s = read_json(&out.join("summary.json"));
    assert_eq!(s["source"], "inputs");
    assert_eq!(s["frames"], 6);
    assert!(s["maskconsist"]["transferred"].as_u64().unwrap() > 0);
    assert!(s["output_tc"].as_f64().unwrap() >= s["input_tc"].as_f64().unwrap());
}

#[test]
fn affinity_track_and_loss_commands_run() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let data = synth(d, "d", json!({"synth": {"random": {"frames": 3}}}));
    let cfg = dataset_config(&data, "t.json", json!({}));
    run_ok("track", &cfg, &d.join("t"), &[]);
    let tracks = read_json(&d.join("t/tracks.json"));
    assert_eq!(tracks.as_array().unwrap().len(), 3);
    assert!(tracks.as_array().unwrap().iter().all(|t| t["length"] == 3));

    // A flat boundary map: the loss is finite and the random walk keeps seeds.
    let boundary = maskcon_cli::formats::RawStack {
        channels: 1,
        width: 160,
        height: 120,
        values: vec![0.0; 160 * 120],
    };
    std::fs::write(data.join("b.camb"), maskcon_cli::formats::encode_camb(&boundary)).unwrap();
    let cfg = dataset_config(
        &data,
        "a.json",
        json!({"inputs": {"boundaries": ["b.camb", "b.camb", "b.camb"], "flow": "flows/forward_0000.flo", "boundary": "b.camb"}}),
    );
    run_ok("affinity", &cfg, &d.join("a"), &[]);
    assert!(d.join("a/seeds/frame_0002.png").exists());
    run_ok("fboundary-loss", &cfg, &d.join("l"), &[]);
    let loss = read_json(&d.join("l/loss.json"));
    assert!(loss["total"].as_f64().unwrap().is_finite());
}

#[test]
fn warp_moves_predictions_along_the_flow() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    write_preds(&d.join("p.jsonl"), &[(rect(0, 2, 0.8, [4, 4, 10, 10]), 0)]);
    std::fs::write(d.join("f.flo"), encode_flo(&VectorField::constant(32, 24, -3.0, -1.0).unwrap())).unwrap();
    let cfg = write_json(&d.join("c.json"), &json!({"inputs": {"predictions": "p.jsonl", "flow": "f.flo"}}));
    run_ok("warp", &cfg, &d.join("w"), &[]);
    let warped = jsonl(&d.join("w/warped.jsonl"));
    assert_eq!(warped.len(), 1);
    assert_eq!(warped[0]["frame"], 1);
    assert_eq!(warped[0]["bbox"], json!([7, 5, 13, 11]));
}

#[test]
fn malformed_files_exit_2_with_byte_offset() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    write_preds(&d.join("p.jsonl"), &[(rect(0, 2, 0.8, [4, 4, 10, 10]), 0)]);
    let mut flo = encode_flo(&VectorField::zeros(32, 24).unwrap());
    flo[0] ^= 0xff;
    std::fs::write(d.join("bad.flo"), &flo).unwrap();
    let good = std::fs::read_to_string(d.join("p.jsonl")).unwrap();
    std::fs::write(d.join("bad.jsonl"), format!("{good}{{\"frame\": 0, \"category\": }}\n")).unwrap();
    let cases = [
        (json!({"predictions": "p.jsonl", "flow": "bad.flo"}), "at byte 0".to_string()),
        (
            json!({"width": 32, "height": 24, "predictions": "bad.jsonl", "ground_truth": "p.jsonl"}),
            format!("at byte {}", good.len() + "{\"frame\": 0, \"category\": ".len()),
        ),
    ];
    for (cmd, (inputs, want)) in ["warp", "metrics"].into_iter().zip(cases) {
        let cfg = write_json(&d.join("c.json"), &json!({"inputs": inputs}));
        let out = d.join(format!("out_{cmd}"));
        let r = maskcon(&[cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(r.code, 2, "{cmd}: {}", r.stderr);
        assert!(r.stderr.contains(&want), "{cmd}: {}", r.stderr);
        assert!(!out.exists(), "{cmd} wrote partial output");
    }
}

#[test]
fn invalid_config_exits_3_without_output() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    for (i, cfg) in [
        json!({"maskconsist": {"delta": 0}}),
        json!({"maskconsist": {"detla": 2}}),
        json!({"synth": {"random": {"width": 10}}}),
        json!({"cam": {"amplify": {"coefficient": -1.0}}}),
    ]
    .iter()
    .enumerate()
    {
        let path = write_json(&d.join(format!("c{i}.json")), cfg);
        let out = d.join(format!("o{i}"));
        let r = maskcon(&["synth", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(r.code, 3, "{cfg}: {}", r.stderr);
        assert!(!out.exists());
    }
    let r = maskcon(&["synth", "--config", d.join("missing.json").to_str().unwrap()]);
    assert_eq!(r.code, 3, "{}", r.stderr);
    assert_eq!(maskcon(&["synth"]).code, 2);
    assert_eq!(maskcon(&["frobnicate", "--config", "x"]).code, 2);
    assert_eq!(maskcon(&["--help"]).code, 0);
}

#[test]
fn direction_conflict_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    write_preds(&d.join("p.jsonl"), &[(rect(0, 2, 0.8, [4, 4, 10, 10]), 0)]);
    std::fs::write(d.join("f.flo"), encode_flo(&VectorField::zeros(32, 24).unwrap())).unwrap();
    let inputs = json!({"predictions": "p.jsonl", "flow": "f.flo"});
    let strict = write_json(&d.join("s.json"), &json!({"inputs": inputs, "warp": {"flow_direction": "t_to_t2"}}));
    let r = maskcon(&["warp", "--config", strict.to_str().unwrap(), "--out", d.join("s").to_str().unwrap()]);
    assert_eq!(r.code, 3, "{}", r.stderr);
    let negate = write_json(
        &d.join("n.json"),
        &json!({"inputs": inputs, "warp": {"flow_direction": "t_to_t2", "inversion": "negate"}}),
    );
    run_ok("warp", &negate, &d.join("n"), &[]);
}

#[test]
fn failure_midway_leaves_no_output() {
    let dir = TempDir::new().unwrap();
    let data = synth(dir.path(), "d", json!({"synth": {"random": {"frames": 3}}}));
    let mut cam = std::fs::read(data.join("cams/frame_0002.camb")).unwrap();
    cam.truncate(cam.len() - 3);
    std::fs::write(data.join("cams/frame_0002.camb"), cam).unwrap();
    let cfg = dataset_config(&data, "f.json", json!({}));
    let out = dir.path().join("f");
    let r = maskcon(&["fcam", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(r.stderr.contains("frame_0002.camb") && r.stderr.contains("at byte"), "{}", r.stderr);
    assert!(!out.exists());
}
