//! Acceptance suite: ten end-to-end criteria, each checked against an
//! independent reference. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use itertools::Itertools;
use maskcon_cli::commands::{execute, CommandKind};
use maskcon_cli::config::{Config, Overrides};
use maskcon_core::eval::{ap_frame, temporal_consistency, video_ap, video_iou, Track, VideoEval};
use maskcon_core::flowirn::{
    amplify_cam, flow_boundary_loss, flow_jacobian, AmplifyConfig, BoundaryMap, JacobianNorm, NeighborhoodSpec,
    ScoreMapStack,
};
use maskcon_core::mask::{mask_iom, mask_iou, BBox, BinaryMask};
use maskcon_core::maskconsist::{consist_sequence, hungarian_match, iom_nms, FrameLabels, MaskConsistConfig, MatchGraph, Propagation};
use maskcon_core::prediction::{CategoryId, Prediction, PredictionSet, Provenance};
use maskcon_core::synth::{
    corrupt_labels, random_scene, CorruptionKind, CorruptionSpec, DepthModel, ObjectSpec, RandomSceneParams, RenderedScene,
    Scene, SceneSpec, Shape,
};
use maskcon_core::warp::{warp_mask, warp_values, SamplingField, WarpDirection};
use maskcon_core::VectorField;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);
type Files = BTreeMap<std::path::PathBuf, Vec<u8>>;

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn grid(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.gen::<f64>()).collect()
}

// ---------------------------------------------------------------- 1

fn brute_force_total(weights: &[Vec<f64>]) -> f64 {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    let n = rows.max(cols);
    (0..n)
        .permutations(n)
        .map(|perm| (0..rows).filter(|&i| perm[i] < cols).map(|i| weights[i][perm[i]]).sum::<f64>())
        .fold(0.0, f64::max)
}

fn hungarian_optimality() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1);
    for g in 0..100 {
        let (rows, cols) = (r.gen_range(1..=7), r.gen_range(1..=7));
        let mut edges = BTreeMap::new();
        let mut dense = vec![vec![0.0; cols]; rows];
        for (i, row) in dense.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                if r.gen_bool(0.6) {
                    let w = (r.gen_range(1..=1000) as f64) / 1000.0;
                    edges.insert((i, j), w);
                    *cell = w;
                }
            }
        }
        let graph = MatchGraph::from_weights(rows, cols, edges).map_err(|e| e.to_string())?;
        let matches = hungarian_match(&graph);
        let total: f64 = matches.pairs().iter().map(|p| p.weight).sum();
        let want = brute_force_total(&dense);
        check((total - want).abs() < 1e-12, format!("graph {g}: {total} vs brute force {want}"))?;
        let lefts: Vec<usize> = matches.pairs().iter().map(|p| p.left).collect();
        let rights: Vec<usize> = matches.pairs().iter().map(|p| p.right).sorted().collect();
        check(lefts.iter().all_unique() && rights.iter().all_unique(), format!("graph {g}: not one-to-one"))?;
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 1.0, format!("took {secs:.3} s"))?;
    Ok(format!("100 graphs optimal in {secs:.3} s"))
}

// ---------------------------------------------------------------- 2

/// Round-half-up DDA line from the row-major-first endpoint.
fn line(a: (usize, usize), b: (usize, usize)) -> Vec<(usize, usize)> {
    let (s, e) = if (a.1, a.0) <= (b.1, b.0) { (a, b) } else { (b, a) };
    let (dx, dy) = (e.0 as i64 - s.0 as i64, e.1 as i64 - s.1 as i64);
    let n = dx.abs().max(dy.abs());
    if n == 0 {
        return vec![s];
    }
    let step = |t: i64, d: i64| d.signum() * (2 * t * d.abs() + n).div_euclid(2 * n);
    (0..=n)
        .map(|t| {
            let (ox, oy) = if dx.abs() >= dy.abs() { (dx.signum() * t, step(t, dy)) } else { (step(t, dx), dy.signum() * t) };
            ((s.0 as i64 + ox) as usize, (s.1 as i64 + oy) as usize)
        })
        .collect()
}

fn central_jacobian(u: &[f64], v: &[f64], w: usize, h: usize, x: usize, y: usize) -> [f64; 4] {
    let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
    let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
    let (sx, sy) = ((xr - xl) as f64, (yd - yu) as f64);
    [
        (u[y * w + xr] - u[y * w + xl]) / sx,
        (u[yd * w + x] - u[yu * w + x]) / sy,
        (v[y * w + xr] - v[y * w + xl]) / sx,
        (v[yd * w + x] - v[yu * w + x]) / sy,
    ]
}

fn naive_loss(u: &[f64], v: &[f64], b: &[f64], w: usize, h: usize, r: i64, lambda: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..w * h {
        for j in i + 1..w * h {
            let (pi, pj) = ((i % w, i / w), (j % w, j / w));
            let (dx, dy) = (pj.0 as i64 - pi.0 as i64, pj.1 as i64 - pi.1 as i64);
            if dx * dx + dy * dy > r * r {
                continue;
            }
            let a = 1.0 - line(pi, pj).iter().map(|&(x, y)| b[y * w + x]).fold(0.0, f64::max);
            let (ji, jj) = (central_jacobian(u, v, w, h, pi.0, pi.1), central_jacobian(u, v, w, h, pj.0, pj.1));
            let diff = ji.iter().zip(&jj).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            total += diff * a + lambda * (1.0 - a).abs();
        }
    }
    total
}

fn loss_fidelity() -> Outcome {
    let (w, h) = (32, 32);
    let mut r = rng(2);
    let mut worst = 0.0f64;
    for k in 0..20 {
        let (u, v, b) = (grid(&mut r, w * h), grid(&mut r, w * h), grid(&mut r, w * h));
        let u: Vec<f64> = u.iter().map(|x| 4.0 * x - 2.0).collect();
        let lambda = r.gen_range(0.0..3.0);
        let flow = VectorField::new(w, h, u.clone(), v.clone()).map_err(|e| e.to_string())?;
        let jac = flow_jacobian(&flow).map_err(|e| e.to_string())?;
        let boundary = BoundaryMap::new(w, h, b.clone()).map_err(|e| e.to_string())?;
        let nbhd = NeighborhoodSpec::new(2).map_err(|e| e.to_string())?;
        let got = flow_boundary_loss(&jac, &boundary, &nbhd, lambda, JacobianNorm::Frobenius)
            .map_err(|e| e.to_string())?
            .total;
        let want = naive_loss(&u, &v, &b, w, h, 2, lambda);
        let rel = (got - want).abs() / want.abs();
        worst = worst.max(rel);
        check(rel <= 1e-9, format!("instance {k}: {got} vs {want} (rel {rel:e})"))?;
    }
    Ok(format!("20 instances, worst relative error {worst:.1e}"))
}

// ---------------------------------------------------------------- 3

fn argmax_oracle(maps: &[Vec<f64>], i: usize) -> usize {
    (0..maps.len()).fold(0, |best, c| if maps[c][i] > maps[best][i] { c } else { best })
}

fn amplification_invariance() -> Outcome {
    let mut r = rng(3);
    let mut amplified_total = 0usize;
    for k in 0..1000 {
        let (w, h, c) = (r.gen_range(2..12), r.gen_range(2..12), r.gen_range(1..5));
        let maps: Vec<Vec<f64>> = (0..c).map(|_| grid(&mut r, w * h)).collect();
        let u: Vec<f64> = (0..w * h).map(|_| r.gen_range(-3.0..3.0)).collect();
        let v: Vec<f64> = (0..w * h).map(|_| r.gen_range(-3.0..3.0)).collect();
        let cfg = AmplifyConfig {
            coefficient: r.gen_range(1.1..6.0),
            percentile: r.gen_range(0.05..0.95),
        };
        let cats = (1..=c as u32).map(CategoryId).collect();
        let stack = ScoreMapStack::new(cats, w, h, maps.concat()).map_err(|e| e.to_string())?;
        let flow = VectorField::new(w, h, u.clone(), v.clone()).map_err(|e| e.to_string())?;
        let out = amplify_cam(&stack, &flow, &cfg).map_err(|e| e.to_string())?;

        let mags: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a.hypot(*b)).collect();
        let mut sorted = mags.clone();
        sorted.sort_by(f64::total_cmp);
        let rank = ((cfg.percentile * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
        let threshold = sorted[rank - 1];
        let after: Vec<Vec<f64>> = (0..c).map(|ch| out.map(ch).to_vec()).collect();
        for i in 0..w * h {
            check(argmax_oracle(&maps, i) == argmax_oracle(&after, i), format!("stack {k}: argmax changed at {i}"))?;
            let moving = mags[i] > threshold;
            amplified_total += usize::from(moving);
            for ch in 0..c {
                let want = if moving { maps[ch][i] * cfg.coefficient } else { maps[ch][i] };
                check(after[ch][i] == want, format!("stack {k}: pixel {i} category {ch} is {} not {want}", after[ch][i]))?;
            }
        }
    }
    Ok(format!("1000 stacks, {amplified_total} amplified pixels scaled exactly"))
}

// ---------------------------------------------------------------- 4

fn bilinear_oracle(m: &BinaryMask, x: f64, y: f64) -> f64 {
    let (w, h) = m.dims();
    let px = |xi: i64, yi: i64| -> f64 {
        if xi < 0 || yi < 0 || xi >= w as i64 || yi >= h as i64 {
            0.0
        } else {
            f64::from(u8::from(m.get(xi as usize, yi as usize)))
        }
    };
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (x0, y0) = (x0 as i64, y0 as i64);
    px(x0, y0) * (1.0 - fx) * (1.0 - fy) + px(x0 + 1, y0) * fx * (1.0 - fy) + px(x0, y0 + 1) * (1.0 - fx) * fy + px(x0 + 1, y0 + 1) * fx * fy
}

fn warp_correctness() -> Outcome {
    let (w, h) = (40, 30);
    let mut r = rng(4);
    let mut worst = 0.0f64;
    for k in 0..50 {
        let bits: Vec<bool> = (0..w * h).map(|_| r.gen_bool(0.4)).collect();
        let m = BinaryMask::from_bools(w, h, &bits).map_err(|e| e.to_string())?;
        let identity = SamplingField::identity(w, h, WarpDirection::TToT2).map_err(|e| e.to_string())?;
        check(warp_mask(&m, &identity, 0.5).map_err(|e| e.to_string())? == m, format!("mask {k}: zero field not identity"))?;

        let (dx, dy) = (r.gen_range(-5i64..=5), r.gen_range(-5i64..=5));
        let shift = SamplingField::new(VectorField::constant(w, h, dx as f64, dy as f64).map_err(|e| e.to_string())?, WarpDirection::TToT2);
        let got = warp_mask(&m, &shift, 0.5).map_err(|e| e.to_string())?;
        let want = BinaryMask::from_fn(w, h, |x, y| {
            let (sx, sy) = (x as i64 + dx, y as i64 + dy);
            sx >= 0 && sy >= 0 && sx < w as i64 && sy < h as i64 && m.get(sx as usize, sy as usize)
        })
        .map_err(|e| e.to_string())?;
        check(got == want, format!("mask {k}: integer shift ({dx}, {dy}) inexact"))?;

        let (fx, fy) = (if r.gen_bool(0.5) { 0.5 } else { -0.5 }, r.gen_range(-2i64..=2) as f64 + 0.5);
        let half = SamplingField::new(VectorField::constant(w, h, fx, fy).map_err(|e| e.to_string())?, WarpDirection::TToT2);
        let values = warp_values(&m, &half).map_err(|e| e.to_string())?;
        for y in 0..h {
            for x in 0..w {
                let want = bilinear_oracle(&m, x as f64 + fx, y as f64 + fy);
                let err = (values[y * w + x] - want).abs();
                worst = worst.max(err);
                check(err <= 1e-6, format!("mask {k}: ({x}, {y}) {} vs {want}", values[y * w + x]))?;
            }
        }
    }
    Ok(format!("50 masks exact under zero and integer fields, half-pixel error {worst:.1e}"))
}

// ---------------------------------------------------------------- 5

fn same_category_iou(label: &Prediction, gt: &Prediction) -> f64 {
    if label.category() != gt.category() {
        return 0.0;
    }
    mask_iou(label.mask(), gt.mask()).unwrap_or(0.0)
}

fn recovery_experiment() -> Outcome {
    let start = Instant::now();
    let cfg = MaskConsistConfig {
        delta: 1,
        propagation: Propagation::Chained,
        ..Default::default()
    };
    let (mut dropped, mut recovered, mut false_pos) = (0usize, 0usize, 0usize);
    for seed in 0..10u64 {
        let spec = random_scene(&RandomSceneParams::default(), seed).map_err(|e| e.to_string())?;
        let scene = Scene::new(spec).map_err(|e| e.to_string())?;
        let rendered = scene.render().map_err(|e| e.to_string())?;
        let gt = rendered.ground_truth();
        let ids = rendered.object_ids();
        let corrupted = corrupt_labels(
            &gt,
            &ids,
            &CorruptionSpec {
                drop_rate: 0.3,
                seed,
                ..Default::default()
            },
        )
        .map_err(|e| e.to_string())?;
        let frames: Vec<FrameLabels> = gt
            .iter()
            .zip(&corrupted.labels)
            .map(|(p, q)| FrameLabels::new(p.clone(), q.clone()))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let samplings = (0..gt.len() - 1)
            .map(|k| scene.pair_sampling(k, k + 1))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let out = consist_sequence(&frames, &samplings, &cfg).map_err(|e| e.to_string())?;

        for rec in corrupted.manifest.iter().filter(|r| r.kind == CorruptionKind::Dropped) {
            dropped += 1;
            let pos = ids[rec.frame].iter().position(|&o| o == rec.object).ok_or("manifest names an absent object")?;
            let target = gt[rec.frame].get(pos).ok_or("ground truth index")?;
            let best = out.labels[rec.frame].iter().map(|l| same_category_iou(l, target)).fold(0.0, f64::max);
            recovered += usize::from(best >= 0.9);
        }
        // unmatched labels on frames whose labels were left intact
        let touched: Vec<usize> = corrupted.manifest.iter().map(|r| r.frame).collect();
        for (k, labels) in out.labels.iter().enumerate().filter(|(k, _)| !touched.contains(k)) {
            let mut free: Vec<&Prediction> = gt[k].iter().collect();
            for l in labels.iter() {
                match free.iter().position(|g| same_category_iou(l, g) >= 0.5) {
                    Some(i) => {
                        free.remove(i);
                    }
                    None => false_pos += 1,
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let rate = recovered as f64 / dropped as f64;
    let detail = format!("{recovered}/{dropped} recovered ({:.1}%), {false_pos} false positives, {secs:.1} s", 100.0 * rate);
    check(rate >= 0.9 && false_pos == 0 && secs < 30.0, detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------- 6

fn tilted_plane() -> Outcome {
    let mut worst_ratio = 0.0f64;
    let mut worst_err = 0.0f64;
    for (f, vx, vy, z0, g) in [(100.0, 1.5, -0.5, 100.0, 0.2), (80.0, -1.0, 1.0, 60.0, -0.1), (120.0, 0.8, 0.6, 150.0, 0.5)] {
        let o = ObjectSpec {
            shape: Shape::Rectangle,
            category: CategoryId(1),
            size: [32.0, 20.0],
            position: [30.0, 18.0],
            velocity: [vx, vy],
            depth: DepthModel::Linear { z0, g },
        };
        let spec = SceneSpec {
            width: 64,
            height: 40,
            frames: 2,
            focal: f,
            objects: vec![o],
            seed: 0,
            cam: Default::default(),
            clipped: false,
        };
        let scene = Scene::new(spec).map_err(|e| e.to_string())?;
        let flow = scene.flow_between(0, 1).map_err(|e| e.to_string())?;
        let jac = flow_jacobian(&flow).map_err(|e| e.to_string())?;
        let mask = scene.render().map_err(|e| e.to_string())?.frames[0].labels.instance_mask(1);
        let interior: Vec<(usize, usize)> = (1..39)
            .flat_map(|y| (1..63).map(move |x| (x, y)))
            .filter(|&(x, y)| [(x, y), (x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)].iter().all(|&(a, b)| mask.get(a, b)))
            .collect();
        check(interior.len() > 300, "too few interior pixels")?;
        for &(x, y) in &interior {
            // u = f vx / Z(x), so du/dx = -f vx g / Z^2 and likewise for v
            let z = z0 + g * (x as f64 + 0.0 - 30.0);
            let want = [-f * vx * g / (z * z), 0.0, -f * vy * g / (z * z), 0.0];
            let err = jac.at(x, y).iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            worst_err = worst_err.max(err);
            check(err <= 1e-6, format!("analytic mismatch {err:e} at ({x}, {y})"))?;
        }
        let (mut jac_var, mut flow_var) = (0.0f64, 0.0f64);
        for (a, b) in interior.iter().tuple_combinations() {
            let (ja, jb) = (jac.at(a.0, a.1), jac.at(b.0, b.1));
            jac_var = jac_var.max(ja.iter().zip(&jb).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt());
            let (fa, fb) = (flow.at(a.0, a.1), flow.at(b.0, b.1));
            flow_var = flow_var.max((fa.0 - fb.0).hypot(fa.1 - fb.1));
        }
        let ratio = jac_var / flow_var;
        worst_ratio = worst_ratio.max(ratio);
        check(ratio <= 0.01, format!("Jacobian variation {jac_var:e} vs flow variation {flow_var:e}"))?;
    }
    Ok(format!("3 planes, Jacobian/flow variation ratio ≤ {worst_ratio:.4}, analytic error {worst_err:.1e}"))
}

// ---------------------------------------------------------------- 7

fn rect(w: usize, h: usize, frame: usize, score: f64, b: [u32; 4]) -> Prediction {
    let mask = BinaryMask::from_box(w, h, BBox::new(b[0], b[1], b[2], b[3]).unwrap()).unwrap();
    Prediction::new(mask, CategoryId(1), score, frame).unwrap()
}

/// All-point interpolated AP from a ranked hit list.
fn pr_table_ap(hits: &[bool], n_gt: usize) -> f64 {
    let mut tp = 0;
    let points: Vec<(f64, f64)> = hits
        .iter()
        .enumerate()
        .map(|(k, &hit)| {
            tp += usize::from(hit);
            (tp as f64 / n_gt as f64, tp as f64 / (k + 1) as f64)
        })
        .collect();
    let mut ap = 0.0;
    let mut prev = 0.0;
    for (k, &(recall, _)) in points.iter().enumerate() {
        let envelope = points[k..].iter().map(|p| p.1).fold(0.0, f64::max);
        ap += (recall - prev) * envelope;
        prev = recall;
    }
    ap
}

fn tracks_of(rendered: &RenderedScene) -> Vec<Track> {
    let mut by_object: BTreeMap<usize, (CategoryId, BTreeMap<usize, BinaryMask>)> = BTreeMap::new();
    for (k, (set, ids)) in rendered.ground_truth().iter().zip(rendered.object_ids()).enumerate() {
        for (p, o) in set.iter().zip(ids) {
            by_object.entry(o).or_insert((p.category(), BTreeMap::new())).1.insert(k, p.mask().clone());
        }
    }
    by_object.into_values().map(|(c, m)| Track::new(c, 1.0, m).unwrap()).collect()
}

fn metrics_sanity() -> Outcome {
    let spec = random_scene(&RandomSceneParams { frames: 6, ..Default::default() }, 7).map_err(|e| e.to_string())?;
    let scene = Scene::new(spec).map_err(|e| e.to_string())?;
    let rendered = scene.render().map_err(|e| e.to_string())?;
    let gt = rendered.ground_truth();
    let samplings = (0..gt.len() - 1).map(|k| scene.forward_sampling(k)).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
    let thresholds = maskcon_core::eval::default_video_thresholds();
    let tracks = tracks_of(&rendered);
    let ap50 = ap_frame(&gt, &gt, 0.5).map_err(|e| e.to_string())?;
    let video = video_ap(&[VideoEval { predictions: tracks.clone(), ground_truth: tracks.clone() }], &thresholds).map_err(|e| e.to_string())?;
    let tc = temporal_consistency(&gt, &samplings).map_err(|e| e.to_string())?;
    check(ap50 == 1.0 && video.map == 1.0 && tc == 1.0, format!("GT as predictions: AP50 {ap50}, mAP {}, TC {tc}", video.map))?;

    let (w, h) = gt[0].dims();
    let empty: Vec<PredictionSet> = gt.iter().map(|g| PredictionSet::empty(g.frame(), w, h, Provenance::Model)).collect();
    let e_ap = ap_frame(&empty, &gt, 0.5).map_err(|e| e.to_string())?;
    let e_video = video_ap(&[VideoEval { predictions: vec![], ground_truth: tracks }], &thresholds).map_err(|e| e.to_string())?;
    check(e_ap == 0.0 && e_video.map == 0.0 && e_video.ar10 == 0.0, "empty predictions score above 0")?;

    // 2 GT, 3 predictions ranked TP, FP, TP
    let (w, h) = (40, 20);
    let gts = [rect(w, h, 0, 1.0, [0, 0, 10, 10]), rect(w, h, 0, 1.0, [20, 0, 30, 10])];
    let preds = [rect(w, h, 0, 0.9, [0, 0, 10, 10]), rect(w, h, 0, 0.8, [0, 12, 10, 20]), rect(w, h, 0, 0.7, [21, 0, 30, 10])];
    let hits: Vec<bool> = preds.iter().map(|p| gts.iter().any(|g| mask_iou(p.mask(), g.mask()).unwrap() >= 0.5)).collect();
    let want = pr_table_ap(&hits, 2);
    let set = |v: &[Prediction]| PredictionSet::new(0, w, h, Provenance::Model, v.to_vec()).unwrap();
    let got = ap_frame(&[set(&preds)], &[set(&gts)], 0.5).map_err(|e| e.to_string())?;
    check(got == want, format!("hand PR case: {got} vs table {want}"))?;

    // frame 0: I = 50, U = 100; frame 1: only one track, U = 50
    let a = Track::new(CategoryId(1), 1.0, BTreeMap::from([(0, rect(w, h, 0, 1.0, [0, 0, 10, 10]).mask().clone()), (1, rect(w, h, 1, 1.0, [0, 0, 10, 5]).mask().clone())])).unwrap();
    let b = Track::new(CategoryId(1), 1.0, BTreeMap::from([(0, rect(w, h, 0, 1.0, [0, 0, 5, 10]).mask().clone())])).unwrap();
    let viou = video_iou(&a, &b).map_err(|e| e.to_string())?;
    check((viou - 1.0 / 3.0).abs() < 1e-15, format!("video IoU {viou}"))?;
    Ok(format!("GT scores 1, empty scores 0, hand PR AP {want:.4}, video IoU 1/3"))
}

// ---------------------------------------------------------------- 8

fn nms_oracle(masks: &[Prediction], threshold: f64) -> Vec<bool> {
    let mut keep = vec![true; masks.len()];
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for (i, j) in (0..masks.len()).tuple_combinations() {
            if !(keep[i] && keep[j]) {
                continue;
            }
            let iom = mask_iom(masks[i].mask(), masks[j].mask()).unwrap();
            if iom > threshold && best.is_none_or(|(b, _, _)| iom > b) {
                best = Some((iom, i, j));
            }
        }
        let Some((_, i, j)) = best else { return keep };
        let loser = if masks[i].area() < masks[j].area() { i } else { j };
        keep[loser] = false;
    }
}

fn iom_nms_oracle() -> Outcome {
    let (w, h) = (32, 24);
    let mut r = rng(8);
    let mut suppressed = 0;
    for k in 0..100 {
        let masks: Vec<Prediction> = (0..10)
            .map(|_| {
                let (x0, y0) = (r.gen_range(0..24u32), r.gen_range(0..16u32));
                let (bw, bh) = (r.gen_range(2..=12u32), r.gen_range(2..=10u32));
                rect(w, h, 0, 1.0, [x0, y0, (x0 + bw).min(w as u32), (y0 + bh).min(h as u32)])
            })
            .collect();
        let refs: Vec<&Prediction> = masks.iter().collect();
        let got = iom_nms(&refs, 0.5).map_err(|e| e.to_string())?;
        check(got == nms_oracle(&masks, 0.5), format!("input {k}: survivors differ from oracle"))?;
        for (i, j) in (0..10).tuple_combinations() {
            if got[i] && got[j] {
                let iom = mask_iom(masks[i].mask(), masks[j].mask()).unwrap();
                check(iom <= 0.5, format!("input {k}: survivors {i}, {j} have IoM {iom}"))?;
            }
        }
        suppressed += got.iter().filter(|&&k| !k).count();
    }
    Ok(format!("100 inputs match the oracle, {suppressed} suppressions"))
}

// ---------------------------------------------------------------- 9

fn pipeline_tree(cfg_path: &Path, jobs: usize) -> Result<Files, String> {
    let cfg = Config::load(cfg_path, &Overrides { jobs: Some(jobs), ..Default::default() }).map_err(|e| e.to_string())?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| e.to_string())?;
    let tree = pool.install(|| execute(CommandKind::Pipeline, &cfg)).map_err(|e| e.to_string())?;
    Ok(tree.files().clone())
}

fn read_tree(root: &Path) -> Files {
    fn walk(root: &Path, dir: &Path, out: &mut Files) {
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

fn determinism() -> Outcome {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("config.json");
    let body = json!({"seed": 9, "overlay": true, "synth": {"corruption": {"drop_rate": 0.3}}, "maskconsist": {"delta": 1}});
    std::fs::write(&cfg, serde_json::to_vec_pretty(&body).unwrap()).map_err(|e| e.to_string())?;
    let a = pipeline_tree(&cfg, 1)?;
    let b = pipeline_tree(&cfg, 1)?;
    let c = pipeline_tree(&cfg, 4)?;
    check(a == b, "two single-thread runs differ")?;
    check(a == c, "--jobs 4 differs from --jobs 1")?;

    let bin = env!("CARGO_BIN_EXE_maskcon");
    for (out, jobs) in [("x", "1"), ("y", "3")] {
        let status = Command::new(bin)
            .args(["pipeline", "--config", cfg.to_str().unwrap(), "--out", dir.path().join(out).to_str().unwrap(), "--jobs", jobs])
            .stdout(std::process::Stdio::null())
            .status()
            .map_err(|e| e.to_string())?;
        check(status.success(), format!("binary run with --jobs {jobs} failed"))?;
    }
    let (x, y) = (read_tree(&dir.path().join("x")), read_tree(&dir.path().join("y")));
    check(x == y, "binary runs with --jobs 1 and --jobs 3 differ")?;
    check(x == a, "binary output differs from the in-process tree")?;
    Ok(format!("{} files byte-identical across 5 runs (jobs 1, 3, 4)", a.len()))
}

// ---------------------------------------------------------------- 10

fn jitter(p: &Prediction, r: &mut ChaCha8Rng) -> Option<Prediction> {
    let (w, h) = p.mask().dims();
    let (dx, dy) = (r.gen_range(-1i64..=1), r.gen_range(-1i64..=1));
    let m = BinaryMask::from_fn(w, h, |x, y| {
        let (sx, sy) = (x as i64 - dx, y as i64 - dy);
        sx >= 0 && sy >= 0 && sx < w as i64 && sy < h as i64 && p.mask().get(sx as usize, sy as usize)
    })
    .ok()?;
    if m.is_empty() {
        return None;
    }
    Prediction::new(m, p.category(), r.gen_range(0.5..1.0), p.frame()).ok()
}

fn tc_direction() -> Outcome {
    let cfg = MaskConsistConfig {
        delta: 1,
        ..Default::default()
    };
    let mut lines = Vec::new();
    for seed in 0..5u64 {
        let spec = random_scene(&RandomSceneParams::default(), 100 + seed).map_err(|e| e.to_string())?;
        let scene = Scene::new(spec).map_err(|e| e.to_string())?;
        let rendered = scene.render().map_err(|e| e.to_string())?;
        let gt = rendered.ground_truth();
        let mut r = rng(200 + seed);
        let preds: Vec<PredictionSet> = gt
            .iter()
            .map(|g| {
                let (w, h) = g.dims();
                let jittered = g.iter().filter_map(|p| jitter(p, &mut r)).collect();
                PredictionSet::new(g.frame(), w, h, Provenance::Model, jittered).unwrap()
            })
            .collect();
        let corrupted = corrupt_labels(
            &gt,
            &rendered.object_ids(),
            &CorruptionSpec {
                drop_rate: 0.3,
                seed,
                ..Default::default()
            },
        )
        .map_err(|e| e.to_string())?;
        let frames: Vec<FrameLabels> = preds
            .iter()
            .zip(&corrupted.labels)
            .map(|(p, q)| FrameLabels::new(p.clone(), q.clone()))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let pairs = (0..gt.len() - 1).map(|k| scene.pair_sampling(k, k + 1)).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
        let forward = (0..gt.len() - 1).map(|k| scene.forward_sampling(k)).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
        let out = consist_sequence(&frames, &pairs, &cfg).map_err(|e| e.to_string())?;
        let before = temporal_consistency(&corrupted.labels, &forward).map_err(|e| e.to_string())?;
        let after = temporal_consistency(&out.labels, &forward).map_err(|e| e.to_string())?;
        check(after > before, format!("scene {seed}: TC {after:.4} not above corrupted {before:.4}"))?;
        lines.push(format!("{before:.3}->{after:.3}"));
    }
    Ok(format!("TC rises on 5 scenes: {}", lines.join(", ")))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("Hungarian optimality", hungarian_optimality),
        ("Flow-boundary loss fidelity", loss_fidelity),
        ("Amplification argmax invariance", amplification_invariance),
        ("Warp correctness", warp_correctness),
        ("Recovery experiment", recovery_experiment),
        ("Tilted-plane Jacobian", tilted_plane),
        ("Metrics sanity", metrics_sanity),
        ("IoM-NMS oracle", iom_nms_oracle),
        ("Pipeline determinism", determinism),
        ("TC directionality", tc_direction),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2}. {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2}. {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
