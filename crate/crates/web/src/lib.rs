//! WebAssembly bindings for the static demo page in `www/`: generate a
//! synthetic scene, segment it with clicks, and collect and score mask
//! tracks in the browser.

use std::sync::Arc;

use mugtrack_core::metrics::{eval_manifest, TrackMatching};
use mugtrack_core::pipeline::{collect_clip, filter_tracks_at, CollectOptions};
use mugtrack_core::segmenter::{segment, OracleSegmenter};
use mugtrack_core::store::ground_truth_manifest;
use mugtrack_core::synth::generate_clip;
use mugtrack_core::{
    BinaryMask, ClipInfo, ClipManifest, EvalMode, FrameRef, PipelineConfig, Point, PointPrompt, SceneParams,
    SyntheticScene,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const STAMP: &str = "1970-01-01T00:00:00Z";

// Errors cross into JavaScript as thrown strings.
fn js_err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

#[derive(Serialize)]
struct Candidate {
    region: Option<String>,
    area: usize,
    predicted_iou: f64,
}

#[derive(Serialize)]
struct TrackRow {
    track_id: String,
    kept: bool,
    min_step_iou: f64,
    matched: Option<String>,
    jf: Option<f64>,
}

#[derive(Serialize)]
struct CollectSummary {
    gamma: f64,
    tracks: Vec<TrackRow>,
    kept: usize,
    regions: usize,
    dataset_jf: f64,
}

/// A synthetic clip held in memory, plus the last segmentation and
/// collection results for drawing.
#[wasm_bindgen]
pub struct Demo {
    scene: Arc<SyntheticScene>,
    info: ClipInfo,
    selection: Option<BinaryMask>,
    collected: Option<ClipManifest>,
}

#[wasm_bindgen]
impl Demo {
    /// Generates a clip; the same arguments always give the same scene.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, shapes: usize, frames: usize, size: usize) -> Result<Demo, String> {
        let params = SceneParams { height: size, width: size, frames, shapes, seed };
        let scene = generate_clip(&params).map_err(js_err)?;
        let info = ClipInfo {
            clip_id: format!("demo-{seed}"),
            dims: scene.dims(),
            frames: (1..=frames).map(|t| format!("frame_{t:04}")).collect(),
            synthetic: Some(params),
        };
        Ok(Demo { scene: Arc::new(scene), info, selection: None, collected: None })
    }

    pub fn width(&self) -> usize {
        self.info.dims.width
    }

    pub fn height(&self) -> usize {
        self.info.dims.height
    }

    pub fn frames(&self) -> usize {
        self.info.frames.len()
    }

    pub fn regions(&self) -> usize {
        self.scene.regions().len()
    }

    /// RGBA pixels of frame `t` (1-based), ready for `ImageData`.
    pub fn frame_rgba(&self, t: usize) -> Result<Vec<u8>, String> {
        self.check_frame(t)?;
        Ok(self.scene.label_map(t).iter().flat_map(|&l| with_alpha(palette(l))).collect())
    }

    /// Segments frame `t` from click prompts (`labels[i]` is 1 for a
    /// positive click, 0 for a negative one) and keeps the best candidate as
    /// the selection. Returns the candidates as JSON, best first.
    pub fn click(&mut self, t: usize, xs: &[f64], ys: &[f64], labels: &[u8]) -> Result<String, String> {
        self.check_frame(t)?;
        if xs.len() != ys.len() || xs.len() != labels.len() {
            return Err("xs, ys and labels must have the same length".to_string());
        }
        let prompts: Vec<PointPrompt> = xs
            .iter()
            .zip(ys)
            .zip(labels)
            .map(|((&x, &y), &l)| {
                let p = Point::new(x, y);
                if l == 0 {
                    PointPrompt::negative(p)
                } else {
                    PointPrompt::positive(p)
                }
            })
            .collect();
        let frame = FrameRef::new(t, self.info.frames[t - 1].clone(), self.info.dims);
        let seg = OracleSegmenter::new(self.scene.clone());
        let found = match segment(&seg, &frame, &prompts, 3) {
            Ok(c) => c,
            Err(mugtrack_core::SegmentError::NoCandidate) => Vec::new(),
            Err(e) => return Err(js_err(e)),
        };
        self.selection = found.first().map(|c| c.mask.clone());
        let out: Vec<Candidate> = found
            .iter()
            .map(|c| Candidate {
                region: self.scene.regions().iter().find(|r| r.masks[t - 1] == c.mask).map(|r| r.id.clone()),
                area: c.mask.area(),
                predicted_iou: c.predicted_iou,
            })
            .collect();
        serde_json::to_string(&out).map_err(js_err)
    }

    /// The current selection as one byte per pixel (1 inside), or an empty
    /// array when nothing is selected.
    pub fn selection(&self) -> Vec<u8> {
        self.selection.as_ref().map(mask_bytes).unwrap_or_default()
    }

    /// Runs the collection pipeline with the oracle segmenter and exact
    /// flows, applies the gamma filter and scores the kept tracks against
    /// ground truth. Returns a JSON summary.
    pub fn collect(&mut self, gamma: f64, points: usize, seed: u64) -> Result<String, String> {
        let config = PipelineConfig { gamma, points_per_target: points, seed, ..Default::default() };
        let seg = OracleSegmenter::new(self.scene.clone());
        let options = CollectOptions { threads: Some(1), timestamp: Some(STAMP.into()), ..Default::default() };
        let raw = collect_clip(&self.info, self.scene.as_ref(), &seg, &config, &options).map_err(js_err)?;
        let kept = filter_tracks_at(&raw, gamma, STAMP);
        let gt = ground_truth_manifest(&self.scene, &self.info.clip_id, self.info.frames.clone(), STAMP);
        let mut scored = kept.clone();
        scored.tracks.retain(mugtrack_core::metrics::is_kept);
        let report = eval_manifest(&scored, &gt, EvalMode::PerTrack, TrackMatching::Iou, None).map_err(js_err)?;
        let pairs = kept_pairs(&scored, &gt)?;
        let tracks = kept
            .tracks
            .iter()
            .map(|t| {
                let matched = pairs.iter().find(|(_, p)| p == &t.track_id).map(|(g, _)| g.clone());
                TrackRow {
                    track_id: t.track_id.clone(),
                    kept: !t.filtered_out,
                    min_step_iou: t.step_ious().fold(1.0, f64::min),
                    jf: matched.as_ref().and_then(|g| report.tracks.get(g)).map(|s| s.jf),
                    matched,
                }
            })
            .collect();
        let summary = CollectSummary {
            gamma,
            kept: scored.tracks.len(),
            tracks,
            regions: gt.tracks.len(),
            dataset_jf: report.dataset.jf,
        };
        self.collected = Some(kept);
        serde_json::to_string(&summary).map_err(js_err)
    }

    /// Mask of collected track `index` at frame `t`, one byte per pixel;
    /// empty when the track has no mask there.
    pub fn track_mask(&self, index: usize, t: usize) -> Vec<u8> {
        self.collected
            .as_ref()
            .and_then(|m| m.tracks.get(index))
            .and_then(|track| track.mask_at(t))
            .and_then(Result::ok)
            .map(|m| mask_bytes(&m))
            .unwrap_or_default()
    }

    fn check_frame(&self, t: usize) -> Result<(), String> {
        if t == 0 || t > self.info.frames.len() {
            return Err(format!("frame {t} outside 1..={}", self.info.frames.len()));
        }
        Ok(())
    }
}

fn kept_pairs(pred: &ClipManifest, gt: &ClipManifest) -> Result<Vec<(String, String)>, String> {
    let p: Vec<_> = pred.tracks.iter().collect();
    let g: Vec<_> = gt.tracks.iter().collect();
    Ok(mugtrack_core::metrics::match_tracks_by_iou(&p, &g).map_err(js_err)?.into_iter().collect())
}

fn mask_bytes(m: &BinaryMask) -> Vec<u8> {
    m.bits().iter().map(|&b| b as u8).collect()
}

fn with_alpha([r, g, b]: [u8; 3]) -> [u8; 4] {
    [r, g, b, 255]
}

/// Background is dark grey; other labels get spread-out hues.
fn palette(label: u8) -> [u8; 3] {
    if label == 0 {
        return [40, 40, 48];
    }
    let h = (label as f64 * 0.381966).fract() * 6.0;
    let x = (1.0 - (h % 2.0 - 1.0).abs()) * 170.0 + 60.0;
    let (hi, lo) = (230.0, 60.0);
    let (r, g, b) = match h as u32 {
        0 => (hi, x, lo),
        1 => (x, hi, lo),
        2 => (lo, hi, x),
        3 => (lo, x, hi),
        4 => (x, lo, hi),
        _ => (hi, lo, x),
    };
    [r as u8, g as u8, b as u8]
}
