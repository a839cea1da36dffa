//! Mask track collection.
//!
//! Frame 1 is segmented from a grid of single-point prompts; the deduplicated
//! proposals seed one track each. Every later frame samples points from the
//! track's previous mask, warps them with the flow into the new frame, prompts
//! the segmenter with them and keeps the proposal that overlaps the
//! flow-warped previous mask best. That overlap is the track's step IoU, which
//! the curation filter thresholds.

use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::flow::{warp_mask_with, warp_points, FlowError, FlowField, FlowProvider, WarpOptions};
use crate::mask::{grid_points, iou, sample_points_with, BinaryMask, MaskError, Point, RleMask, SamplingStrategy};
use crate::segmenter::{segment, CandidateMask, FrameRef, PointPrompt, SegmentError, Segmenter};
use crate::store::{AuditAction, AuditEvent, ClipInfo, ClipManifest};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error("clip needs at least 2 frames, has {0}")]
    TooFewFrames(usize),
    #[error("track lost: {0}")]
    TrackLost(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Mask(#[from] MaskError),
}

impl PipelineError {
    pub fn code(&self) -> &'static str {
        match self {
            PipelineError::InvalidConfig(_) => "INVALID_CONFIG",
            PipelineError::TooFewFrames(_) => "TOO_FEW_FRAMES",
            PipelineError::TrackLost(_) => "TRACK_LOST",
            PipelineError::Flow(e) => e.code(),
            PipelineError::Segment(e) => e.code(),
            PipelineError::Mask(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CollectMode {
    /// Flow-warped point prompts, IoU argmax against the warped mask.
    #[default]
    Propagate,
    /// Grid-prompt every frame and link proposals by IoU alone.
    GridBaseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub points_per_target: usize,
    pub grid_per_side: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub resample_period: usize,
    pub max_candidates: usize,
    pub seed: u64,
    pub dedup_iou: f64,
    /// Cluster count for k-means prompt post-processing.
    pub kmeans_k: usize,
    /// Fresh point samples tried before a track is declared lost.
    pub prompt_attempts: usize,
    pub close_holes: bool,
    pub mode: CollectMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            points_per_target: 8,
            grid_per_side: 32,
            gamma: 0.9,
            alpha: 0.2,
            resample_period: 1,
            max_candidates: 3,
            seed: 0,
            dedup_iou: 0.9,
            kmeans_k: 10,
            prompt_attempts: 8,
            close_holes: false,
            mode: CollectMode::Propagate,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(PipelineError::InvalidConfig(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("gamma", self.gamma)?;
        unit("alpha", self.alpha)?;
        unit("dedup_iou", self.dedup_iou)?;
        for (name, v) in [
            ("points_per_target", self.points_per_target),
            ("grid_per_side", self.grid_per_side),
            ("resample_period", self.resample_period),
            ("max_candidates", self.max_candidates),
            ("kmeans_k", self.kmeans_k),
            ("prompt_attempts", self.prompt_attempts),
        ] {
            if v == 0 {
                return Err(PipelineError::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    fn warp_options(&self) -> WarpOptions {
        WarpOptions { close_holes: self.close_holes }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackStatus {
    #[default]
    Auto,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameSource {
    #[default]
    Auto,
    Refined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackFrame {
    pub frame_index: usize,
    pub mask: RleMask,
    /// IoU between the flow-warped previous mask and this mask; absent on the
    /// track's first frame.
    pub step_iou: Option<f64>,
    #[serde(default)]
    pub source: FrameSource,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrackProvenance {
    /// Position of the seed mask after deduplication.
    pub seed_rank: usize,
    /// RNG stream of this track, hex.
    pub rng_stream: String,
    /// Frames after which prompts were resampled from the current mask.
    #[serde(default)]
    pub resampled_at: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lost_at: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lost_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskTrack {
    pub track_id: String,
    #[serde(default)]
    pub status: TrackStatus,
    /// Set when the curation filter removed the track.
    #[serde(default)]
    pub filtered_out: bool,
    pub frames: Vec<TrackFrame>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<TrackProvenance>,
}

impl MaskTrack {
    pub fn start_frame(&self) -> Option<usize> {
        self.frames.first().map(|f| f.frame_index)
    }

    pub fn end_frame(&self) -> Option<usize> {
        self.frames.last().map(|f| f.frame_index)
    }

    pub fn frame(&self, frame_index: usize) -> Option<&TrackFrame> {
        let start = self.start_frame()?;
        self.frames.get(frame_index.checked_sub(start)?)
    }

    pub fn mask_at(&self, frame_index: usize) -> Option<Result<BinaryMask, MaskError>> {
        self.frame(frame_index).map(|f| f.mask.decode())
    }

    pub fn step_ious(&self) -> impl Iterator<Item = f64> + '_ {
        self.frames.iter().filter_map(|f| f.step_iou)
    }

    /// Builds a track from consecutive masks starting at `start_frame`.
    pub fn from_masks(track_id: impl Into<String>, start_frame: usize, masks: &[BinaryMask]) -> Self {
        MaskTrack {
            track_id: track_id.into(),
            status: TrackStatus::Auto,
            filtered_out: false,
            frames: masks
                .iter()
                .enumerate()
                .map(|(i, m)| TrackFrame {
                    frame_index: start_frame + i,
                    mask: m.to_rle(),
                    step_iou: None,
                    source: FrameSource::Auto,
                })
                .collect(),
            provenance: None,
        }
    }
}

/// Greedy non-maximum suppression: highest predicted IoU first (stable),
/// dropping any mask whose IoU with a kept mask exceeds `threshold`.
pub fn nms(mut candidates: Vec<CandidateMask>, threshold: f64) -> Vec<CandidateMask> {
    candidates.sort_by(|a, b| b.predicted_iou.total_cmp(&a.predicted_iou));
    if threshold < 1.0 {
        // exact duplicates have IoU 1 and would be suppressed anyway
        let mut seen = HashSet::new();
        candidates.retain(|c| seen.insert(c.mask.clone()));
    }
    let mut kept: Vec<CandidateMask> = Vec::new();
    for c in candidates {
        if c.mask.is_empty() {
            continue;
        }
        let suppressed = kept
            .iter()
            .any(|k| iou(&k.mask, &c.mask).expect("candidates share the frame size") > threshold);
        if !suppressed {
            kept.push(c);
        }
    }
    kept
}

/// Grid-prompts a frame with one positive point per cell and returns the
/// deduplicated proposals.
pub fn init_seed_candidates<S: Segmenter + ?Sized>(
    frame: &FrameRef,
    seg: &S,
    config: &PipelineConfig,
) -> Result<Vec<CandidateMask>, PipelineError> {
    let mut pool = Vec::new();
    for p in grid_points(frame.dims, config.grid_per_side) {
        match segment(seg, frame, &[PointPrompt::positive(p)], config.max_candidates) {
            Ok(c) => pool.extend(c),
            Err(SegmentError::NoCandidate) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(nms(pool, config.dedup_iou))
}

pub fn init_seed_masks<S: Segmenter + ?Sized>(
    frame: &FrameRef,
    seg: &S,
    config: &PipelineConfig,
) -> Result<Vec<BinaryMask>, PipelineError> {
    Ok(init_seed_candidates(frame, seg, config)?.into_iter().map(|c| c.mask).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub mask: BinaryMask,
    pub step_iou: f64,
    /// Warped prompt points that produced the selected candidates.
    pub prompts: Vec<Point>,
}

/// Index of the candidate overlapping `reference` most; the first one wins
/// ties.
pub fn select_by_iou(reference: &BinaryMask, candidates: &[BinaryMask]) -> Result<Option<(usize, f64)>, MaskError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let v = iou(reference, c)?;
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    Ok(best)
}

/// One propagation step from freshly sampled prompts.
pub fn propagate_track_step<S: Segmenter + ?Sized>(
    prev_mask: &BinaryMask,
    flow: &FlowField,
    frame: &FrameRef,
    seg: &S,
    config: &PipelineConfig,
    rng: &mut ChaCha8Rng,
) -> Result<StepOutcome, PipelineError> {
    propagate_with_prompts(prev_mask, flow, frame, seg, config, rng, None)
}

/// One propagation step. `carried` are last step's warped prompts, reused
/// instead of a fresh sample on the first attempt.
pub fn propagate_with_prompts<S: Segmenter + ?Sized>(
    prev_mask: &BinaryMask,
    flow: &FlowField,
    frame: &FrameRef,
    seg: &S,
    config: &PipelineConfig,
    rng: &mut ChaCha8Rng,
    carried: Option<&[Point]>,
) -> Result<StepOutcome, PipelineError> {
    if prev_mask.is_empty() {
        return Err(PipelineError::TrackLost("previous mask is empty".into()));
    }
    prev_mask.dims().ensure_same(frame.dims)?;
    let warped_prev = warp_mask_with(prev_mask, flow, config.warp_options())?;

    for attempt in 0..config.prompt_attempts {
        let sampled = match (attempt, carried) {
            (0, Some(points)) => points.to_vec(),
            _ => sample_points_with(prev_mask, config.points_per_target, SamplingStrategy::UniformRandom, rng)?,
        };
        let warped = warp_points(&sampled, flow, frame.dims)?;
        let prompts: Vec<PointPrompt> = warped.iter().copied().map(PointPrompt::positive).collect();
        let candidates = match segment(seg, frame, &prompts, config.max_candidates) {
            Ok(c) => c,
            Err(SegmentError::NoCandidate) => continue,
            Err(e) => return Err(e.into()),
        };
        let masks: Vec<BinaryMask> = candidates.into_iter().map(|c| c.mask).collect();
        let (best, step_iou) = select_by_iou(&warped_prev, &masks)?.expect("segment never returns an empty list");
        return Ok(StepOutcome { mask: masks.into_iter().nth(best).unwrap(), step_iou, prompts: warped });
    }
    Err(PipelineError::TrackLost(format!(
        "no candidate for frame {} after {} prompt attempts",
        frame.index, config.prompt_attempts
    )))
}

/// Prompt resampling rule: on frames that are multiples of the period,
/// resample when consecutive masks overlap by more than `alpha`.
pub fn should_resample(frame_index: usize, consecutive_iou: f64, config: &PipelineConfig) -> bool {
    frame_index.is_multiple_of(config.resample_period) && consecutive_iou > config.alpha
}

pub fn resample_prompts(
    frame_index: usize,
    prev_mask: &BinaryMask,
    current_mask: &BinaryMask,
    config: &PipelineConfig,
) -> Result<bool, MaskError> {
    Ok(should_resample(frame_index, iou(prev_mask, current_mask)?, config))
}

/// Stable RNG stream derived from the seed mask itself, so a track's random
/// draws do not depend on which other tracks exist.
pub fn track_stream(seed_mask: &BinaryMask) -> u64 {
    let rle = seed_mask.to_rle();
    let mut h = Sha256::new();
    h.update(rle.size[0].to_le_bytes());
    h.update(rle.size[1].to_le_bytes());
    for c in &rle.counts {
        h.update(c.to_le_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

pub fn track_rng(seed: u64, seed_mask: &BinaryMask) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(track_stream(seed_mask));
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Progress {
    pub done: usize,
    pub total: usize,
}

#[derive(Default)]
pub struct CollectOptions<'a> {
    /// Worker threads for track propagation; `None` uses all cores.
    pub threads: Option<usize>,
    /// RFC 3339 stamp for the creation event; defaults to
    /// [`crate::store::timestamp_now`].
    pub timestamp: Option<String>,
    pub progress: Option<&'a (dyn Fn(Progress) + Sync)>,
    /// Frame references sent to the segmenter, when they differ from the
    /// clip's stored frame list (remote servers usually need absolute paths).
    pub segmenter_refs: Option<Vec<String>>,
}

fn frame_refs(clip: &ClipInfo, refs: Option<&[String]>) -> Vec<FrameRef> {
    refs.unwrap_or(&clip.frames)
        .iter()
        .enumerate()
        .map(|(i, r)| FrameRef::new(i + 1, r.clone(), clip.dims))
        .collect()
}

fn load_flows<F: FlowProvider + ?Sized>(clip: &ClipInfo, flows: &F) -> Result<Vec<FlowField>, PipelineError> {
    (1..clip.frames.len())
        .map(|t| {
            let f = flows.flow(t)?;
            if f.dims() != clip.dims {
                return Err(FlowError::DimensionMismatch { flow: f.dims(), frame: clip.dims }.into());
            }
            Ok(f)
        })
        .collect()
}

struct Propagated {
    frames: Vec<TrackFrame>,
    provenance: TrackProvenance,
}

fn propagate_track<S: Segmenter + ?Sized>(
    seed_rank: usize,
    seed_mask: &BinaryMask,
    frames: &[FrameRef],
    flows: &[FlowField],
    seg: &S,
    config: &PipelineConfig,
    tick: &dyn Fn(),
) -> Result<Propagated, PipelineError> {
    let stream = track_stream(seed_mask);
    let mut rng = track_rng(config.seed, seed_mask);
    let mut provenance = TrackProvenance { seed_rank, rng_stream: format!("{stream:016x}"), ..Default::default() };
    let mut out = vec![TrackFrame {
        frame_index: 1,
        mask: seed_mask.to_rle(),
        step_iou: None,
        source: FrameSource::Auto,
    }];
    let mut prev = seed_mask.clone();
    let mut carried: Option<Vec<Point>> = None;
    for (frame, flow) in frames.iter().skip(1).zip(flows) {
        match propagate_with_prompts(&prev, flow, frame, seg, config, &mut rng, carried.as_deref()) {
            Ok(step) => {
                out.push(TrackFrame {
                    frame_index: frame.index,
                    mask: step.mask.to_rle(),
                    step_iou: Some(step.step_iou),
                    source: FrameSource::Auto,
                });
                if resample_prompts(frame.index, &prev, &step.mask, config)? {
                    provenance.resampled_at.push(frame.index);
                    carried = None;
                } else {
                    carried = Some(step.prompts);
                }
                prev = step.mask;
                tick();
            }
            Err(PipelineError::TrackLost(reason)) => {
                log::debug!("track {seed_rank} lost at frame {}: {reason}", frame.index);
                provenance.lost_at = Some(frame.index);
                provenance.lost_reason = Some(reason);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Propagated { frames: out, provenance })
}

/// Runs the full collection on one clip.
pub fn collect_clip<F, S>(
    clip: &ClipInfo,
    flows: &F,
    seg: &S,
    config: &PipelineConfig,
    options: &CollectOptions<'_>,
) -> Result<ClipManifest, PipelineError>
where
    F: FlowProvider + ?Sized,
    S: Segmenter + ?Sized,
{
    config.validate()?;
    if clip.frames.len() < 2 {
        return Err(PipelineError::TooFewFrames(clip.frames.len()));
    }
    if options.segmenter_refs.as_ref().is_some_and(|r| r.len() != clip.frames.len()) {
        return Err(PipelineError::InvalidConfig("one segmenter reference per frame is required".into()));
    }
    let frames = frame_refs(clip, options.segmenter_refs.as_deref());
    let flows = load_flows(clip, flows)?;

    let seeds = init_seed_masks(&frames[0], seg, config)?;
    log::info!("clip {}: {} seed masks", clip.clip_id, seeds.len());

    let total = seeds.len() * (frames.len() - 1);
    let done = AtomicUsize::new(0);
    let tick = || {
        let d = done.fetch_add(1, Ordering::Relaxed) + 1;
        if let Some(p) = options.progress {
            p(Progress { done: d, total });
        }
    };

    let tracks: Vec<MaskTrack> = match config.mode {
        CollectMode::Propagate => {
            let results = run_tracks(options.threads, &seeds, |rank, seed| {
                propagate_track(rank, seed, &frames, &flows, seg, config, &tick)
            })?;
            results
                .into_iter()
                .enumerate()
                .map(|(rank, p)| MaskTrack {
                    track_id: track_id(rank),
                    status: TrackStatus::Auto,
                    filtered_out: false,
                    frames: p.frames,
                    provenance: Some(p.provenance),
                })
                .collect()
        }
        CollectMode::GridBaseline => grid_baseline(&seeds, &frames, &flows, seg, config, &tick)?,
    };

    let mut manifest = ClipManifest::new(clip.clip_id.clone(), clip.dims, clip.frames.clone());
    manifest.config = Some(config.clone());
    manifest.tracks = tracks;
    let lost = manifest.tracks.iter().filter(|t| t.frames.len() < frames.len()).count();
    manifest.audit.push(AuditEvent {
        timestamp: options.timestamp.clone().unwrap_or_else(crate::store::timestamp_now),
        actor: "pipeline".into(),
        action: AuditAction::Created,
        payload: serde_json::json!({
            "tracks": manifest.tracks.len(),
            "truncated": lost,
            "mode": config.mode,
            "seed": config.seed,
        }),
    });
    Ok(manifest)
}

fn track_id(rank: usize) -> String {
    format!("t{rank:04}")
}

fn run_tracks<T, E, F>(threads: Option<usize>, seeds: &[BinaryMask], f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize, &BinaryMask) -> Result<T, E> + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let work = || seeds.par_iter().enumerate().map(|(i, s)| f(i, s)).collect::<Result<Vec<_>, E>>();
        match threads {
            Some(1) => {}
            Some(n) => {
                if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                    return pool.install(work);
                }
            }
            None => return work(),
        }
    }
    let _ = threads;
    seeds.iter().enumerate().map(|(i, s)| f(i, s)).collect()
}

fn grid_baseline<S: Segmenter + ?Sized>(
    seeds: &[BinaryMask],
    frames: &[FrameRef],
    flows: &[FlowField],
    seg: &S,
    config: &PipelineConfig,
    tick: &dyn Fn(),
) -> Result<Vec<MaskTrack>, PipelineError> {
    let mut tracks: Vec<MaskTrack> = seeds
        .iter()
        .enumerate()
        .map(|(rank, m)| {
            let mut t = MaskTrack::from_masks(track_id(rank), 1, std::slice::from_ref(m));
            t.provenance = Some(TrackProvenance { seed_rank: rank, ..Default::default() });
            t
        })
        .collect();
    let mut prev: Vec<Option<BinaryMask>> = seeds.iter().cloned().map(Some).collect();
    for (frame, flow) in frames.iter().skip(1).zip(flows) {
        let pool = init_seed_masks(frame, seg, config)?;
        for (track, last) in tracks.iter_mut().zip(prev.iter_mut()) {
            let Some(p) = last.as_ref() else { continue };
            let warped = warp_mask_with(p, flow, config.warp_options())?;
            match select_by_iou(&warped, &pool)? {
                Some((i, v)) => {
                    track.frames.push(TrackFrame {
                        frame_index: frame.index,
                        mask: pool[i].to_rle(),
                        step_iou: Some(v),
                        source: FrameSource::Auto,
                    });
                    *last = Some(pool[i].clone());
                    tick();
                }
                None => {
                    if let Some(prov) = track.provenance.as_mut() {
                        prov.lost_at = Some(frame.index);
                        prov.lost_reason = Some("no grid proposals".into());
                    }
                    *last = None;
                }
            }
        }
    }
    Ok(tracks)
}

/// Whether a track spans the clip and every step IoU exceeds `gamma`.
pub fn passes_filter(track: &MaskTrack, clip_frames: usize, gamma: f64) -> bool {
    track.start_frame() == Some(1)
        && track.frames.len() == clip_frames
        && track.frames.iter().skip(1).all(|f| f.step_iou.is_some_and(|v| v > gamma))
}

/// Curation filter. Failing tracks are marked `filtered_out`, never
/// removed, and passing tracks are cleared of the mark. Review status is left
/// alone so a later filter run cannot undo a human decision.
pub fn filter_tracks(manifest: &ClipManifest, gamma: f64) -> ClipManifest {
    filter_tracks_at(manifest, gamma, &crate::store::timestamp_now())
}

pub fn filter_tracks_at(manifest: &ClipManifest, gamma: f64, timestamp: &str) -> ClipManifest {
    let mut out = manifest.clone();
    let n = out.frames.len();
    let mut removed = Vec::new();
    let mut changed = out.gamma != Some(gamma);
    for track in &mut out.tracks {
        let keep = passes_filter(track, n, gamma);
        if !keep {
            removed.push(track.track_id.clone());
        }
        if keep == track.filtered_out {
            track.filtered_out = !keep;
            changed = true;
        }
    }
    out.gamma = Some(gamma);
    if changed {
        out.audit.push(AuditEvent {
            timestamp: timestamp.to_string(),
            actor: "filter".into(),
            action: AuditAction::Filtered,
            payload: serde_json::json!({ "gamma": gamma, "removed": removed }),
        });
    }
    out
}

/// Re-prompts the segmenter with k-means points spread over `mask` and
/// returns the proposal closest to it.
pub fn postprocess_with_kmeans<S: Segmenter + ?Sized>(
    mask: &BinaryMask,
    frame: &FrameRef,
    seg: &S,
    config: &PipelineConfig,
) -> Result<CandidateMask, PipelineError> {
    let mut rng = track_rng(config.seed, mask);
    let points = sample_points_with(mask, config.kmeans_k, SamplingStrategy::Kmeans, &mut rng)?;
    let prompts: Vec<PointPrompt> = points.into_iter().map(PointPrompt::positive).collect();
    let candidates = segment(seg, frame, &prompts, config.max_candidates)?;
    let masks: Vec<BinaryMask> = candidates.iter().map(|c| c.mask.clone()).collect();
    let (best, _) = select_by_iou(mask, &masks)?.expect("segment never returns an empty list");
    Ok(candidates.into_iter().nth(best).unwrap())
}
