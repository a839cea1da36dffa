//! J (region IoU), F (boundary F-measure) and dataset statistics.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mask::{boundary_f_score, default_boundary_tolerance, iou, BinaryMask, Dims, MaskError};
use crate::pipeline::{MaskTrack, TrackStatus};
use crate::store::ClipManifest;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("prediction is {found}, ground truth is {expected}")]
    DimensionMismatch { expected: Dims, found: Dims },
    #[error("ground-truth track {track} has frame {frame}, prediction clip has {frames} frames")]
    FrameRangeMismatch { track: String, frame: usize, frames: usize },
    #[error("{side} tracks {a} and {b} overlap on frame {frame}")]
    OverlapInVosMode { side: &'static str, frame: usize, a: String, b: String },
    #[error(transparent)]
    Mask(#[from] MaskError),
}

impl MetricsError {
    pub fn code(&self) -> &'static str {
        match self {
            MetricsError::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
            MetricsError::FrameRangeMismatch { .. } => "FRAME_RANGE_MISMATCH",
            MetricsError::OverlapInVosMode { .. } => "OVERLAP_IN_VOS_MODE",
            MetricsError::Mask(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    /// Each track against its counterpart alone; tracks may overlap.
    #[default]
    PerTrack,
    /// All tracks of a frame at once, as an exclusive label map.
    Vos,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackScore {
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "JF")]
    pub jf: f64,
}

impl TrackScore {
    pub fn new(j: f64, f: f64) -> Self {
        Self { j, f, jf: (j + f) / 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetScore {
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "JF")]
    pub jf: f64,
    pub tracks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalWarning {
    pub code: String,
    pub track_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub tolerance: f64,
    pub tracks: BTreeMap<String, TrackScore>,
    pub dataset: DatasetScore,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<EvalWarning>,
}

impl EvalReport {
    fn from_scores(mode: EvalMode, tolerance: f64, tracks: BTreeMap<String, TrackScore>, warnings: Vec<EvalWarning>) -> Self {
        let n = tracks.len();
        let (j, f) = if n == 0 {
            (0.0, 0.0)
        } else {
            (
                tracks.values().map(|s| s.j).sum::<f64>() / n as f64,
                tracks.values().map(|s| s.f).sum::<f64>() / n as f64,
            )
        };
        let dataset = DatasetScore { j, f, jf: (j + f) / 2.0, tracks: n };
        Self { mode, tolerance, tracks, dataset, warnings }
    }

    /// Aligned plain-text table, one row per track and a final mean row.
    pub fn to_table(&self) -> String {
        let width = self.tracks.keys().map(|k| k.len()).chain([5]).max().unwrap_or(5);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>6}  {:>6}  {:>6}", "track", "J", "F", "J&F");
        for (id, s) in &self.tracks {
            let _ = writeln!(out, "{id:<width$}  {:>6.4}  {:>6.4}  {:>6.4}", s.j, s.f, s.jf);
        }
        let d = &self.dataset;
        let _ = writeln!(out, "{:<width$}  {:>6.4}  {:>6.4}  {:>6.4}", "mean", d.j, d.f, d.jf);
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {} {}", w.code, w.track_id);
        }
        out
    }
}

fn decode_or_empty(track: Option<&MaskTrack>, frame: usize, dims: Dims) -> Result<BinaryMask, MetricsError> {
    match track.and_then(|t| t.mask_at(frame)) {
        Some(m) => {
            let m = m?;
            if m.dims() != dims {
                return Err(MetricsError::DimensionMismatch { expected: dims, found: m.dims() });
            }
            Ok(m)
        }
        None => Ok(BinaryMask::empty(dims)),
    }
}

fn track_dims(track: &MaskTrack) -> Option<Dims> {
    track.frames.first().map(|f| f.mask.dims())
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Scores `pred` over the frames of `gt`; frames missing from `pred` count
/// as empty masks. `tolerance` defaults to [`default_boundary_tolerance`].
pub fn eval_track_jf(pred: &MaskTrack, gt: &MaskTrack, tolerance: Option<f64>) -> Result<TrackScore, MetricsError> {
    let Some(dims) = track_dims(gt) else {
        return Ok(TrackScore::new(0.0, 0.0));
    };
    let tol = tolerance.unwrap_or_else(|| default_boundary_tolerance(dims));
    let mut js = Vec::with_capacity(gt.frames.len());
    let mut fs = Vec::with_capacity(gt.frames.len());
    for f in &gt.frames {
        let g = f.mask.decode()?;
        let p = decode_or_empty(Some(pred), f.frame_index, dims)?;
        js.push(iou(&p, &g)?);
        fs.push(boundary_f_score(&p, &g, tol)?);
    }
    Ok(TrackScore::new(mean(&js), mean(&fs)))
}

/// Tracks that count for evaluation and statistics: neither filtered out
/// nor rejected by review.
pub fn is_kept(track: &MaskTrack) -> bool {
    !track.filtered_out && track.status != TrackStatus::Rejected
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrackMatching {
    /// Prediction and ground truth share track ids.
    #[default]
    Id,
    /// Greedy one-to-one assignment by mean per-frame IoU.
    Iou,
}

/// Pairs ground-truth tracks with predicted tracks, highest mean IoU first,
/// each track used at most once. Pairs with zero overlap are left out.
pub fn match_tracks_by_iou(pred: &[&MaskTrack], gt: &[&MaskTrack]) -> Result<BTreeMap<String, String>, MetricsError> {
    let mut pairs = Vec::new();
    for (gi, g) in gt.iter().enumerate() {
        let Some(dims) = track_dims(g) else { continue };
        let gmasks = g.frames.iter().map(|f| f.mask.decode()).collect::<Result<Vec<_>, _>>()?;
        for (pi, p) in pred.iter().enumerate() {
            let mut total = 0.0;
            for (f, gm) in g.frames.iter().zip(&gmasks) {
                total += iou(&decode_or_empty(Some(p), f.frame_index, dims)?, gm)?;
            }
            let score = total / g.frames.len() as f64;
            if score > 0.0 {
                pairs.push((score, gi, pi));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let (mut used_g, mut used_p) = (HashSet::new(), HashSet::new());
    let mut out = BTreeMap::new();
    for (_, gi, pi) in pairs {
        if used_g.contains(&gi) || used_p.contains(&pi) {
            continue;
        }
        used_g.insert(gi);
        used_p.insert(pi);
        out.insert(gt[gi].track_id.clone(), pred[pi].track_id.clone());
    }
    Ok(out)
}

/// Evaluates a predicted manifest against ground truth. A ground-truth track
/// without a counterpart is scored against empty masks and reported as a
/// `MISSING_TRACK` warning.
pub fn eval_manifest(
    pred: &ClipManifest,
    gt: &ClipManifest,
    mode: EvalMode,
    matching: TrackMatching,
    tolerance: Option<f64>,
) -> Result<EvalReport, MetricsError> {
    if pred.dims != gt.dims {
        return Err(MetricsError::DimensionMismatch { expected: gt.dims, found: pred.dims });
    }
    let tol = tolerance.unwrap_or_else(|| default_boundary_tolerance(gt.dims));
    let gt_tracks: Vec<&MaskTrack> = gt.tracks.iter().filter(|t| is_kept(t)).collect();
    let pred_tracks: Vec<&MaskTrack> = pred.tracks.iter().filter(|t| is_kept(t)).collect();
    for t in &gt_tracks {
        if let Some(end) = t.end_frame() {
            if end > pred.frame_count() {
                return Err(MetricsError::FrameRangeMismatch {
                    track: t.track_id.clone(),
                    frame: end,
                    frames: pred.frame_count(),
                });
            }
        }
    }

    let pairing: BTreeMap<String, String> = match matching {
        TrackMatching::Id => {
            let ids: HashSet<&str> = pred_tracks.iter().map(|t| t.track_id.as_str()).collect();
            gt_tracks
                .iter()
                .filter(|t| ids.contains(t.track_id.as_str()))
                .map(|t| (t.track_id.clone(), t.track_id.clone()))
                .collect()
        }
        TrackMatching::Iou => match_tracks_by_iou(&pred_tracks, &gt_tracks)?,
    };
    let counterpart = |g: &MaskTrack| -> Option<&MaskTrack> {
        let pid = pairing.get(&g.track_id)?;
        pred_tracks.iter().copied().find(|p| &p.track_id == pid)
    };
    let warnings: Vec<EvalWarning> = gt_tracks
        .iter()
        .filter(|g| counterpart(g).is_none())
        .map(|g| EvalWarning { code: "MISSING_TRACK".into(), track_id: g.track_id.clone() })
        .collect();

    let mut scores = BTreeMap::new();
    match mode {
        EvalMode::PerTrack => {
            for g in &gt_tracks {
                let empty = MaskTrack { frames: Vec::new(), ..(*g).clone() };
                let p = counterpart(g).unwrap_or(&empty);
                scores.insert(g.track_id.clone(), eval_track_jf(p, g, Some(tol))?);
            }
        }
        EvalMode::Vos => {
            let paired: Vec<Option<&MaskTrack>> = gt_tracks.iter().map(|g| counterpart(g)).collect();
            let frames = gt_tracks.iter().filter_map(|t| t.end_frame()).max().unwrap_or(0);
            let mut js = vec![Vec::new(); gt_tracks.len()];
            let mut fs = vec![Vec::new(); gt_tracks.len()];
            for frame in 1..=frames {
                let gmap = compose(gt_tracks.iter().map(|t| Some(*t)), frame, gt.dims, "ground-truth")?;
                let pmap = compose(paired.iter().copied(), frame, gt.dims, "predicted")?;
                for (k, g) in gt_tracks.iter().enumerate() {
                    if g.frame(frame).is_none() {
                        continue;
                    }
                    let label = k as u32 + 1;
                    let gm = BinaryMask::from_bits(gt.dims, gmap.iter().map(|&l| l == label).collect())?;
                    let pm = BinaryMask::from_bits(gt.dims, pmap.iter().map(|&l| l == label).collect())?;
                    js[k].push(iou(&pm, &gm)?);
                    fs[k].push(boundary_f_score(&pm, &gm, tol)?);
                }
            }
            for (k, g) in gt_tracks.iter().enumerate() {
                scores.insert(g.track_id.clone(), TrackScore::new(mean(&js[k]), mean(&fs[k])));
            }
        }
    }
    Ok(EvalReport::from_scores(mode, tol, scores, warnings))
}

/// Per-pixel label (`k + 1` for the k-th track, 0 for none) of one frame;
/// fails when two tracks claim the same pixel.
fn compose<'a>(
    tracks: impl Iterator<Item = Option<&'a MaskTrack>>,
    frame: usize,
    dims: Dims,
    side: &'static str,
) -> Result<Vec<u32>, MetricsError> {
    let mut map = vec![0u32; dims.pixels()];
    let mut owner: Vec<&str> = Vec::new();
    for (k, t) in tracks.enumerate() {
        owner.push(t.map(|t| t.track_id.as_str()).unwrap_or(""));
        let Some(t) = t else { continue };
        let m = decode_or_empty(Some(t), frame, dims)?;
        for (i, &on) in m.bits().iter().enumerate() {
            if !on {
                continue;
            }
            if map[i] != 0 {
                return Err(MetricsError::OverlapInVosMode {
                    side,
                    frame,
                    a: owner[map[i] as usize - 1].to_string(),
                    b: t.track_id.clone(),
                });
            }
            map[i] = k as u32 + 1;
        }
    }
    Ok(map)
}

/// Dataset statistics in the column order Density, Masks, Mask Tracks,
/// Masks per Frame, Annotated Frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub density: f64,
    pub masks: u64,
    pub tracks: u64,
    pub masks_per_frame: f64,
    pub frames: u64,
}

impl StatsReport {
    pub fn to_table(&self) -> String {
        let rows = [
            ("Density", format!("{:.3}", self.density)),
            ("Masks", self.masks.to_string()),
            ("Mask Tracks", self.tracks.to_string()),
            ("Masks per Frame", format!("{:.1}", self.masks_per_frame)),
            ("Annotated Frames", self.frames.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<16}  {v:>10}");
        }
        out
    }
}

/// Statistics over kept tracks. A mask is a non-empty (track, frame) entry;
/// density is the fraction of pixels covered by any mask, averaged over
/// every frame of every clip.
pub fn dataset_stats(manifests: &[ClipManifest]) -> Result<StatsReport, MetricsError> {
    let (mut masks, mut tracks, mut frames) = (0u64, 0u64, 0u64);
    let mut density_sum = 0.0;
    for m in manifests {
        let kept: Vec<&MaskTrack> = m.tracks.iter().filter(|t| is_kept(t)).collect();
        tracks += kept.len() as u64;
        let mut unions = vec![BinaryMask::empty(m.dims); m.frame_count()];
        for t in &kept {
            for f in &t.frames {
                if f.mask.area() == 0 {
                    continue;
                }
                masks += 1;
                if let Some(u) = f.frame_index.checked_sub(1).and_then(|i| unions.get_mut(i)) {
                    *u = u.union(&f.mask.decode()?)?;
                }
            }
        }
        frames += m.frame_count() as u64;
        density_sum += unions.iter().map(|u| u.area() as f64 / m.dims.pixels() as f64).sum::<f64>();
    }
    if frames == 0 {
        return Ok(StatsReport { density: 0.0, masks, tracks, masks_per_frame: 0.0, frames });
    }
    Ok(StatsReport {
        density: density_sum / frames as f64,
        masks,
        tracks,
        masks_per_frame: masks as f64 / frames as f64,
        frames,
    })
}

fn thousands(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// Mask counts from ten thousand up are abbreviated to thousands.
fn abbreviated(n: u64) -> String {
    if n >= 10_000 {
        format!("{}K", thousands((n + 500) / 1000))
    } else {
        thousands(n)
    }
}

/// One LaTeX table row: `name & density & masks & tracks & masks/frame & frames`.
pub fn render_stats_row(name: &str, s: &StatsReport) -> String {
    format!(
        "{name} & {:.3} & {} & {} & {:.1} & {}",
        s.density,
        abbreviated(s.masks),
        thousands(s.tracks),
        s.masks_per_frame,
        thousands(s.frames)
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::MaskTrack;
    use proptest::prelude::*;

    fn d4() -> Dims {
        Dims::new(4, 4)
    }

    fn manifest(dims: Dims, frames: usize, tracks: Vec<MaskTrack>) -> ClipManifest {
        let mut m = ClipManifest::new("c", dims, (1..=frames).map(|t| format!("f{t}")).collect());
        m.tracks = tracks;
        m
    }

    fn px(dims: Dims, pixels: &[(usize, usize)]) -> BinaryMask {
        BinaryMask::from_pixels(dims, pixels.iter().copied())
    }

    #[test]
    fn identical_tracks_score_one() {
        let d = Dims::new(8, 8);
        let t = MaskTrack::from_masks("a", 1, &[px(d, &[(1, 1), (2, 1)]), BinaryMask::empty(d)]);
        assert_eq!(eval_track_jf(&t, &t, None).unwrap(), TrackScore { j: 1.0, f: 1.0, jf: 1.0 });
    }

    #[test]
    fn empty_prediction_scores_zero() {
        let d = Dims::new(8, 8);
        let gt = MaskTrack::from_masks("a", 1, &[px(d, &[(1, 1)]), px(d, &[(2, 2)])]);
        let pred = MaskTrack::from_masks("a", 1, &[BinaryMask::empty(d), BinaryMask::empty(d)]);
        assert_eq!(eval_track_jf(&pred, &gt, None).unwrap(), TrackScore::new(0.0, 0.0));
        let none = MaskTrack { frames: vec![], ..gt.clone() };
        assert_eq!(eval_track_jf(&none, &gt, None).unwrap(), TrackScore::new(0.0, 0.0));
    }

    #[test]
    fn three_frame_toy_track() {
        let d = Dims::new(6, 6);
        let gts = [px(d, &[(1, 1), (2, 1)]), px(d, &[(1, 1), (2, 1)]), px(d, &[(4, 4)])];
        // IoUs 1, 1/3, 0
        let preds = [px(d, &[(1, 1), (2, 1)]), px(d, &[(2, 1), (3, 1)]), px(d, &[(0, 0)])];
        let score = eval_track_jf(&MaskTrack::from_masks("p", 1, &preds), &MaskTrack::from_masks("g", 1, &gts), Some(0.0)).unwrap();
        assert!((score.j - 4.0 / 9.0).abs() < 1e-15);
        // frame 2: two boundary pixels each side, one shared: P = R = 1/2
        let f = (1.0 + 0.5 + 0.0) / 3.0;
        assert!((score.f - f).abs() < 1e-15);
        assert_eq!(score.jf, (score.j + score.f) / 2.0);
    }

    #[test]
    fn dataset_is_unweighted_mean_with_missing_tracks() {
        let d = d4();
        let a = MaskTrack::from_masks("a", 1, &[px(d, &[(0, 0)])]);
        let b = MaskTrack::from_masks("b", 1, &[px(d, &[(3, 3)])]);
        let gt = manifest(d, 1, vec![a.clone(), b.clone()]);
        let pred = manifest(d, 1, vec![a.clone()]);
        let r = eval_manifest(&pred, &gt, EvalMode::PerTrack, TrackMatching::Id, None).unwrap();
        assert_eq!(r.dataset.jf, 0.5);
        assert_eq!(r.tracks["b"], TrackScore::new(0.0, 0.0));
        assert_eq!(r.warnings, vec![EvalWarning { code: "MISSING_TRACK".into(), track_id: "b".into() }]);

        let single = eval_manifest(&pred, &manifest(d, 1, vec![a]), EvalMode::PerTrack, TrackMatching::Id, None).unwrap();
        assert_eq!(single.dataset.jf, single.tracks["a"].jf);

        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["tracks"]["a"]["JF"], 1.0);
        assert_eq!(json["dataset"]["J"], 0.5);
    }

    #[test]
    fn vos_mode_rejects_overlap_per_track_does_not() {
        let d = d4();
        let a = MaskTrack::from_masks("a", 1, &[px(d, &[(0, 0), (1, 0)])]);
        let b = MaskTrack::from_masks("b", 1, &[px(d, &[(1, 0)])]);
        let m = manifest(d, 1, vec![a, b]);
        assert_eq!(
            eval_manifest(&m, &m, EvalMode::Vos, TrackMatching::Id, None).unwrap_err().code(),
            "OVERLAP_IN_VOS_MODE"
        );
        let r = eval_manifest(&m, &m, EvalMode::PerTrack, TrackMatching::Id, None).unwrap();
        assert_eq!(r.dataset.jf, 1.0);
    }

    #[test]
    fn vos_mode_scores_disjoint_tracks() {
        let d = d4();
        let gt = manifest(
            d,
            2,
            vec![
                MaskTrack::from_masks("a", 1, &[px(d, &[(0, 0)]), px(d, &[(0, 1)])]),
                MaskTrack::from_masks("b", 1, &[px(d, &[(3, 3)]), px(d, &[(3, 2)])]),
            ],
        );
        let mut pred = gt.clone();
        pred.tracks[1] = MaskTrack::from_masks("b", 1, &[px(d, &[(3, 3)]), BinaryMask::empty(d)]);
        let r = eval_manifest(&pred, &gt, EvalMode::Vos, TrackMatching::Id, Some(1.0)).unwrap();
        assert_eq!(r.tracks["a"].jf, 1.0);
        assert_eq!(r.tracks["b"].j, 0.5);
        let per = eval_manifest(&pred, &gt, EvalMode::PerTrack, TrackMatching::Id, Some(1.0)).unwrap();
        assert_eq!(per.tracks, r.tracks);
    }

    #[test]
    fn errors() {
        let d = d4();
        let gt = manifest(d, 2, vec![MaskTrack::from_masks("a", 1, &[px(d, &[(0, 0)]), px(d, &[(0, 0)])])]);
        let short = manifest(d, 1, vec![]);
        assert_eq!(
            eval_manifest(&short, &gt, EvalMode::PerTrack, TrackMatching::Id, None).unwrap_err().code(),
            "FRAME_RANGE_MISMATCH"
        );
        let other = manifest(Dims::new(5, 4), 2, vec![]);
        assert_eq!(
            eval_manifest(&other, &gt, EvalMode::PerTrack, TrackMatching::Id, None).unwrap_err().code(),
            "DIMENSION_MISMATCH"
        );
    }

    #[test]
    fn iou_matching_pairs_renamed_tracks() {
        let d = Dims::new(8, 8);
        let a = px(d, &[(0, 0), (1, 0), (0, 1), (1, 1)]);
        let b = px(d, &[(5, 5), (6, 5)]);
        let gt = manifest(d, 1, vec![MaskTrack::from_masks("s0", 1, std::slice::from_ref(&a)), MaskTrack::from_masks("s1", 1, std::slice::from_ref(&b))]);
        let pred = manifest(
            d,
            1,
            vec![
                MaskTrack::from_masks("t0000", 1, &[b]),
                MaskTrack::from_masks("t0001", 1, &[px(d, &[(0, 0), (1, 0)])]),
                MaskTrack::from_masks("t0002", 1, &[a]),
            ],
        );
        let r = eval_manifest(&pred, &gt, EvalMode::PerTrack, TrackMatching::Iou, None).unwrap();
        assert_eq!(r.dataset.jf, 1.0);
        assert!(r.warnings.is_empty());
        let byid = eval_manifest(&pred, &gt, EvalMode::PerTrack, TrackMatching::Id, None).unwrap();
        assert_eq!(byid.warnings.len(), 2);
    }

    #[test]
    fn stats_fixture() {
        let d = d4();
        let m = manifest(
            d,
            1,
            vec![
                MaskTrack::from_masks("a", 1, &[px(d, &[(0, 0)])]),
                MaskTrack::from_masks("b", 1, &[px(d, &[(0, 0), (1, 1)])]),
            ],
        );
        let s = dataset_stats(&[m]).unwrap();
        assert_eq!(s, StatsReport { density: 0.125, masks: 2, tracks: 2, masks_per_frame: 2.0, frames: 1 });
        assert_eq!(render_stats_row("Fixture", &s), "Fixture & 0.125 & 2 & 2 & 2.0 & 1");

        let full = manifest(d, 1, vec![MaskTrack::from_masks("a", 1, &[BinaryMask::full(d)])]);
        assert_eq!(dataset_stats(&[full]).unwrap().density, 1.0);
        assert_eq!(
            dataset_stats(&[]).unwrap(),
            StatsReport { density: 0.0, masks: 0, tracks: 0, masks_per_frame: 0.0, frames: 0 }
        );
    }

    #[test]
    fn stats_skip_filtered_and_rejected() {
        let d = d4();
        let mut a = MaskTrack::from_masks("a", 1, &[px(d, &[(0, 0)])]);
        a.filtered_out = true;
        let mut b = MaskTrack::from_masks("b", 1, &[px(d, &[(1, 1)])]);
        b.status = TrackStatus::Rejected;
        let c = MaskTrack::from_masks("c", 1, &[px(d, &[(2, 2)])]);
        let s = dataset_stats(&[manifest(d, 1, vec![a, b, c])]).unwrap();
        assert_eq!((s.tracks, s.masks), (1, 1));
        assert_eq!(s.density, 1.0 / 16.0);
    }

    #[test]
    fn table_row_format() {
        let s = StatsReport { density: 0.663, masks: 59_000, tracks: 887, masks_per_frame: 29.6, frames: 1_999 };
        assert_eq!(render_stats_row("Test split", &s), "Test split & 0.663 & 59K & 887 & 29.6 & 1,999");
        assert_eq!(thousands(1_234_567), "1,234,567");
        assert_eq!(abbreviated(9_999), "9,999");
        assert_eq!(abbreviated(1_234_567), "1,235K");
    }

    fn arb_mask(d: Dims) -> impl Strategy<Value = BinaryMask> {
        proptest::collection::vec(any::<bool>(), d.pixels()).prop_map(move |b| BinaryMask::from_bits(d, b).unwrap())
    }

    proptest! {
        #[test]
        fn self_evaluation_is_perfect(masks in proptest::collection::vec(arb_mask(Dims::new(6, 7)), 1..5)) {
            let t = MaskTrack::from_masks("x", 1, &masks);
            prop_assert_eq!(eval_track_jf(&t, &t, None).unwrap(), TrackScore::new(1.0, 1.0));
        }

        #[test]
        fn dataset_score_is_order_free(
            masks in proptest::collection::vec((arb_mask(Dims::new(5, 5)), arb_mask(Dims::new(5, 5))), 1..6),
            rot in 0usize..6,
        ) {
            let d = Dims::new(5, 5);
            let gt: Vec<_> = masks.iter().enumerate().map(|(i, (g, _))| MaskTrack::from_masks(format!("t{i}"), 1, std::slice::from_ref(g))).collect();
            let pred: Vec<_> = masks.iter().enumerate().map(|(i, (_, p))| MaskTrack::from_masks(format!("t{i}"), 1, std::slice::from_ref(p))).collect();
            let a = eval_manifest(&manifest(d, 1, pred.clone()), &manifest(d, 1, gt.clone()), EvalMode::PerTrack, TrackMatching::Id, None).unwrap();
            let mut gt2 = gt.clone();
            let mut pred2 = pred.clone();
            gt2.rotate_left(rot % gt.len());
            pred2.reverse();
            let b = eval_manifest(&manifest(d, 1, pred2), &manifest(d, 1, gt2), EvalMode::PerTrack, TrackMatching::Id, None).unwrap();
            prop_assert_eq!(&a, &b);
            let jfs: Vec<f64> = a.tracks.values().map(|s| s.jf).collect();
            prop_assert!((a.dataset.jf - mean(&jfs)).abs() < 1e-12);
        }

        #[test]
        fn density_uses_union(m in arb_mask(Dims::new(6, 6)), cut in 0usize..36) {
            let d = Dims::new(6, 6);
            let first = BinaryMask::from_fn(d, |x, y| m.get(x, y) && y * 6 + x < cut);
            let second = BinaryMask::from_fn(d, |x, y| m.get(x, y) && y * 6 + x >= cut);
            let one = dataset_stats(&[manifest(d, 1, vec![MaskTrack::from_masks("a", 1, std::slice::from_ref(&m))])]).unwrap();
            let two = dataset_stats(&[manifest(d, 1, vec![
                MaskTrack::from_masks("a", 1, &[first]),
                MaskTrack::from_masks("b", 1, &[second]),
            ])]).unwrap();
            prop_assert_eq!(one.density, two.density);
        }
    }
}
