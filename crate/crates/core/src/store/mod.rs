//! Clip manifests: persistence, validation, and the review operations that
//! mutate them (status changes and refined-mask splices), each recorded in an
//! append-only audit log.

mod clip;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{warp_mask_with, FlowError, FlowProvider, WarpOptions};
use crate::mask::{iou, BinaryMask, Dims, MaskError};
use crate::pipeline::{FrameSource, MaskTrack, PipelineConfig, TrackStatus};

pub use clip::{
    frame_png, ground_truth_manifest, read_label_map, write_label_map, write_synthetic_clip, ClipInfo, CLIP_FILE, GT_MANIFEST,
    MANIFEST_FILE,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_EXT: &str = ".mug.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("schema violation at {path}: {message}")]
    SchemaViolation { path: String, message: String },
    #[error("unsupported schema version {0}")]
    VersionUnsupported(u64),
    #[error("unknown track {0}")]
    UnknownTrack(String),
    #[error("frame {frame} outside track {track}")]
    FrameOutOfRange { track: String, frame: usize },
    #[error("mask is {found}, clip is {expected}")]
    DimensionMismatch { expected: Dims, found: Dims },
    #[error("status must be accepted or rejected")]
    InvalidStatus,
    #[error("clip is locked by another writer ({0})")]
    Locked(PathBuf),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl StoreError {
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::SchemaViolation { .. } => "SCHEMA_VIOLATION",
            StoreError::VersionUnsupported(_) => "VERSION_UNSUPPORTED",
            StoreError::UnknownTrack(_) => "UNKNOWN_TRACK",
            StoreError::FrameOutOfRange { .. } => "FRAME_OUT_OF_RANGE",
            StoreError::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
            StoreError::InvalidStatus => "INVALID_STATUS",
            StoreError::Locked(_) => "CLIP_LOCKED",
            StoreError::Flow(e) => e.code(),
            StoreError::Io { .. } => "IO_ERROR",
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        StoreError::Io { path: path.to_owned(), message: e.to_string() }
    }

    fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        StoreError::SchemaViolation { path: path.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditAction {
    Created,
    Filtered,
    Accepted,
    Rejected,
    Refined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEvent {
    pub timestamp: String,
    pub actor: String,
    pub action: AuditAction,
    #[serde(default)]
    pub payload: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipManifest {
    pub schema_version: u32,
    pub clip_id: String,
    pub dims: Dims,
    /// Ordered frame references, relative to the clip directory.
    pub frames: Vec<String>,
    #[serde(default)]
    pub config: Option<PipelineConfig>,
    /// Threshold of the last curation filter run.
    #[serde(default)]
    pub gamma: Option<f64>,
    pub tracks: Vec<MaskTrack>,
    #[serde(default)]
    pub audit: Vec<AuditEvent>,
}

impl ClipManifest {
    pub fn new(clip_id: impl Into<String>, dims: Dims, frames: Vec<String>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            clip_id: clip_id.into(),
            dims,
            frames,
            config: None,
            gamma: None,
            tracks: Vec::new(),
            audit: Vec::new(),
        }
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn track(&self, id: &str) -> Option<&MaskTrack> {
        self.tracks.iter().find(|t| t.track_id == id)
    }

    pub fn track_mut(&mut self, id: &str) -> Option<&mut MaskTrack> {
        self.tracks.iter_mut().find(|t| t.track_id == id)
    }

    /// Tracks not removed by the curation filter.
    pub fn kept_tracks(&self) -> impl Iterator<Item = &MaskTrack> {
        self.tracks.iter().filter(|t| !t.filtered_out)
    }

    fn warp_options(&self) -> WarpOptions {
        WarpOptions { close_holes: self.config.as_ref().is_some_and(|c| c.close_holes) }
    }

    /// Structural checks beyond what deserialisation enforces.
    pub fn validate(&self) -> Result<(), StoreError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(StoreError::VersionUnsupported(self.schema_version as u64));
        }
        if !self.dims.is_valid() {
            return Err(StoreError::schema("dims", format!("invalid dimensions {}", self.dims)));
        }
        if self.frames.is_empty() {
            return Err(StoreError::schema("frames", "clip has no frames"));
        }
        if let Some(cfg) = &self.config {
            cfg.validate().map_err(|e| StoreError::schema("config", e.to_string()))?;
        }
        if let Some(g) = self.gamma {
            if !(0.0..=1.0).contains(&g) {
                return Err(StoreError::schema("gamma", format!("{g} outside [0, 1]")));
            }
        }
        let n = self.frames.len();
        let mut ids = std::collections::HashSet::new();
        for (i, track) in self.tracks.iter().enumerate() {
            if !ids.insert(track.track_id.as_str()) {
                return Err(StoreError::schema(format!("tracks[{i}].track_id"), "duplicate track id"));
            }
            if track.frames.is_empty() {
                return Err(StoreError::schema(format!("tracks[{i}].frames"), "track has no frames"));
            }
            let start = track.frames[0].frame_index;
            for (j, f) in track.frames.iter().enumerate() {
                let at = |field: &str| format!("tracks[{i}].frames[{j}].{field}");
                if f.frame_index != start + j || f.frame_index == 0 || f.frame_index > n {
                    return Err(StoreError::schema(
                        at("frame_index"),
                        format!("frame {} is not consecutive within 1..={n}", f.frame_index),
                    ));
                }
                if f.mask.dims() != self.dims {
                    return Err(StoreError::schema(at("mask"), format!("mask is {}, clip is {}", f.mask.dims(), self.dims)));
                }
                f.mask.validate().map_err(|e| StoreError::schema(at("mask"), e.to_string()))?;
                if let Some(v) = f.step_iou {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(StoreError::schema(at("step_iou"), format!("{v} outside [0, 1]")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("manifest serialisation cannot fail");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, StoreError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| StoreError::schema("", format!("invalid JSON: {e}")))?;
        match value.get("schema_version").map(|v| v.as_u64()) {
            None => return Err(StoreError::schema("schema_version", "missing field")),
            Some(None) => return Err(StoreError::schema("schema_version", "expected an unsigned integer")),
            Some(Some(v)) if v != SCHEMA_VERSION as u64 => return Err(StoreError::VersionUnsupported(v)),
            Some(Some(_)) => {}
        }
        let manifest: ClipManifest = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            StoreError::schema(if path == "." { String::new() } else { path }, e.into_inner().to_string())
        })?;
        manifest.validate()?;
        Ok(manifest)
    }
}

/// Current time as an RFC 3339 UTC string. Honors `SOURCE_DATE_EPOCH` so
/// pipeline runs can be made byte-reproducible.
pub fn timestamp_now() -> String {
    use chrono::{DateTime, SecondsFormat, Utc};
    let when = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| DateTime::<Utc>::from_timestamp(secs, 0))
        .unwrap_or_else(Utc::now);
    when.to_rfc3339_opts(SecondsFormat::Secs, true)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<ClipManifest, StoreError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| StoreError::io(path, e))?;
    ClipManifest::from_json(&text)
}

/// Writes to a temporary file in the same directory and renames it over
/// `path`.
pub fn save_manifest(manifest: &ClipManifest, path: impl AsRef<Path>) -> Result<(), StoreError> {
    let path = path.as_ref();
    manifest.validate()?;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| StoreError::io(dir, e))?;
    tmp.write_all(manifest.to_json().as_bytes()).map_err(|e| StoreError::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| StoreError::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| StoreError::io(path, e.error))?;
    Ok(())
}

/// Advisory single-writer lock: `<manifest path>.lock`, removed on drop.
#[derive(Debug)]
pub struct ClipLock {
    path: PathBuf,
}

impl ClipLock {
    pub fn lock_path(manifest_path: &Path) -> PathBuf {
        let mut name = manifest_path.as_os_str().to_owned();
        name.push(".lock");
        PathBuf::from(name)
    }

    pub fn try_acquire(manifest_path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = Self::lock_path(manifest_path.as_ref());
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(StoreError::Locked(path)),
            Err(e) => Err(StoreError::io(&path, e)),
        }
    }
}

impl Drop for ClipLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Sets a track's review status. Returns `false` (and records nothing) when
/// the track already has that status.
pub fn set_track_status(
    manifest: &mut ClipManifest,
    track_id: &str,
    status: TrackStatus,
    actor: &str,
    timestamp: &str,
) -> Result<bool, StoreError> {
    let action = match status {
        TrackStatus::Accepted => AuditAction::Accepted,
        TrackStatus::Rejected => AuditAction::Rejected,
        TrackStatus::Auto => return Err(StoreError::InvalidStatus),
    };
    let track = manifest.track_mut(track_id).ok_or_else(|| StoreError::UnknownTrack(track_id.into()))?;
    if track.status == status && !track.filtered_out {
        return Ok(false);
    }
    let previous = track.status;
    track.status = status;
    track.filtered_out = false;
    manifest.audit.push(AuditEvent {
        timestamp: timestamp.into(),
        actor: actor.into(),
        action,
        payload: serde_json::json!({ "track_id": track_id, "from": previous }),
    });
    Ok(true)
}

fn step_iou_between(
    prev: &BinaryMask,
    next: &BinaryMask,
    from: usize,
    flows: &(impl FlowProvider + ?Sized),
    opts: WarpOptions,
) -> Result<f64, StoreError> {
    let flow = flows.flow(from)?;
    let warped = warp_mask_with(prev, &flow, opts)?;
    iou(&warped, next).map_err(mask_dims)
}

fn mask_dims(e: MaskError) -> StoreError {
    match e {
        MaskError::DimensionMismatch { expected, found } => StoreError::DimensionMismatch { expected, found },
        other => StoreError::schema("mask", other.to_string()),
    }
}

fn decode(track: &MaskTrack, k: usize) -> Result<BinaryMask, StoreError> {
    track.frames[k].mask.decode().map_err(mask_dims)
}

/// Replaces one frame of a track with a refined mask and recomputes the step
/// IoUs on both sides of it.
#[allow(clippy::too_many_arguments)]
pub fn splice_refined_mask<F: FlowProvider + ?Sized>(
    manifest: &mut ClipManifest,
    track_id: &str,
    frame_index: usize,
    mask: &BinaryMask,
    flows: &F,
    actor: &str,
    timestamp: &str,
) -> Result<(), StoreError> {
    let dims = manifest.dims;
    let opts = manifest.warp_options();
    let track = manifest.track(track_id).ok_or_else(|| StoreError::UnknownTrack(track_id.into()))?;
    let start = track.start_frame().unwrap_or(1);
    let k = frame_index
        .checked_sub(start)
        .filter(|&k| k < track.frames.len())
        .ok_or(StoreError::FrameOutOfRange { track: track_id.into(), frame: frame_index })?;
    if mask.dims() != dims {
        return Err(StoreError::DimensionMismatch { expected: dims, found: mask.dims() });
    }

    let before = if k > 0 {
        Some(step_iou_between(&decode(track, k - 1)?, mask, frame_index - 1, flows, opts)?)
    } else {
        None
    };
    let after = if k + 1 < track.frames.len() {
        Some(step_iou_between(mask, &decode(track, k + 1)?, frame_index, flows, opts)?)
    } else {
        None
    };

    let track = manifest.track_mut(track_id).expect("checked above");
    let entry = &mut track.frames[k];
    let changed = entry.mask != mask.to_rle();
    entry.mask = mask.to_rle();
    entry.source = FrameSource::Refined;
    if k > 0 {
        entry.step_iou = before;
    }
    if let Some(v) = after {
        track.frames[k + 1].step_iou = Some(v);
    }
    manifest.audit.push(AuditEvent {
        timestamp: timestamp.into(),
        actor: actor.into(),
        action: AuditAction::Refined,
        payload: serde_json::json!({ "track_id": track_id, "frame": frame_index, "changed": changed }),
    });
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepMismatch {
    pub track_id: String,
    pub frame_index: usize,
    pub stored: Option<f64>,
    pub recomputed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub tracks: usize,
    pub steps: usize,
    pub mismatches: Vec<StepMismatch>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Re-validates the manifest and recomputes every stored step IoU.
pub fn verify_manifest<F: FlowProvider + ?Sized>(manifest: &ClipManifest, flows: &F) -> Result<VerifyReport, StoreError> {
    manifest.validate()?;
    let opts = manifest.warp_options();
    let mut report = VerifyReport { tracks: manifest.tracks.len(), steps: 0, mismatches: Vec::new() };
    for track in &manifest.tracks {
        let mut prev: Option<BinaryMask> = None;
        for (k, f) in track.frames.iter().enumerate() {
            let mask = decode(track, k)?;
            let recomputed = match &prev {
                Some(p) => Some(step_iou_between(p, &mask, f.frame_index - 1, flows, opts)?),
                None => None,
            };
            report.steps += recomputed.is_some() as usize;
            let agree = match (f.step_iou, recomputed) {
                (None, None) => true,
                (Some(a), Some(b)) => (a - b).abs() <= 1e-12,
                _ => false,
            };
            if !agree {
                report.mismatches.push(StepMismatch {
                    track_id: track.track_id.clone(),
                    frame_index: f.frame_index,
                    stored: f.step_iou,
                    recomputed,
                });
            }
            prev = Some(mask);
        }
    }
    Ok(report)
}
