//! Review service: browse clips and tracks, accept or reject tracks, refine
//! single frames with point prompts, and run collection jobs.
//!
//! Every clip is a directory under the data directory (see
//! [`mugtrack_core::store`]); the reviewed manifest is `tracks.mug.json`.

mod error;
pub mod jobs;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mugtrack_core::flow::FlowDir;
use mugtrack_core::pipeline::{collect_clip, CollectOptions, FrameSource};
use mugtrack_core::segmenter::{segment, OracleSegmenter, RemoteConfig, RemoteSegmenter};
use mugtrack_core::store::{
    frame_png, load_manifest, save_manifest, set_track_status, splice_refined_mask, timestamp_now, ClipLock, CLIP_FILE,
    GT_MANIFEST, MANIFEST_FILE,
};
use mugtrack_core::{
    ClipInfo, ClipManifest, FrameRef, MaskTrack, PipelineConfig, PointPrompt, RleMask, SegmentError, Segmenter,
    SyntheticScene, TrackStatus,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, CorsLayer};

pub use error::ApiError;
pub use jobs::{Job, JobState, JobTable};

/// Where refinement and job prompts are answered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SegmenterChoice {
    /// Ground-truth oracle rebuilt from a synthetic clip's parameters.
    Synthetic,
    /// Remote server base URL.
    Remote(String),
}

impl FromStr for SegmenterChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "synthetic" => Ok(SegmenterChoice::Synthetic),
            _ => match s.strip_prefix("remote:") {
                Some(url) if !url.is_empty() => Ok(SegmenterChoice::Remote(url.to_string())),
                _ => Err(format!("expected `synthetic` or `remote:URL`, got `{s}`")),
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub host: String,
    pub port: u16,
    pub segmenter: SegmenterChoice,
    /// Allowed CORS origin; any origin when unset.
    pub ui_origin: Option<String>,
    /// Concurrent collection jobs.
    pub workers: usize,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            host: "127.0.0.1".into(),
            port: 8080,
            segmenter: SegmenterChoice::Synthetic,
            ui_origin: None,
            workers: 2,
        }
    }
}

pub struct AppState {
    config: ServiceConfig,
    jobs: JobTable,
    workers: Arc<tokio::sync::Semaphore>,
    clip_guards: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
    scenes: Mutex<HashMap<String, Arc<SyntheticScene>>>,
    remote: Option<Arc<RemoteSegmenter>>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Result<Arc<Self>, ApiError> {
        let remote = match &config.segmenter {
            SegmenterChoice::Synthetic => None,
            SegmenterChoice::Remote(url) => Some(Arc::new(remote_segmenter(url)?)),
        };
        Ok(Arc::new(Self {
            jobs: JobTable::load(&config.data_dir),
            workers: Arc::new(tokio::sync::Semaphore::new(config.workers.max(1))),
            clip_guards: Mutex::default(),
            scenes: Mutex::default(),
            remote,
            config,
        }))
    }

    pub fn jobs(&self) -> &JobTable {
        &self.jobs
    }

    fn clip_dir(&self, clip_id: &str) -> Result<PathBuf, ApiError> {
        let plain = !clip_id.is_empty()
            && !clip_id.starts_with('.')
            && clip_id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c));
        let dir = self.config.data_dir.join(clip_id);
        if !plain || !dir.join(CLIP_FILE).is_file() {
            return Err(ApiError::not_found("UNKNOWN_CLIP", format!("no clip {clip_id}")));
        }
        Ok(dir)
    }

    fn clip(&self, clip_id: &str) -> Result<(PathBuf, ClipInfo), ApiError> {
        let dir = self.clip_dir(clip_id)?;
        let info = ClipInfo::load(&dir)?;
        Ok((dir, info))
    }

    fn clip_guard(&self, clip_id: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.clip_guards.lock().unwrap().entry(clip_id.to_string()).or_default().clone()
    }

    fn segmenter_for(&self, clip_id: &str, info: &ClipInfo) -> Result<Arc<dyn Segmenter>, ApiError> {
        if let Some(r) = &self.remote {
            return Ok(r.clone());
        }
        let mut scenes = self.scenes.lock().unwrap();
        if let Some(s) = scenes.get(clip_id) {
            return Ok(Arc::new(OracleSegmenter::new(s.clone())));
        }
        let scene = match info.scene() {
            Some(Ok(s)) => Arc::new(s),
            Some(Err(e)) => return Err(ApiError::internal(e.code(), e.to_string())),
            None => {
                return Err(ApiError::bad_request(
                    "SEGMENTER_UNAVAILABLE",
                    format!("clip {clip_id} is not synthetic; start the service with a remote segmenter"),
                ))
            }
        };
        scenes.insert(clip_id.to_string(), scene.clone());
        Ok(Arc::new(OracleSegmenter::new(scene)))
    }

    /// Frame reference sent to the segmenter: the absolute frame path for
    /// remote servers, the stored name otherwise.
    fn segmenter_ref(&self, dir: &Path, name: &str) -> String {
        if self.remote.is_some() {
            dir.join(name).to_string_lossy().into_owned()
        } else {
            name.to_string()
        }
    }
}

fn remote_segmenter(url: &str) -> Result<RemoteSegmenter, ApiError> {
    RemoteSegmenter::new(RemoteConfig::new(url)).map_err(|e| ApiError::bad_request(e.code(), e.to_string()))
}

pub fn router(state: Arc<AppState>) -> Router {
    let origin = match &state.config.ui_origin {
        Some(o) => match HeaderValue::from_str(o) {
            Ok(v) => AllowOrigin::exact(v),
            Err(_) => {
                log::warn!("invalid --ui-origin {o:?}; allowing any origin");
                AllowOrigin::any()
            }
        },
        None => AllowOrigin::any(),
    };
    let cors = CorsLayer::new()
        .allow_origin(origin)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    Router::new()
        .route("/api/clips", get(list_clips))
        .route("/api/clips/{clip}/tracks", get(list_tracks))
        .route("/api/clips/{clip}/frames/{frame}", get(get_frame))
        .route("/api/tracks/{clip}/{track}", get(get_track))
        .route("/api/tracks/{clip}/{track}/status", post(post_status))
        .route("/api/tracks/{clip}/{track}/refine", post(post_refine))
        .route("/api/tracks/{clip}/{track}/refine/commit", post(post_commit))
        .route("/api/jobs", get(list_jobs).post(post_job))
        .route("/api/jobs/{job}", get(get_job))
        .layer(cors)
        .with_state(state)
}

/// Binds and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> std::io::Result<()> {
    let addr: SocketAddr = format!("{}:{}", config.host, config.port)
        .parse()
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, format!("bad address: {e}")))?;
    std::fs::create_dir_all(&config.data_dir)?;
    let state = AppState::new(config).map_err(|e| std::io::Error::other(e.message))?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("serving {} on http://{}", state.config.data_dir.display(), listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ApiError::bad_request("SCHEMA_VIOLATION", format!("{path}: {}", e.into_inner()))
    })
}

#[derive(Debug, Serialize)]
struct ClipSummary {
    clip_id: String,
    dims: mugtrack_core::Dims,
    frames: usize,
    synthetic: bool,
    has_manifest: bool,
    has_ground_truth: bool,
    tracks: usize,
    kept: usize,
    accepted: usize,
    rejected: usize,
}

fn read_manifest(dir: &Path) -> Result<Option<ClipManifest>, ApiError> {
    let path = dir.join(MANIFEST_FILE);
    if !path.is_file() {
        return Ok(None);
    }
    Ok(Some(load_manifest(path)?))
}

async fn list_clips(State(state): State<Arc<AppState>>) -> Result<Json<Vec<ClipSummary>>, ApiError> {
    let mut ids: Vec<String> = std::fs::read_dir(&state.config.data_dir)
        .map_err(|e| ApiError::internal("IO_ERROR", e.to_string()))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().join(CLIP_FILE).is_file())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| !n.starts_with('.'))
        .collect();
    ids.sort();
    let mut out = Vec::new();
    for id in ids {
        let (dir, info) = state.clip(&id)?;
        let manifest = read_manifest(&dir)?;
        let tracks = manifest.as_ref().map(|m| m.tracks.as_slice()).unwrap_or_default();
        out.push(ClipSummary {
            clip_id: info.clip_id.clone(),
            dims: info.dims,
            frames: info.frame_count(),
            synthetic: info.synthetic.is_some(),
            has_manifest: manifest.is_some(),
            has_ground_truth: dir.join(GT_MANIFEST).is_file(),
            tracks: tracks.len(),
            kept: tracks.iter().filter(|t| !t.filtered_out).count(),
            accepted: tracks.iter().filter(|t| t.status == TrackStatus::Accepted).count(),
            rejected: tracks.iter().filter(|t| t.status == TrackStatus::Rejected).count(),
        });
    }
    Ok(Json(out))
}

#[derive(Debug, Serialize)]
struct FrameSummary {
    frame_index: usize,
    step_iou: Option<f64>,
    source: FrameSource,
}

#[derive(Debug, Serialize)]
struct TrackSummary {
    track_id: String,
    status: TrackStatus,
    filtered_out: bool,
    start_frame: Option<usize>,
    end_frame: Option<usize>,
    frames: Vec<FrameSummary>,
}

impl From<&MaskTrack> for TrackSummary {
    fn from(t: &MaskTrack) -> Self {
        Self {
            track_id: t.track_id.clone(),
            status: t.status,
            filtered_out: t.filtered_out,
            start_frame: t.start_frame(),
            end_frame: t.end_frame(),
            frames: t
                .frames
                .iter()
                .map(|f| FrameSummary { frame_index: f.frame_index, step_iou: f.step_iou, source: f.source })
                .collect(),
        }
    }
}

async fn list_tracks(State(state): State<Arc<AppState>>, UrlPath(clip): UrlPath<String>) -> Result<Response, ApiError> {
    let (dir, info) = state.clip(&clip)?;
    let body = match read_manifest(&dir)? {
        Some(m) => serde_json::json!({
            "clip_id": m.clip_id,
            "dims": m.dims,
            "frames": m.frame_count(),
            "gamma": m.gamma,
            "tracks": m.tracks.iter().map(TrackSummary::from).collect::<Vec<_>>(),
            "audit": m.audit,
        }),
        None => serde_json::json!({
            "clip_id": info.clip_id,
            "dims": info.dims,
            "frames": info.frame_count(),
            "gamma": null,
            "tracks": [],
            "audit": [],
        }),
    };
    Ok(Json(body).into_response())
}

async fn get_frame(
    State(state): State<Arc<AppState>>,
    UrlPath((clip, frame)): UrlPath<(String, usize)>,
) -> Result<Response, ApiError> {
    let (dir, info) = state.clip(&clip)?;
    if frame == 0 || frame > info.frame_count() {
        return Err(ApiError::not_found("UNKNOWN_FRAME", format!("clip {clip} has no frame {frame}")));
    }
    let png = frame_png(&dir, &info, frame)?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

fn manifest_with_track(dir: &Path, clip: &str, track: &str) -> Result<ClipManifest, ApiError> {
    let m = read_manifest(dir)?.ok_or_else(|| ApiError::not_found("UNKNOWN_TRACK", format!("clip {clip} has no tracks yet")))?;
    if m.track(track).is_none() {
        return Err(ApiError::not_found("UNKNOWN_TRACK", format!("no track {track} in clip {clip}")));
    }
    Ok(m)
}

async fn get_track(
    State(state): State<Arc<AppState>>,
    UrlPath((clip, track)): UrlPath<(String, String)>,
) -> Result<Json<MaskTrack>, ApiError> {
    let dir = state.clip_dir(&clip)?;
    let m = manifest_with_track(&dir, &clip, &track)?;
    Ok(Json(m.track(&track).cloned().expect("checked")))
}

/// Loads, mutates and saves the reviewed manifest under the per-clip guard
/// and the store's lock file. Nothing is written when `f` leaves the
/// manifest unchanged.
async fn mutate<T>(
    state: &AppState,
    clip: &str,
    track: &str,
    f: impl FnOnce(&Path, &mut ClipManifest) -> Result<T, ApiError>,
) -> Result<(T, ClipManifest), ApiError> {
    let dir = state.clip_dir(clip)?;
    let guard = state.clip_guard(clip);
    let _held = guard.lock().await;
    let path = dir.join(MANIFEST_FILE);
    let _lock = ClipLock::try_acquire(&path)?;
    let mut manifest = manifest_with_track(&dir, clip, track)?;
    let before = manifest.clone();
    let out = f(&dir, &mut manifest)?;
    if manifest != before {
        save_manifest(&manifest, &path)?;
    }
    Ok((out, manifest))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StatusBody {
    status: TrackStatus,
    #[serde(default = "default_actor")]
    actor: String,
}

fn default_actor() -> String {
    "annotator".into()
}

async fn post_status(
    State(state): State<Arc<AppState>>,
    UrlPath((clip, track)): UrlPath<(String, String)>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let body: StatusBody = parse_body(&body)?;
    let (changed, m) = mutate(&state, &clip, &track, |_, m| {
        Ok(set_track_status(m, &track, body.status, &body.actor, &timestamp_now())?)
    })
    .await?;
    let summary = TrackSummary::from(m.track(&track).expect("exists"));
    Ok(Json(serde_json::json!({ "changed": changed, "track": summary })).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RefineBody {
    frame: usize,
    prompts: Vec<PointPrompt>,
    #[serde(default = "default_candidates")]
    max_candidates: usize,
}

fn default_candidates() -> usize {
    3
}

#[derive(Debug, Serialize)]
struct CandidateOut {
    mask: RleMask,
    predicted_iou: f64,
    stability: f64,
}

async fn post_refine(
    State(state): State<Arc<AppState>>,
    UrlPath((clip, track)): UrlPath<(String, String)>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let body: RefineBody = parse_body(&body)?;
    let (dir, info) = state.clip(&clip)?;
    let m = manifest_with_track(&dir, &clip, &track)?;
    if m.track(&track).and_then(|t| t.frame(body.frame)).is_none() {
        return Err(ApiError::bad_request(
            "FRAME_OUT_OF_RANGE",
            format!("frame {} outside track {track}", body.frame),
        ));
    }
    let seg = state.segmenter_for(&clip, &info)?;
    let frame = FrameRef::new(body.frame, state.segmenter_ref(&dir, &info.frames[body.frame - 1]), info.dims);
    let result = tokio::task::spawn_blocking(move || segment(&*seg, &frame, &body.prompts, body.max_candidates))
        .await
        .map_err(|e| ApiError::internal("INTERNAL", e.to_string()))?;
    let candidates = match result {
        Ok(c) => c,
        Err(SegmentError::NoCandidate) => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    let out: Vec<CandidateOut> = candidates
        .into_iter()
        .map(|c| CandidateOut { mask: c.mask.to_rle(), predicted_iou: c.predicted_iou, stability: c.stability })
        .collect();
    Ok(Json(serde_json::json!({ "frame": body.frame, "candidates": out })).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CommitBody {
    frame: usize,
    mask: RleMask,
    #[serde(default = "default_actor")]
    actor: String,
}

async fn post_commit(
    State(state): State<Arc<AppState>>,
    UrlPath((clip, track)): UrlPath<(String, String)>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let body: CommitBody = parse_body(&body)?;
    let mask = body.mask.decode()?;
    let ((), m) = mutate(&state, &clip, &track, |dir, m| {
        let flows = FlowDir::new(dir);
        Ok(splice_refined_mask(m, &track, body.frame, &mask, &flows, &body.actor, &timestamp_now())?)
    })
    .await?;
    Ok(Json(TrackSummary::from(m.track(&track).expect("exists"))).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JobBody {
    clip_id: String,
    #[serde(default)]
    config: PipelineConfig,
}

async fn post_job(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let body: JobBody = parse_body(&body)?;
    body.config.validate()?;
    let (dir, info) = state.clip(&body.clip_id)?;
    let seg = state.segmenter_for(&body.clip_id, &info)?;
    let job = state.jobs.submit(&body.clip_id, body.config.clone())?;
    let id = job.job_id.clone();
    let refs: Vec<String> = info.frames.iter().map(|f| state.segmenter_ref(&dir, f)).collect();
    let st = state.clone();
    tokio::spawn(async move {
        let _permit = st.workers.clone().acquire_owned().await.expect("semaphore is never closed");
        st.jobs.set_running(&id);
        let worker = st.clone();
        let job_id = id.clone();
        let result = tokio::task::spawn_blocking(move || run_job(&worker, &job_id, &dir, &info, &*seg, &body.config, refs))
            .await
            .unwrap_or_else(|e| Err(ApiError::internal("INTERNAL", e.to_string())));
        if let Err(e) = &result {
            log::warn!("job {id} failed: {} {}", e.code, e.message);
        }
        st.jobs.finish(&id, result.map_err(|e| jobs::JobFailure { code: e.code, message: e.message }));
    });
    Ok((StatusCode::ACCEPTED, Json(serde_json::json!({ "job_id": job.job_id, "job": job }))).into_response())
}

fn run_job(
    state: &AppState,
    job_id: &str,
    dir: &Path,
    info: &ClipInfo,
    seg: &dyn Segmenter,
    config: &PipelineConfig,
    refs: Vec<String>,
) -> Result<(), ApiError> {
    let progress = |p: mugtrack_core::pipeline::Progress| state.jobs.set_progress(job_id, p.done, p.total);
    let options = CollectOptions { progress: Some(&progress), segmenter_refs: Some(refs), ..Default::default() };
    let manifest = collect_clip(info, &FlowDir::new(dir), seg, config, &options)?;
    let path = dir.join(MANIFEST_FILE);
    let _lock = ClipLock::try_acquire(&path)?;
    save_manifest(&manifest, &path)?;
    log::info!("job {job_id}: {} tracks written to {}", manifest.tracks.len(), path.display());
    Ok(())
}

async fn get_job(State(state): State<Arc<AppState>>, UrlPath(job): UrlPath<String>) -> Result<Json<Job>, ApiError> {
    state.jobs.get(&job).map(Json).ok_or_else(|| ApiError::not_found("UNKNOWN_JOB", format!("no job {job}")))
}

async fn list_jobs(State(state): State<Arc<AppState>>) -> Json<Vec<Job>> {
    Json(state.jobs.list())
}
