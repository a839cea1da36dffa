use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use mugtrack_core::pipeline::{collect_clip, CollectOptions};
use mugtrack_core::segmenter::OracleSegmenter;
use mugtrack_core::store::{write_synthetic_clip, ClipLock, MANIFEST_FILE};
use mugtrack_core::{BinaryMask, PipelineConfig, RleMask, SceneParams, SyntheticScene};
use mugtrack_service::{router, AppState, ServiceConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

const TS: &str = "2024-01-01T00:00:00Z";

struct Fixture {
    _dir: tempfile::TempDir,
    data: std::path::PathBuf,
    scene: SyntheticScene,
    app: Router,
}

fn fixture(params: SceneParams) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().to_path_buf();
    let (_, scene) = write_synthetic_clip(data.join("clip1"), "clip1", &params, TS).unwrap();
    let app = router(AppState::new(ServiceConfig::new(&data)).unwrap());
    Fixture { _dir: dir, data, scene, app }
}

fn small() -> SceneParams {
    SceneParams { height: 48, width: 48, frames: 4, shapes: 2, seed: 5 }
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty)).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

async fn call_json(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call(app, method, uri, body).await;
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn wait_for_job(app: &Router, id: &str) -> Value {
    for _ in 0..600 {
        let (_, job) = call_json(app, "GET", &format!("/api/jobs/{id}"), None).await;
        if job["state"] == "done" || job["state"] == "failed" {
            return job;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    panic!("job {id} did not finish");
}

fn grid8() -> Value {
    json!({ "grid_per_side": 8 })
}

async fn run_job(f: &Fixture) {
    let (status, body) = call_json(&f.app, "POST", "/api/jobs", Some(json!({ "clip_id": "clip1", "config": grid8() }))).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{body}");
    let job = wait_for_job(&f.app, body["job_id"].as_str().unwrap()).await;
    assert_eq!(job["state"], "done", "{job}");
}

fn track_for(manifest: &Value, mask: &BinaryMask) -> String {
    let rle = serde_json::to_value(mask.to_rle()).unwrap();
    manifest_tracks(manifest)
        .into_iter()
        .find(|t| t["frames"][0]["mask"] == rle)
        .map(|t| t["track_id"].as_str().unwrap().to_string())
        .expect("region tracked")
}

fn manifest_tracks(manifest: &Value) -> Vec<Value> {
    manifest["tracks"].as_array().unwrap().clone()
}

fn read_manifest(data: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(data.join("clip1").join(MANIFEST_FILE)).unwrap()).unwrap()
}

#[tokio::test]
async fn clips_and_frames() {
    let f = fixture(small());
    let (status, clips) = call_json(&f.app, "GET", "/api/clips", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(clips.as_array().unwrap().len(), 1);
    assert_eq!(clips[0]["clip_id"], "clip1");
    assert_eq!(clips[0]["frames"], 4);
    assert_eq!(clips[0]["tracks"], 0);
    assert_eq!(clips[0]["has_ground_truth"], true);

    let (status, tracks) = call_json(&f.app, "GET", "/api/clips/clip1/tracks", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(tracks["tracks"], json!([]));

    let (status, png) = call(&f.app, "GET", "/api/clips/clip1/frames/2", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(&png[1..4], b"PNG");

    for uri in ["/api/clips/nope/tracks", "/api/clips/clip1/frames/9", "/api/clips/..%2Fx/tracks", "/api/jobs/job-9"] {
        let (status, body) = call_json(&f.app, "GET", uri, None).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
        assert!(body["code"].is_string());
    }
}

#[tokio::test]
async fn job_matches_direct_collection() {
    let f = fixture(small());
    run_job(&f).await;
    let served = read_manifest(&f.data);

    let info = mugtrack_core::ClipInfo::load(f.data.join("clip1")).unwrap();
    let cfg: PipelineConfig = serde_json::from_value(grid8()).unwrap();
    let seg = OracleSegmenter::new(Arc::new(f.scene.clone()));
    let opts = CollectOptions { threads: Some(1), ..Default::default() };
    let direct = collect_clip(&info, &f.scene, &seg, &cfg, &opts).unwrap();
    let direct = serde_json::to_value(direct).unwrap();
    assert_eq!(served["tracks"], direct["tracks"]);
    assert_eq!(served["config"], direct["config"]);

    let (_, clips) = call_json(&f.app, "GET", "/api/clips", None).await;
    assert_eq!(clips[0]["tracks"].as_u64().unwrap() as usize, manifest_tracks(&served).len());

    // track payload masks decode to clip dims
    let id = manifest_tracks(&served)[0]["track_id"].as_str().unwrap().to_string();
    let (status, track) = call_json(&f.app, "GET", &format!("/api/tracks/clip1/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    for frame in track["frames"].as_array().unwrap() {
        let rle: RleMask = serde_json::from_value(frame["mask"].clone()).unwrap();
        assert_eq!(rle.decode().unwrap().dims(), f.scene.dims());
    }
}

#[tokio::test]
async fn job_conflicts_and_bad_configs() {
    let f = fixture(SceneParams { height: 64, width: 64, frames: 10, shapes: 3, seed: 1 });
    let (status, first) = call_json(&f.app, "POST", "/api/jobs", Some(json!({ "clip_id": "clip1" }))).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let (status, busy) = call_json(&f.app, "POST", "/api/jobs", Some(json!({ "clip_id": "clip1" }))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(busy["code"], "CLIP_BUSY");
    wait_for_job(&f.app, first["job_id"].as_str().unwrap()).await;

    let (status, body) =
        call_json(&f.app, "POST", "/api/jobs", Some(json!({ "clip_id": "clip1", "config": { "gamma": 1.5 } }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "INVALID_CONFIG");
    let (status, body) =
        call_json(&f.app, "POST", "/api/jobs", Some(json!({ "clip_id": "clip1", "config": { "gama": 0.5 } }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "SCHEMA_VIOLATION");
    let (status, _) = call_json(&f.app, "POST", "/api/jobs", Some(json!({ "clip_id": "other" }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn review_loop_persists_across_restart() {
    let f = fixture(small());
    run_job(&f).await;
    let manifest = read_manifest(&f.data);
    let s0 = f.scene.region("s0").unwrap().masks.clone();
    let whole = track_for(&manifest, &s0[0]);
    let status_uri = format!("/api/tracks/clip1/{whole}/status");

    // accept, retry (no-op), supervisor rejects
    let (status, body) = call_json(&f.app, "POST", &status_uri, Some(json!({ "status": "accepted", "actor": "ann" }))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["changed"], true);
    let (_, body) = call_json(&f.app, "POST", &status_uri, Some(json!({ "status": "accepted", "actor": "ann" }))).await;
    assert_eq!(body["changed"], false);
    let (_, track) = call_json(&f.app, "GET", &format!("/api/tracks/clip1/{whole}"), None).await;
    assert_eq!(track["status"], "accepted");
    call_json(&f.app, "POST", &status_uri, Some(json!({ "status": "rejected", "actor": "supervisor" }))).await;
    let (status, body) = call_json(&f.app, "POST", &status_uri, Some(json!({ "status": "auto" }))).await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::BAD_REQUEST, Some("INVALID_STATUS")));
    let (status, _) = call_json(&f.app, "POST", "/api/tracks/clip1/zzz/status", Some(json!({ "status": "accepted" }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    // refine with a positive click on the left half and a negative on the right
    let left = &f.scene.region("s0.left").unwrap().masks[2];
    let right = &f.scene.region("s0.right").unwrap().masks[2];
    let (lx, ly) = left.pixels().next().unwrap();
    let (rx, ry) = right.pixels().last().unwrap();
    let prompts = json!([{ "x": lx, "y": ly, "label": "pos" }, { "x": rx, "y": ry, "label": "neg" }]);
    let (status, refined) = call_json(
        &f.app,
        "POST",
        &format!("/api/tracks/clip1/{whole}/refine"),
        Some(json!({ "frame": 3, "prompts": prompts })),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{refined}");
    assert_eq!(refined["candidates"][0]["mask"], serde_json::to_value(left.to_rle()).unwrap());
    assert_eq!(refined["candidates"][0]["predicted_iou"], 1.0);
    let (status, _) = call_json(
        &f.app,
        "POST",
        &format!("/api/tracks/clip1/{whole}/refine"),
        Some(json!({ "frame": 3, "prompts": [{ "x": 1, "y": 1, "label": "neg" }] })),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    // corrupt frame 3, then commit the ground truth back
    let commit = format!("/api/tracks/clip1/{whole}/refine/commit");
    let (status, body) = call_json(&f.app, "POST", &commit, Some(json!({ "frame": 3, "mask": left.to_rle() }))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert!(body["frames"][2]["step_iou"].as_f64().unwrap() < 0.9);
    let (_, body) = call_json(&f.app, "POST", &commit, Some(json!({ "frame": 3, "mask": s0[2].to_rle(), "actor": "ann" }))).await;
    assert_eq!(body["frames"][2]["step_iou"], 1.0);
    assert_eq!(body["frames"][3]["step_iou"], 1.0);
    assert_eq!(body["frames"][2]["source"], "refined");

    let wrong = BinaryMask::empty(mugtrack_core::Dims::new(47, 48)).to_rle();
    let (status, body) = call_json(&f.app, "POST", &commit, Some(json!({ "frame": 3, "mask": wrong }))).await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::BAD_REQUEST, Some("DIMENSION_MISMATCH")));
    let (status, _) = call_json(&f.app, "POST", &commit, Some(json!({ "frame": 3, "mask": { "size": [48, 48], "counts": [5] } }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call_json(&f.app, "POST", &commit, Some(json!({ "frame": 9, "mask": s0[2].to_rle() }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    // restart: new state over the same data directory
    let app2 = router(AppState::new(ServiceConfig::new(&f.data)).unwrap());
    let (_, track) = call_json(&app2, "GET", &format!("/api/tracks/clip1/{whole}"), None).await;
    assert_eq!(track["status"], "rejected");
    assert_eq!(track["frames"][2]["mask"], serde_json::to_value(s0[2].to_rle()).unwrap());
    let (_, listing) = call_json(&app2, "GET", "/api/clips/clip1/tracks", None).await;
    let actions: Vec<&str> = listing["audit"].as_array().unwrap().iter().map(|e| e["action"].as_str().unwrap()).collect();
    assert_eq!(actions, vec!["created", "accepted", "rejected", "refined", "refined"]);
    let (_, clips) = call_json(&app2, "GET", "/api/clips", None).await;
    assert_eq!(clips[0]["rejected"], 1);
}

#[tokio::test]
async fn lock_conflict_and_interrupted_jobs() {
    let f = fixture(small());
    run_job(&f).await;
    let manifest = read_manifest(&f.data);
    let id = manifest_tracks(&manifest)[0]["track_id"].as_str().unwrap().to_string();

    let lock = ClipLock::try_acquire(f.data.join("clip1").join(MANIFEST_FILE)).unwrap();
    let (status, body) =
        call_json(&f.app, "POST", &format!("/api/tracks/clip1/{id}/status"), Some(json!({ "status": "accepted" }))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "CLIP_LOCKED");
    drop(lock);

    // a job still queued when the process stops is reported as restarted
    let state = AppState::new(ServiceConfig::new(&f.data)).unwrap();
    let queued = state.jobs().submit("clip1", PipelineConfig::default()).unwrap();
    drop(state);
    let app2 = router(AppState::new(ServiceConfig::new(&f.data)).unwrap());
    let (_, job) = call_json(&app2, "GET", &format!("/api/jobs/{}", queued.job_id), None).await;
    assert_eq!(job["state"], "failed");
    assert_eq!(job["error"]["code"], "RESTARTED");
    let (_, jobs) = call_json(&app2, "GET", "/api/jobs", None).await;
    assert_eq!(jobs.as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn cors_allows_configured_origin() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ServiceConfig::new(dir.path());
    cfg.ui_origin = Some("http://localhost:5173".into());
    let app = router(AppState::new(cfg).unwrap());
    let req = Request::builder()
        .method("OPTIONS")
        .uri("/api/clips")
        .header("origin", "http://localhost:5173")
        .header("access-control-request-method", "POST")
        .body(Body::empty())
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert_eq!(resp.headers()["access-control-allow-origin"], "http://localhost:5173");
}
