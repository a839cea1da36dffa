//! `mugtrack`: generate synthetic clips, collect and curate mask tracks,
//! report statistics and scores, and serve the review API.
//!
//! Exit status: 0 on success, 1 on operational errors, 2 on usage errors.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mugtrack_core::flow::{FlowDir, FlowProvider};
use mugtrack_core::metrics::{dataset_stats, eval_manifest, render_stats_row, EvalMode, TrackMatching};
use mugtrack_core::pipeline::{collect_clip, filter_tracks, CollectMode, CollectOptions};
use mugtrack_core::segmenter::{OracleSegmenter, RemoteConfig, RemoteSegmenter, Segmenter};
use mugtrack_core::store::{
    load_manifest, save_manifest, timestamp_now, verify_manifest, write_synthetic_clip, ClipLock, MANIFEST_FILE,
};
use mugtrack_core::{ClipInfo, ClipManifest, PipelineConfig, SceneParams, SyntheticScene};
use mugtrack_service::{SegmenterChoice, ServiceConfig};

#[derive(Parser)]
#[command(name = "mugtrack", version, about = "Multi-granularity mask track collection and review")]
struct Cli {
    /// More logging (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Print machine-readable JSON instead of tables.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic clip with exact flows and ground truth.
    Synth(SynthArgs),
    /// Collect mask tracks on a clip.
    Collect(CollectArgs),
    /// Mark tracks whose step IoU does not exceed gamma on every frame.
    Filter(FilterArgs),
    /// Dataset statistics over one or more manifests.
    Stats(StatsArgs),
    /// Score predicted tracks against ground truth.
    Eval(EvalArgs),
    /// Run the review service.
    Serve(ServeArgs),
    /// Re-check a manifest's schema and stored step IoUs.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output clip directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 64)]
    height: usize,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 10)]
    frames: usize,
    #[arg(long, default_value_t = 3)]
    shapes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Clip id; defaults to the directory name.
    #[arg(long)]
    clip_id: Option<String>,
}

#[derive(Clone, Debug)]
enum FlowSource {
    Exact,
    Files(PathBuf),
}

fn parse_flow(s: &str) -> Result<FlowSource, String> {
    match s {
        "exact" => Ok(FlowSource::Exact),
        _ => match s.strip_prefix("files:") {
            Some(dir) if !dir.is_empty() => Ok(FlowSource::Files(dir.into())),
            _ => Err("expected `exact` or `files:DIR`".into()),
        },
    }
}

fn parse_unit(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn parse_positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Propagate,
    GridBaseline,
}

#[derive(Args)]
struct CollectArgs {
    /// Clip directory (contains clip.json).
    #[arg(long)]
    clip: PathBuf,
    /// `synthetic` (ground-truth oracle) or `remote:URL`.
    #[arg(long, default_value = "synthetic")]
    segmenter: SegmenterChoice,
    /// `exact` (synthetic clips) or `files:DIR` with flow_T_T+1.mgfl files.
    #[arg(long, default_value = "exact", value_parser = parse_flow)]
    flow: FlowSource,
    #[arg(long, value_parser = parse_positive)]
    points: Option<usize>,
    #[arg(long, value_parser = parse_unit)]
    gamma: Option<f64>,
    #[arg(long, value_parser = parse_positive)]
    grid: Option<usize>,
    #[arg(long, value_parser = parse_unit)]
    alpha: Option<f64>,
    #[arg(long, value_parser = parse_positive)]
    period: Option<usize>,
    #[arg(long, value_parser = parse_positive)]
    max_candidates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Pipeline config JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads; all cores when omitted.
    #[arg(long, value_parser = parse_positive)]
    threads: Option<usize>,
    /// Output manifest; defaults to CLIP/tracks.mug.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 0.9, value_parser = parse_unit)]
    gamma: f64,
    /// Output path; the manifest is updated in place when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long, required = true, num_args = 1..)]
    manifest: Vec<PathBuf>,
    /// Row label for the table line.
    #[arg(long, default_value = "Dataset")]
    name: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalModeArg {
    PerTrack,
    Vos,
}

#[derive(Clone, Copy, ValueEnum)]
enum MatchArg {
    Id,
    Iou,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, value_enum, default_value = "per-track")]
    mode: EvalModeArg,
    /// How predicted tracks are paired with ground-truth tracks.
    #[arg(long = "match", value_enum, default_value = "id")]
    matching: MatchArg,
    /// Boundary tolerance in pixels; defaults to ceil(0.008 * diagonal).
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Data directory; the MUG_DATA environment variable takes precedence.
    #[arg(long, default_value = "data")]
    data: PathBuf,
    #[arg(long, default_value = "synthetic")]
    segmenter: SegmenterChoice,
    #[arg(long)]
    ui_origin: Option<String>,
    #[arg(long, default_value_t = 2, value_parser = parse_positive)]
    workers: usize,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Flow source; defaults to the flow files next to the manifest.
    #[arg(long, value_parser = parse_flow)]
    flow: Option<FlowSource>,
}

/// Operational failure: `CODE: message`, exit status 1.
struct Failure {
    code: String,
    message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

macro_rules! failure_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure { code: e.code().to_string(), message: e.to_string() }
            }
        }
    )*};
}

failure_from!(
    mugtrack_core::StoreError,
    mugtrack_core::PipelineError,
    mugtrack_core::SegmentError,
    mugtrack_core::FlowError,
    mugtrack_core::metrics::MetricsError,
    mugtrack_core::synth::SynthError
);

fn fail(code: &str, message: impl Into<String>) -> Failure {
    Failure { code: code.into(), message: message.into() }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    let json = cli.json;
    let result = match cli.command {
        Command::Synth(a) => synth(a, json),
        Command::Collect(a) => collect(a, json),
        Command::Filter(a) => filter(a, json),
        Command::Stats(a) => stats(a, json),
        Command::Eval(a) => eval(a, json),
        Command::Serve(a) => serve(a),
        Command::Verify(a) => verify(a, json),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("values serialise"));
}

fn synth(a: SynthArgs, json: bool) -> Result<ExitCode, Failure> {
    let params = SceneParams { height: a.height, width: a.width, frames: a.frames, shapes: a.shapes, seed: a.seed };
    let id = a.clip_id.unwrap_or_else(|| {
        a.out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "clip".into())
    });
    // validate first so bad parameters are not reported as a store error
    mugtrack_core::synth::generate_clip(&params)?;
    let (info, scene) = write_synthetic_clip(&a.out, &id, &params, &timestamp_now())?;
    if json {
        print_json(&serde_json::json!({
            "clip": a.out, "clip_id": info.clip_id, "frames": info.frame_count(), "regions": scene.regions().len(),
        }));
    } else {
        println!("wrote {} ({} frames, {} regions)", a.out.display(), info.frame_count(), scene.regions().len());
    }
    Ok(ExitCode::SUCCESS)
}

fn scene_of(info: &ClipInfo) -> Result<SyntheticScene, Failure> {
    match info.scene() {
        Some(s) => Ok(s?),
        None => Err(fail("NOT_SYNTHETIC", format!("clip {} has no generator parameters", info.clip_id))),
    }
}

fn collect(a: CollectArgs, json: bool) -> Result<ExitCode, Failure> {
    let info = ClipInfo::load(&a.clip)?;
    let mut config = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| fail("IO_ERROR", format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| fail("INVALID_CONFIG", format!("{}: {e}", p.display())))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(v) = a.points {
        config.points_per_target = v;
    }
    if let Some(v) = a.gamma {
        config.gamma = v;
    }
    if let Some(v) = a.grid {
        config.grid_per_side = v;
    }
    if let Some(v) = a.alpha {
        config.alpha = v;
    }
    if let Some(v) = a.period {
        config.resample_period = v;
    }
    if let Some(v) = a.max_candidates {
        config.max_candidates = v;
    }
    if let Some(v) = a.seed {
        config.seed = v;
    }
    if let Some(m) = a.mode {
        config.mode = match m {
            ModeArg::Propagate => CollectMode::Propagate,
            ModeArg::GridBaseline => CollectMode::GridBaseline,
        };
    }
    config.validate()?;

    let scene = match (&a.flow, &a.segmenter) {
        (FlowSource::Exact, _) | (_, SegmenterChoice::Synthetic) => Some(Arc::new(scene_of(&info)?)),
        _ => None,
    };
    let flows: Box<dyn FlowProvider> = match &a.flow {
        FlowSource::Exact => Box::new(scene.clone().expect("loaded above").as_ref().clone()),
        FlowSource::Files(dir) => Box::new(FlowDir::new(dir)),
    };
    let (seg, refs): (Box<dyn Segmenter>, Option<Vec<String>>) = match &a.segmenter {
        SegmenterChoice::Synthetic => (Box::new(OracleSegmenter::new(scene.expect("loaded above"))), None),
        SegmenterChoice::Remote(url) => {
            let remote = RemoteSegmenter::new(RemoteConfig::new(url))?;
            let base = a.clip.canonicalize().unwrap_or_else(|_| a.clip.clone());
            let refs = info.frames.iter().map(|f| base.join(f).to_string_lossy().into_owned()).collect();
            (Box::new(remote), Some(refs))
        }
    };
    let options = CollectOptions { threads: a.threads, segmenter_refs: refs, ..Default::default() };
    let manifest = collect_clip(&info, flows.as_ref(), seg.as_ref(), &config, &options)?;
    let out = a.out.unwrap_or_else(|| a.clip.join(MANIFEST_FILE));
    let _lock = ClipLock::try_acquire(&out)?;
    save_manifest(&manifest, &out)?;
    let truncated = manifest.tracks.iter().filter(|t| t.frames.len() < manifest.frame_count()).count();
    if json {
        print_json(&serde_json::json!({ "manifest": out, "tracks": manifest.tracks.len(), "truncated": truncated }));
    } else {
        println!("{} tracks ({truncated} truncated) -> {}", manifest.tracks.len(), out.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn filter(a: FilterArgs, json: bool) -> Result<ExitCode, Failure> {
    let out = a.out.clone().unwrap_or_else(|| a.manifest.clone());
    let _lock = ClipLock::try_acquire(&out)?;
    let manifest = load_manifest(&a.manifest)?;
    let filtered = filter_tracks(&manifest, a.gamma);
    save_manifest(&filtered, &out)?;
    let kept: Vec<&str> = filtered.kept_tracks().map(|t| t.track_id.as_str()).collect();
    if json {
        print_json(&serde_json::json!({ "manifest": out, "gamma": a.gamma, "tracks": filtered.tracks.len(), "kept": kept }));
    } else {
        println!("kept {} of {} tracks at gamma {} -> {}", kept.len(), filtered.tracks.len(), a.gamma, out.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn load_all(paths: &[PathBuf]) -> Result<Vec<ClipManifest>, Failure> {
    paths.iter().map(|p| Ok(load_manifest(p)?)).collect()
}

fn stats(a: StatsArgs, json: bool) -> Result<ExitCode, Failure> {
    let manifests = load_all(&a.manifest)?;
    let report = dataset_stats(&manifests)?;
    if json {
        print_json(&serde_json::to_value(&report).expect("report serialises"));
    } else {
        print!("{}", report.to_table());
        println!("{}", render_stats_row(&a.name, &report));
    }
    Ok(ExitCode::SUCCESS)
}

fn eval(a: EvalArgs, json: bool) -> Result<ExitCode, Failure> {
    let pred = load_manifest(&a.pred)?;
    let gt = load_manifest(&a.gt)?;
    let mode = match a.mode {
        EvalModeArg::PerTrack => EvalMode::PerTrack,
        EvalModeArg::Vos => EvalMode::Vos,
    };
    let matching = match a.matching {
        MatchArg::Id => TrackMatching::Id,
        MatchArg::Iou => TrackMatching::Iou,
    };
    let report = eval_manifest(&pred, &gt, mode, matching, a.tolerance)?;
    if json {
        print_json(&serde_json::to_value(&report).expect("report serialises"));
    } else {
        print!("{}", report.to_table());
    }
    Ok(ExitCode::SUCCESS)
}

fn serve(a: ServeArgs) -> Result<ExitCode, Failure> {
    let data = match std::env::var_os("MUG_DATA") {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => a.data,
    };
    let config = ServiceConfig {
        data_dir: data,
        host: a.host,
        port: a.port,
        segmenter: a.segmenter,
        ui_origin: a.ui_origin,
        workers: a.workers,
    };
    let rt = tokio::runtime::Runtime::new().map_err(|e| fail("IO_ERROR", e.to_string()))?;
    rt.block_on(mugtrack_service::serve(config)).map_err(|e| fail("IO_ERROR", e.to_string()))?;
    Ok(ExitCode::SUCCESS)
}

fn verify(a: VerifyArgs, json: bool) -> Result<ExitCode, Failure> {
    let manifest = load_manifest(&a.manifest)?;
    let dir = a.manifest.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let flows: Box<dyn FlowProvider> = match a.flow {
        Some(FlowSource::Exact) => Box::new(scene_of(&ClipInfo::load(dir)?)?),
        Some(FlowSource::Files(d)) => Box::new(FlowDir::new(d)),
        None => Box::new(FlowDir::new(dir)),
    };
    let report = verify_manifest(&manifest, flows.as_ref())?;
    if json {
        print_json(&serde_json::to_value(&report).expect("report serialises"));
    } else {
        println!("{} tracks, {} steps checked, {} mismatches", report.tracks, report.steps, report.mismatches.len());
        for m in &report.mismatches {
            println!("  {} frame {}: stored {:?}, recomputed {:?}", m.track_id, m.frame_index, m.stored, m.recomputed);
        }
    }
    Ok(if report.ok() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
