//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use mugtrack_core::flow::{read_flow, write_flow, FlowField};
use mugtrack_core::mask::{boundary_f_score, default_boundary_tolerance, iou, rle_decode, rle_encode};
use mugtrack_core::metrics::{dataset_stats, eval_track_jf, match_tracks_by_iou, render_stats_row};
use mugtrack_core::pipeline::{collect_clip, filter_tracks, should_resample, CollectOptions};
use mugtrack_core::segmenter::OracleSegmenter;
use mugtrack_core::store::{
    load_manifest, save_manifest, splice_refined_mask, write_synthetic_clip, CLIP_FILE,
};
use mugtrack_core::{BinaryMask, ClipManifest, Dims, MaskTrack, PipelineConfig, SceneParams, SyntheticScene};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TS: &str = "1970-01-01T00:00:00Z";

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("end-to-end recovery", end_to_end_recovery),
        ("metric oracle equivalence", metric_oracle),
        ("gamma filter semantics", gamma_filter),
        ("statistics fixture and table row", statistics),
        ("codec and format round trips", round_trips),
        ("collect determinism across thread counts", determinism),
        ("configuration defaults", defaults),
        ("stability resample policy", stability_policy),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn params(seed: u64) -> SceneParams {
    SceneParams { height: 64, width: 64, frames: 10, shapes: 3, seed }
}

fn collect_synthetic(dir: &Path, seed: u64, config: &PipelineConfig) -> Result<(ClipManifest, ClipManifest, SyntheticScene), String> {
    let (info, scene) = write_synthetic_clip(dir, &format!("clip{seed}"), &params(seed), TS).map_err(err)?;
    let seg = OracleSegmenter::new(Arc::new(scene.clone()));
    let options = CollectOptions { threads: Some(1), timestamp: Some(TS.into()), ..Default::default() };
    let pred = collect_clip(&info, &scene, &seg, config, &options).map_err(err)?;
    let gt = load_manifest(dir.join(mugtrack_core::store::GT_MANIFEST)).map_err(err)?;
    Ok((pred, gt, scene))
}

fn end_to_end_recovery() -> Outcome {
    let tmp = tempfile::tempdir().map_err(err)?;
    let config = PipelineConfig::default();
    let mut collect_time = Duration::ZERO;
    let mut regions = 0;
    let mut worst = f64::INFINITY;
    for seed in 0..10u64 {
        let dir = tmp.path().join(format!("clip{seed}"));
        let start = Instant::now();
        let (pred, gt, _) = collect_synthetic(&dir, seed, &config)?;
        let kept = filter_tracks(&pred, 0.9);
        collect_time += start.elapsed();

        let pred_kept: Vec<&MaskTrack> = kept.kept_tracks().collect();
        let gt_tracks: Vec<&MaskTrack> = gt.tracks.iter().collect();
        let pairs = match_tracks_by_iou(&pred_kept, &gt_tracks).map_err(err)?;
        for g in &gt.tracks {
            let Some(p) = pairs.get(&g.track_id) else {
                return Err(format!("seed {seed}: region {} has no surviving track", g.track_id));
            };
            let p = kept.track(p).expect("matched id exists");
            let score = eval_track_jf(p, g, None).map_err(err)?;
            worst = worst.min(score.jf);
            check(score.jf >= 0.99, || format!("seed {seed}: region {} scores J&F {:.4}", g.track_id, score.jf))?;
            regions += 1;
        }
    }
    check(collect_time < Duration::from_secs(30), || format!("collection took {collect_time:?}"))?;
    Ok(format!("{regions} regions over 10 clips recovered, min J&F {worst:.4}, {collect_time:.2?} single-threaded"))
}

fn random_mask(rng: &mut ChaCha8Rng, d: Dims) -> BinaryMask {
    match rng.random_range(0..3) {
        0 => {
            let p = rng.random_range(0.0..1.0);
            BinaryMask::from_fn(d, |_, _| rng.random_bool(p))
        }
        1 => {
            let (x0, y0) = (rng.random_range(0..d.width), rng.random_range(0..d.height));
            let (x1, y1) = (rng.random_range(x0..d.width), rng.random_range(y0..d.height));
            BinaryMask::from_fn(d, |x, y| (x0..=x1).contains(&x) && (y0..=y1).contains(&y))
        }
        _ => {
            let (cx, cy) = (rng.random_range(0.0..d.width as f64), rng.random_range(0.0..d.height as f64));
            let r = rng.random_range(0.0..d.width.max(d.height) as f64);
            BinaryMask::from_fn(d, |x, y| (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= r * r)
        }
    }
}

fn oracle_j(a: &BinaryMask, b: &BinaryMask) -> f64 {
    let ap: std::collections::BTreeSet<_> = a.pixels().collect();
    let bp: std::collections::BTreeSet<_> = b.pixels().collect();
    let union = ap.union(&bp).count();
    if union == 0 {
        return 1.0;
    }
    ap.intersection(&bp).count() as f64 / union as f64
}

fn oracle_boundary(m: &BinaryMask) -> Vec<(i64, i64)> {
    let (w, h) = (m.width() as i64, m.height() as i64);
    let fg = |x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && m.get(x as usize, y as usize);
    m.pixels()
        .map(|(x, y)| (x as i64, y as i64))
        .filter(|&(x, y)| [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|(dx, dy)| !fg(x + dx, y + dy)))
        .collect()
}

fn oracle_f(a: &BinaryMask, b: &BinaryMask, tol: f64) -> f64 {
    let (pa, pb) = (oracle_boundary(a), oracle_boundary(b));
    if pa.is_empty() && pb.is_empty() {
        return 1.0;
    }
    if pa.is_empty() || pb.is_empty() {
        return 0.0;
    }
    let hits = |from: &[(i64, i64)], to: &[(i64, i64)]| {
        from.iter()
            .filter(|p| {
                to.iter()
                    .map(|q| (((p.0 - q.0).pow(2) + (p.1 - q.1).pow(2)) as f64).sqrt())
                    .fold(f64::INFINITY, f64::min)
                    <= tol
            })
            .count() as f64
    };
    let precision = hits(&pa, &pb) / pa.len() as f64;
    let recall = hits(&pb, &pa) / pb.len() as f64;
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_f = 0.0f64;
    for i in 0..200 {
        let d = Dims::new(rng.random_range(1..=32), rng.random_range(1..=32));
        let (a, b) = (random_mask(&mut rng, d), random_mask(&mut rng, d));
        let j = iou(&a, &b).map_err(err)?;
        let oj = oracle_j(&a, &b);
        check(j.to_bits() == oj.to_bits(), || format!("pair {i}: J {j} vs oracle {oj}"))?;
        let tol = if i % 2 == 0 { default_boundary_tolerance(d) } else { [0.0, 1.0, 1.5, 2.0, 3.7][i % 5] };
        let f = boundary_f_score(&a, &b, tol).map_err(err)?;
        let of = oracle_f(&a, &b, tol);
        worst_f = worst_f.max((f - of).abs());
        check((f - of).abs() <= 1e-9, || format!("pair {i}: F {f} vs oracle {of} at tolerance {tol}"))?;
    }
    Ok(format!("200 pairs, J bit-exact, max F deviation {worst_f:.1e}"))
}

fn kept_ids(m: &ClipManifest) -> Vec<String> {
    m.kept_tracks().map(|t| t.track_id.clone()).collect()
}

fn gamma_filter() -> Outcome {
    let tmp = tempfile::tempdir().map_err(err)?;
    let (mut pred, _, scene) = collect_synthetic(tmp.path(), 3, &PipelineConfig::default())?;
    let before = kept_ids(&filter_tracks(&pred, 0.9));
    check(before.len() == pred.tracks.len(), || "uncorrupted manifest already loses tracks".into())?;
    let victim = pred.tracks[pred.tracks.len() / 2].track_id.clone();
    let frame = 5;
    let mask = pred.track(&victim).and_then(|t| t.mask_at(frame)).expect("frame present").map_err(err)?;
    let shifted = BinaryMask::from_fn(mask.dims(), |x, y| x >= 6 && mask.get(x - 6, y));
    splice_refined_mask(&mut pred, &victim, frame, &shifted, &scene, "acceptance", TS).map_err(err)?;
    let low = pred.track(&victim).unwrap().step_ious().fold(f64::INFINITY, f64::min);
    check(low < 0.9, || format!("corruption left min step IoU at {low:.3}"))?;
    let after = kept_ids(&filter_tracks(&pred, 0.9));
    let removed: Vec<_> = before.iter().filter(|id| !after.contains(id)).collect();
    check(removed == [&victim] && after.len() + 1 == before.len(), || format!("removed {removed:?}, expected [{victim}]"))?;

    let gammas = [0.0, 0.5, 0.9, 0.99];
    let sets: Vec<Vec<String>> = gammas.iter().map(|&g| kept_ids(&filter_tracks(&pred, g))).collect();
    for w in 0..gammas.len() - 1 {
        check(sets[w + 1].iter().all(|id| sets[w].contains(id)), || {
            format!("kept set at gamma {} is not within the set at {}", gammas[w + 1], gammas[w])
        })?;
    }
    let sizes: Vec<usize> = sets.iter().map(Vec::len).collect();
    Ok(format!("corrupting {victim} (min step IoU {low:.3}) removed only it; kept counts {sizes:?} over {gammas:?}"))
}

fn statistics() -> Outcome {
    let d = Dims::new(4, 4);
    let one = BinaryMask::from_pixels(d, [(0, 0)]);
    let two = BinaryMask::from_pixels(d, [(0, 0), (1, 1)]);
    let mut m = ClipManifest::new("fixture", d, vec!["frame_0001.pgm".into()]);
    m.tracks = vec![MaskTrack::from_masks("a", 1, &[one]), MaskTrack::from_masks("b", 1, &[two])];
    let s = dataset_stats(&[m]).map_err(err)?;
    let got = (s.density, s.masks, s.tracks, s.masks_per_frame, s.frames);
    check(got == (0.125, 2, 2, 2.0, 1), || format!("fixture gave {got:?}"))?;
    let table = s.to_table();
    let labels = ["Density", "Masks", "Mask Tracks", "Masks per Frame", "Annotated Frames"];
    let order: Vec<usize> = labels.iter().filter_map(|l| table.lines().position(|line| line.starts_with(l))).collect();
    check(order == [0, 1, 2, 3, 4], || format!("table column order wrong:\n{table}"))?;
    let row = render_stats_row("Fixture", &s);
    check(row == "Fixture & 0.125 & 2 & 2 & 2.0 & 1", || format!("row rendered as {row:?}"))?;
    Ok(row)
}

fn round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for i in 0..1000 {
        let d = Dims::new(rng.random_range(1..=48), rng.random_range(1..=48));
        let m = random_mask(&mut rng, d);
        let back = rle_decode(&rle_encode(&m)).map_err(err)?;
        check(back == m, || format!("mask {i} changed through RLE"))?;
    }

    let tmp = tempfile::tempdir().map_err(err)?;
    for i in 0..20 {
        let d = Dims::new(rng.random_range(1..=40), rng.random_range(1..=40));
        let mut flow = FlowField::zeros(d);
        for y in 0..d.height {
            for x in 0..d.width {
                flow.set(x, y, rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0));
            }
        }
        let (p, q) = (tmp.path().join(format!("a{i}.mgfl")), tmp.path().join(format!("b{i}.mgfl")));
        write_flow(&flow, &p).map_err(err)?;
        let read = read_flow(&p).map_err(err)?;
        write_flow(&read, &q).map_err(err)?;
        let (a, b) = (std::fs::read(&p).map_err(err)?, std::fs::read(&q).map_err(err)?);
        check(a == b && read.to_bytes() == flow.to_bytes(), || format!("flow {i} changed through MGFL"))?;
    }

    let mut manifests = 0;
    for seed in [0u64, 5] {
        let dir = tmp.path().join(format!("clip{seed}"));
        let (pred, gt, _) = collect_synthetic(&dir, seed, &PipelineConfig::default())?;
        for m in [filter_tracks(&pred, 0.9), gt] {
            let path = dir.join("round.mug.json");
            save_manifest(&m, &path).map_err(err)?;
            let back = load_manifest(&path).map_err(err)?;
            check(back == m, || format!("manifest {} changed through save/load", m.clip_id))?;
            manifests += 1;
        }
    }
    Ok(format!("1000 RLE masks, 20 MGFL files byte-exact, {manifests} manifests value-exact"))
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(err)?;
    let clip = tmp.path().join("clip");
    write_synthetic_clip(&clip, "clip", &SceneParams { seed: 11, ..params(0) }, TS).map_err(err)?;
    check(clip.join(CLIP_FILE).exists(), || "clip not written".into())?;
    let mut outputs = Vec::new();
    for (threads, run) in [(1, 0), (1, 1), (8, 0), (8, 1)] {
        let out = tmp.path().join(format!("t{threads}-{run}.mug.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_mugtrack"))
            .env("SOURCE_DATE_EPOCH", "1700000000")
            .args(["collect", "--seed", "9", "--threads", &threads.to_string(), "--clip"])
            .arg(&clip)
            .arg("--out")
            .arg(&out)
            .output()
            .map_err(err)?;
        check(status.status.success(), || format!("collect failed: {}", String::from_utf8_lossy(&status.stderr)))?;
        outputs.push(std::fs::read(&out).map_err(err)?);
    }
    check(outputs.windows(2).all(|w| w[0] == w[1]), || "manifests differ between runs".into())?;
    Ok(format!("4 runs at threads 1 and 8 byte-identical ({} bytes)", outputs[0].len()))
}

fn defaults() -> Outcome {
    let v = serde_json::to_value(PipelineConfig::default()).map_err(err)?;
    let expected = [
        ("gamma", serde_json::json!(0.9)),
        ("points_per_target", serde_json::json!(8)),
        ("alpha", serde_json::json!(0.2)),
        ("kmeans_k", serde_json::json!(10)),
        ("grid_per_side", serde_json::json!(32)),
    ];
    for (key, want) in &expected {
        check(v.get(key) == Some(want), || format!("{key} serialises as {:?}, expected {want}", v.get(key)))?;
    }
    Ok(expected.iter().map(|(k, w)| format!("{k}={w}")).collect::<Vec<_>>().join(" "))
}

fn stability_policy() -> Outcome {
    let config = PipelineConfig { alpha: 0.2, resample_period: 1, ..Default::default() };
    let fired: Vec<usize> = [0.5, 0.1, 0.3]
        .iter()
        .enumerate()
        .filter(|&(k, &v)| should_resample(k + 1, v, &config))
        .map(|(k, _)| k + 1)
        .collect();
    check(fired == [1, 3], || format!("resampled at {fired:?}"))?;
    Ok(format!("IoUs [0.5, 0.1, 0.3] at alpha 0.2 resample at steps {fired:?}"))
}
