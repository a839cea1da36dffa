//! On-disk clip directories.
//!
//! ```text
//! clip.json              ClipInfo
//! frame_0001.pgm ...     8-bit grayscale frames
//! labels_0001.pgm ...    synthetic label maps
//! flow_1_2.mgfl ...      forward flow between consecutive frames
//! gt.mug.json            ground-truth manifest (synthetic clips)
//! tracks.mug.json        pipeline output
//! ```

use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, GrayImage, ImageEncoder, ImageFormat};
use serde::{Deserialize, Serialize};

use super::{AuditAction, AuditEvent, ClipManifest, StoreError};
use crate::flow::{warp_mask, write_flow, FlowDir};
use crate::mask::{iou, Dims};
use crate::pipeline::MaskTrack;
use crate::synth::{generate_clip, SceneParams, SynthError, SyntheticScene};

pub const CLIP_FILE: &str = "clip.json";
pub const GT_MANIFEST: &str = "gt.mug.json";
pub const MANIFEST_FILE: &str = "tracks.mug.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipInfo {
    pub clip_id: String,
    pub dims: Dims,
    /// Frame files relative to the clip directory, in order.
    pub frames: Vec<String>,
    /// Generator parameters when the clip is synthetic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SceneParams>,
}

impl ClipInfo {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = dir.as_ref().join(CLIP_FILE);
        let text = fs::read_to_string(&path).map_err(|e| StoreError::io(&path, e))?;
        let info: ClipInfo = serde_json::from_str(&text)
            .map_err(|e| StoreError::schema("", format!("{}: {e}", path.display())))?;
        if !info.dims.is_valid() || info.frames.is_empty() {
            return Err(StoreError::schema("", format!("{}: empty clip", path.display())));
        }
        Ok(info)
    }

    /// Rebuilds the scene of a synthetic clip from its parameters.
    pub fn scene(&self) -> Option<Result<SyntheticScene, SynthError>> {
        self.synthetic.as_ref().map(generate_clip)
    }

    pub fn flows(&self, dir: impl AsRef<Path>) -> FlowDir {
        FlowDir::new(dir.as_ref())
    }
}

/// Gray level of a label: background is dark, parts get distinct levels.
fn intensity(label: u8) -> u8 {
    if label == 0 {
        24
    } else {
        64 + ((label as u32 * 53) % 192) as u8
    }
}

fn write_pgm(path: &Path, dims: Dims, pixels: &[u8]) -> Result<(), StoreError> {
    let mut buf = Vec::new();
    PnmEncoder::new(&mut buf)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(pixels, dims.width as u32, dims.height as u32, ExtendedColorType::L8)
        .map_err(|e| StoreError::io(path, e))?;
    fs::write(path, buf).map_err(|e| StoreError::io(path, e))
}

fn read_gray(path: &Path) -> Result<GrayImage, StoreError> {
    let img = image::open(path).map_err(|e| StoreError::io(path, e))?;
    Ok(img.into_luma8())
}

pub fn write_label_map(path: impl AsRef<Path>, dims: Dims, labels: &[u8]) -> Result<(), StoreError> {
    write_pgm(path.as_ref(), dims, labels)
}

pub fn read_label_map(path: impl AsRef<Path>) -> Result<(Dims, Vec<u8>), StoreError> {
    let img = read_gray(path.as_ref())?;
    let dims = Dims::new(img.height() as usize, img.width() as usize);
    Ok((dims, img.into_raw()))
}

/// A frame of the clip encoded as PNG.
pub fn frame_png(dir: impl AsRef<Path>, info: &ClipInfo, frame: usize) -> Result<Vec<u8>, StoreError> {
    let name = frame
        .checked_sub(1)
        .and_then(|i| info.frames.get(i))
        .ok_or(StoreError::FrameOutOfRange { track: info.clip_id.clone(), frame })?;
    let path = dir.as_ref().join(name);
    let img = read_gray(&path)?;
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png).map_err(|e| StoreError::io(&path, e))?;
    Ok(out.into_inner())
}

/// One track per ground-truth region, id equal to the region id, with step
/// IoUs computed under the exact flow.
pub fn ground_truth_manifest(scene: &SyntheticScene, clip_id: &str, frames: Vec<String>, timestamp: &str) -> ClipManifest {
    let mut manifest = ClipManifest::new(clip_id, scene.dims(), frames);
    let flows: Vec<_> = (1..scene.frame_count()).map(|t| scene.exact_flow(t).expect("in range")).collect();
    for region in scene.regions() {
        let mut track = MaskTrack::from_masks(region.id.clone(), 1, &region.masks);
        for k in 1..region.masks.len() {
            let warped = warp_mask(&region.masks[k - 1], &flows[k - 1]).expect("same dims");
            track.frames[k].step_iou = Some(iou(&warped, &region.masks[k]).expect("same dims"));
        }
        manifest.tracks.push(track);
    }
    manifest.audit.push(AuditEvent {
        timestamp: timestamp.into(),
        actor: "synth".into(),
        action: AuditAction::Created,
        payload: serde_json::json!({ "tracks": manifest.tracks.len(), "ground_truth": true }),
    });
    manifest
}

/// Generates a synthetic clip and writes frames, label maps, exact flows,
/// the ground-truth manifest and `clip.json` into `dir`.
pub fn write_synthetic_clip(
    dir: impl AsRef<Path>,
    clip_id: &str,
    params: &SceneParams,
    timestamp: &str,
) -> Result<(ClipInfo, SyntheticScene), StoreError> {
    let dir = dir.as_ref();
    let scene = generate_clip(params).map_err(|e| StoreError::schema("params", e.to_string()))?;
    fs::create_dir_all(dir).map_err(|e| StoreError::io(dir, e))?;
    let dims = scene.dims();
    let mut frames = Vec::with_capacity(scene.frame_count());
    for t in 1..=scene.frame_count() {
        let labels = scene.label_map(t);
        let name = format!("frame_{t:04}.pgm");
        let gray: Vec<u8> = labels.iter().map(|&l| intensity(l)).collect();
        write_pgm(&dir.join(&name), dims, &gray)?;
        write_pgm(&dir.join(format!("labels_{t:04}.pgm")), dims, labels)?;
        if t < scene.frame_count() {
            let path = dir.join(FlowDir::file_name(t));
            write_flow(&scene.exact_flow(t).expect("in range"), &path)?;
        }
        frames.push(name);
    }
    let gt = ground_truth_manifest(&scene, clip_id, frames.clone(), timestamp);
    super::save_manifest(&gt, dir.join(GT_MANIFEST))?;
    let info = ClipInfo { clip_id: clip_id.into(), dims, frames, synthetic: Some(*params) };
    let path = dir.join(CLIP_FILE);
    let json = serde_json::to_string_pretty(&info).expect("clip info serialisation cannot fail");
    fs::write(&path, json + "\n").map_err(|e| StoreError::io(&path, e))?;
    Ok((info, scene))
}
