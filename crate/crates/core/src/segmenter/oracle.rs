use std::sync::Arc;

use super::{CandidateMask, FrameRef, PointPrompt, PromptLabel, SegmentError, Segmenter};
use crate::synth::SyntheticScene;

/// Answers prompts from a synthetic scene's ground truth.
#[derive(Debug, Clone)]
pub struct OracleSegmenter {
    scene: Arc<SyntheticScene>,
}

impl OracleSegmenter {
    pub fn new(scene: Arc<SyntheticScene>) -> Self {
        Self { scene }
    }

    pub fn scene(&self) -> &SyntheticScene {
        &self.scene
    }
}

impl Segmenter for OracleSegmenter {
    fn propose(&self, frame: &FrameRef, prompts: &[PointPrompt], max: usize) -> Result<Vec<CandidateMask>, SegmentError> {
        oracle_segment(&self.scene, frame.index, prompts, max)
    }
}

/// Every region of the frame (background, wholes, parts) that contains all
/// positive prompts and none of the negatives, smallest area first, with
/// perfect scores.
pub fn oracle_segment(
    scene: &SyntheticScene,
    frame_index: usize,
    prompts: &[PointPrompt],
    max_candidates: usize,
) -> Result<Vec<CandidateMask>, SegmentError> {
    if frame_index == 0 || frame_index > scene.frame_count() {
        return Err(SegmentError::InvalidRequest(format!(
            "frame {frame_index} outside 1..={}",
            scene.frame_count()
        )));
    }
    let dims = scene.dims();
    let pixels: Vec<_> = prompts.iter().map(|p| (p.point.pixel(dims), p.label)).collect();
    let mut hits: Vec<_> = scene
        .regions()
        .iter()
        .map(|r| &r.masks[frame_index - 1])
        .filter(|mask| {
            pixels.iter().all(|&((x, y), label)| match label {
                PromptLabel::Positive => mask.get(x, y),
                PromptLabel::Negative => !mask.get(x, y),
            })
        })
        .filter(|mask| !mask.is_empty())
        .collect();
    if hits.is_empty() {
        return Err(SegmentError::NoCandidate);
    }
    hits.sort_by_key(|m| m.area());
    hits.truncate(max_candidates);
    Ok(hits
        .into_iter()
        .map(|mask| CandidateMask { mask: mask.clone(), predicted_iou: 1.0, stability: 1.0 })
        .collect())
}
