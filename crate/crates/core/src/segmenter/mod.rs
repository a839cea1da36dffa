//! Promptable segmenters: the request/response contract, the ground-truth
//! oracle and a client for remote segmentation servers.

mod oracle;
mod remote;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mask::{BinaryMask, Dims, Point};
use crate::synth::SyntheticScene;

pub use oracle::{oracle_segment, OracleSegmenter};
#[cfg(feature = "remote")]
pub use remote::UreqTransport;
pub use remote::{
    decode_response, encode_request, HttpResponse, RemoteConfig, RemoteSegmenter, Transport, TransportError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SegmentError {
    #[error("segmenter found no candidate")]
    NoCandidate,
    #[error("segmenter backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("segmenter protocol error: {0}")]
    Protocol(String),
    #[error("invalid segment request: {0}")]
    InvalidRequest(String),
}

impl SegmentError {
    pub fn code(&self) -> &'static str {
        match self {
            SegmentError::NoCandidate => "NO_CANDIDATE",
            SegmentError::BackendUnavailable(_) => "BACKEND_UNAVAILABLE",
            SegmentError::Protocol(_) => "PROTOCOL_ERROR",
            SegmentError::InvalidRequest(_) => "INVALID_REQUEST",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PromptLabel {
    #[serde(rename = "pos")]
    Positive,
    #[serde(rename = "neg")]
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointPrompt {
    #[serde(flatten)]
    pub point: Point,
    pub label: PromptLabel,
}

impl PointPrompt {
    pub fn positive(point: Point) -> Self {
        Self { point, label: PromptLabel::Positive }
    }

    pub fn negative(point: Point) -> Self {
        Self { point, label: PromptLabel::Negative }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateMask {
    pub mask: BinaryMask,
    pub predicted_iou: f64,
    pub stability: f64,
}

/// Identifies a frame for a segmenter. `index` is 1-based; `reference` is
/// the opaque string sent to remote servers (usually a path).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameRef {
    pub index: usize,
    pub reference: String,
    pub dims: Dims,
}

impl FrameRef {
    pub fn new(index: usize, reference: impl Into<String>, dims: Dims) -> Self {
        Self { index, reference: reference.into(), dims }
    }
}

pub trait Segmenter: Send + Sync {
    /// Raw proposals from the backend, in backend order.
    fn propose(
        &self,
        frame: &FrameRef,
        prompts: &[PointPrompt],
        max_candidates: usize,
    ) -> Result<Vec<CandidateMask>, SegmentError>;
}

impl<S: Segmenter + ?Sized> Segmenter for Arc<S> {
    fn propose(&self, frame: &FrameRef, prompts: &[PointPrompt], max: usize) -> Result<Vec<CandidateMask>, SegmentError> {
        (**self).propose(frame, prompts, max)
    }
}

impl<S: Segmenter + ?Sized> Segmenter for &S {
    fn propose(&self, frame: &FrameRef, prompts: &[PointPrompt], max: usize) -> Result<Vec<CandidateMask>, SegmentError> {
        (**self).propose(frame, prompts, max)
    }
}

/// Runs a segmenter and normalises its answer: at most `max_candidates`
/// masks of the frame's size, ordered by predicted IoU, then stability,
/// then area (all descending), keeping backend order among exact ties.
pub fn segment<S: Segmenter + ?Sized>(
    seg: &S,
    frame: &FrameRef,
    prompts: &[PointPrompt],
    max_candidates: usize,
) -> Result<Vec<CandidateMask>, SegmentError> {
    if max_candidates == 0 {
        return Err(SegmentError::InvalidRequest("max_candidates must be at least 1".into()));
    }
    if !prompts.iter().any(|p| p.label == PromptLabel::Positive) {
        return Err(SegmentError::InvalidRequest("at least one positive prompt is required".into()));
    }
    let mut candidates = seg.propose(frame, prompts, max_candidates)?;
    if let Some(bad) = candidates.iter().find(|c| c.mask.dims() != frame.dims) {
        return Err(SegmentError::Protocol(format!(
            "candidate mask is {}, frame is {}",
            bad.mask.dims(),
            frame.dims
        )));
    }
    sort_candidates(&mut candidates);
    candidates.truncate(max_candidates);
    if candidates.is_empty() {
        return Err(SegmentError::NoCandidate);
    }
    Ok(candidates)
}

pub fn sort_candidates(candidates: &mut [CandidateMask]) {
    candidates.sort_by(|a, b| {
        b.predicted_iou
            .total_cmp(&a.predicted_iou)
            .then(b.stability.total_cmp(&a.stability))
            .then(b.mask.area().cmp(&a.mask.area()))
    });
}

/// Backend selection.
pub enum SegmenterRef {
    Oracle(OracleSegmenter),
    Remote(RemoteSegmenter),
}

impl SegmenterRef {
    pub fn oracle(scene: Arc<SyntheticScene>) -> Self {
        SegmenterRef::Oracle(OracleSegmenter::new(scene))
    }
}

impl Segmenter for SegmenterRef {
    fn propose(&self, frame: &FrameRef, prompts: &[PointPrompt], max: usize) -> Result<Vec<CandidateMask>, SegmentError> {
        match self {
            SegmenterRef::Oracle(s) => s.propose(frame, prompts, max),
            SegmenterRef::Remote(s) => s.propose(frame, prompts, max),
        }
    }
}
