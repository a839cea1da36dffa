//! Collection, curation and evaluation of multi-granularity video mask tracks.
//!
//! Tracks are seeded on the first frame from grid-prompted segmenter proposals
//! and propagated frame by frame: points sampled from the previous mask are
//! warped by optical flow, used as prompts, and the proposal that best overlaps
//! the flow-warped previous mask becomes the next mask. Tracks whose per-step
//! overlap never drops below a threshold survive curation.
//!
//! Segmenters and flow estimators are pluggable. [`synth`] provides a
//! deterministic scene generator with exact ground truth, and
//! [`segmenter::OracleSegmenter`] answers prompts from it.

pub mod flow;
pub mod mask;
pub mod metrics;
pub mod pipeline;
pub mod segmenter;
pub mod store;
pub mod synth;

pub use flow::{FlowError, FlowField, FlowProvider};
pub use mask::{BinaryMask, Dims, MaskError, Point, RleMask, SamplingStrategy};
pub use metrics::{EvalMode, EvalReport, StatsReport, TrackScore};
pub use pipeline::{MaskTrack, PipelineConfig, PipelineError, TrackStatus};
pub use segmenter::{CandidateMask, FrameRef, PointPrompt, PromptLabel, SegmentError, Segmenter};
pub use store::{ClipInfo, ClipManifest, StoreError};
pub use synth::{SceneParams, SyntheticScene};
