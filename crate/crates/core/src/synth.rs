//! Deterministic synthetic clips with exact multi-granularity ground truth.
//!
//! Shapes move by integer velocities, so the flow fields are exact and the
//! forward splat of any shape or part mask reproduces the next frame's mask
//! pixel for pixel. Every frame is described by a label map: `0` is
//! background and shape `i`, part `p` is `1 + 2 * i + p`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{FlowError, FlowField, FlowProvider};
use crate::mask::{BinaryMask, Dims};

const PLACEMENT_RETRIES: usize = 1000;
/// Label maps are 8-bit, two parts per shape.
pub const MAX_SHAPES: usize = 127;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("unsatisfiable scene parameters: {0}")]
    UnsatisfiableParams(String),
}

impl SynthError {
    pub fn code(&self) -> &'static str {
        "UNSATISFIABLE_PARAMS"
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneParams {
    pub height: usize,
    pub width: usize,
    pub frames: usize,
    pub shapes: usize,
    pub seed: u64,
}

impl SceneParams {
    pub fn dims(&self) -> Dims {
        Dims::new(self.height, self.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeKind {
    /// Split into left/right halves.
    Rectangle { w: i32, h: i32 },
    /// Split into left/right halves at the center column.
    Disk { radius: i32 },
    /// Split into top/bottom halves at the center row; the hole is background.
    Ring { outer: i32, inner: i32 },
}

/// A shape at frame 1. `anchor` is the top-left corner for rectangles and
/// the center for disks and rings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    #[serde(flatten)]
    pub kind: ShapeKind,
    pub anchor: [i32; 2],
    pub velocity: [i32; 2],
}

impl Shape {
    pub fn part_names(&self) -> [&'static str; 2] {
        match self.kind {
            ShapeKind::Rectangle { .. } | ShapeKind::Disk { .. } => ["left", "right"],
            ShapeKind::Ring { .. } => ["top", "bottom"],
        }
    }

    fn anchor_at(&self, frame: usize) -> (i32, i32) {
        let dt = frame as i32 - 1;
        (self.anchor[0] + self.velocity[0] * dt, self.anchor[1] + self.velocity[1] * dt)
    }

    /// Inclusive bounding box `(x0, y0, x1, y1)` at a 1-based frame.
    pub fn bbox(&self, frame: usize) -> (i32, i32, i32, i32) {
        let (ax, ay) = self.anchor_at(frame);
        match self.kind {
            ShapeKind::Rectangle { w, h } => (ax, ay, ax + w - 1, ay + h - 1),
            ShapeKind::Disk { radius: r } | ShapeKind::Ring { outer: r, .. } => (ax - r, ay - r, ax + r, ay + r),
        }
    }

    /// Part index covering pixel `(x, y)` at a 1-based frame, if any.
    pub fn part_at(&self, x: i32, y: i32, frame: usize) -> Option<u8> {
        let (ax, ay) = self.anchor_at(frame);
        match self.kind {
            ShapeKind::Rectangle { w, h } => {
                let inside = x >= ax && x < ax + w && y >= ay && y < ay + h;
                inside.then_some(if x < ax + w / 2 { 0 } else { 1 })
            }
            ShapeKind::Disk { radius } => {
                let d2 = (x - ax).pow(2) + (y - ay).pow(2);
                (d2 <= radius * radius).then_some(if x < ax { 0 } else { 1 })
            }
            ShapeKind::Ring { outer, inner } => {
                let d2 = (x - ax).pow(2) + (y - ay).pow(2);
                (d2 <= outer * outer && d2 > inner * inner).then_some(if y < ay { 0 } else { 1 })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Background,
    Whole,
    Part,
}

/// A ground-truth region with its mask on every frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub id: String,
    pub kind: RegionKind,
    pub masks: Vec<BinaryMask>,
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    dims: Dims,
    shapes: Vec<Shape>,
    labels: Vec<Vec<u8>>,
    regions: Vec<Region>,
}

/// Draws a random scene. Reproducible under `params.seed`.
pub fn generate_clip(params: &SceneParams) -> Result<SyntheticScene, SynthError> {
    let dims = params.dims();
    if params.frames < 2 {
        return Err(SynthError::UnsatisfiableParams(format!("need at least 2 frames, got {}", params.frames)));
    }
    if !dims.is_valid() {
        return Err(SynthError::UnsatisfiableParams(format!("invalid dimensions {dims}")));
    }
    if params.shapes > MAX_SHAPES {
        return Err(SynthError::UnsatisfiableParams(format!("at most {MAX_SHAPES} shapes")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut shapes: Vec<Shape> = Vec::with_capacity(params.shapes);
    for i in 0..params.shapes {
        let placed = (0..PLACEMENT_RETRIES).find_map(|_| {
            let candidate = random_shape(&mut rng, dims, params.frames)?;
            shapes
                .iter()
                .all(|other| separated(&candidate, other, params.frames))
                .then_some(candidate)
        });
        match placed {
            Some(shape) => shapes.push(shape),
            None => {
                return Err(SynthError::UnsatisfiableParams(format!(
                    "could not place shape {i} after {PLACEMENT_RETRIES} attempts"
                )))
            }
        }
    }
    SyntheticScene::from_shapes(dims, params.frames, shapes)
}

fn random_shape(rng: &mut ChaCha8Rng, dims: Dims, frames: usize) -> Option<Shape> {
    let m = dims.height.min(dims.width) as i32;
    let velocity = [rng.random_range(-1..=1), rng.random_range(-1..=1)];
    let kind = match rng.random_range(0..3) {
        0 => {
            let (lo, hi) = ((m / 8).max(4), (m * 7 / 32).max(4));
            ShapeKind::Rectangle { w: rng.random_range(lo..=hi), h: rng.random_range(lo..=hi) }
        }
        1 => {
            let (lo, hi) = ((m / 16).max(2), (m * 7 / 64).max(2));
            ShapeKind::Disk { radius: rng.random_range(lo..=hi) }
        }
        _ => {
            let (lo, hi) = ((m * 3 / 32).max(4), (m / 8).max(4));
            let outer = rng.random_range(lo..=hi);
            ShapeKind::Ring { outer, inner: rng.random_range(1..=(outer - 3).max(1)) }
        }
    };
    // extent relative to the anchor
    let (ext_lo, ext_hi) = match kind {
        ShapeKind::Rectangle { w, h } => ((0, 0), (w - 1, h - 1)),
        ShapeKind::Disk { radius: r } | ShapeKind::Ring { outer: r, .. } => ((-r, -r), (r, r)),
    };
    let travel = frames as i32 - 1;
    let range = |lo: i32, hi: i32, v: i32, extent: i32| {
        let min = -lo + (-v * travel).max(0);
        let max = extent - 1 - hi - (v * travel).max(0);
        (min <= max).then_some((min, max))
    };
    let (x_min, x_max) = range(ext_lo.0, ext_hi.0, velocity[0], dims.width as i32)?;
    let (y_min, y_max) = range(ext_lo.1, ext_hi.1, velocity[1], dims.height as i32)?;
    Some(Shape {
        kind,
        anchor: [rng.random_range(x_min..=x_max), rng.random_range(y_min..=y_max)],
        velocity,
    })
}

/// Bounding boxes keep at least a one-pixel gap on every frame.
fn separated(a: &Shape, b: &Shape, frames: usize) -> bool {
    (1..=frames).all(|t| {
        let (ax0, ay0, ax1, ay1) = a.bbox(t);
        let (bx0, by0, bx1, by1) = b.bbox(t);
        ax1 + 1 < bx0 || bx1 + 1 < ax0 || ay1 + 1 < by0 || by1 + 1 < ay0
    })
}

impl SyntheticScene {
    /// Builds a scene from explicit shapes. Shapes must stay inside the frame
    /// and must not overlap on any frame.
    pub fn from_shapes(dims: Dims, frames: usize, shapes: Vec<Shape>) -> Result<Self, SynthError> {
        if frames < 2 {
            return Err(SynthError::UnsatisfiableParams(format!("need at least 2 frames, got {frames}")));
        }
        if shapes.len() > MAX_SHAPES {
            return Err(SynthError::UnsatisfiableParams(format!("at most {MAX_SHAPES} shapes")));
        }
        let (w, h) = (dims.width as i32, dims.height as i32);
        let mut labels = Vec::with_capacity(frames);
        for t in 1..=frames {
            let mut map = vec![0u8; dims.pixels()];
            for (i, shape) in shapes.iter().enumerate() {
                let (x0, y0, x1, y1) = shape.bbox(t);
                if x0 < 0 || y0 < 0 || x1 >= w || y1 >= h {
                    return Err(SynthError::UnsatisfiableParams(format!("shape {i} leaves the frame at t={t}")));
                }
                for y in y0..=y1 {
                    for x in x0..=x1 {
                        if let Some(part) = shape.part_at(x, y, t) {
                            let slot = &mut map[y as usize * dims.width + x as usize];
                            if *slot != 0 {
                                return Err(SynthError::UnsatisfiableParams(format!(
                                    "shape {i} overlaps another shape at t={t}"
                                )));
                            }
                            *slot = 1 + 2 * i as u8 + part;
                        }
                    }
                }
            }
            labels.push(map);
        }

        let from_labels = |pred: &dyn Fn(u8) -> bool| -> Vec<BinaryMask> {
            labels
                .iter()
                .map(|map| BinaryMask::from_bits(dims, map.iter().map(|&l| pred(l)).collect()).unwrap())
                .collect()
        };
        let mut regions = vec![Region {
            id: "background".into(),
            kind: RegionKind::Background,
            masks: from_labels(&|l| l == 0),
        }];
        for (i, shape) in shapes.iter().enumerate() {
            let base = 1 + 2 * i as u8;
            regions.push(Region {
                id: format!("s{i}"),
                kind: RegionKind::Whole,
                masks: from_labels(&|l| l == base || l == base + 1),
            });
            for (p, name) in shape.part_names().iter().enumerate() {
                regions.push(Region {
                    id: format!("s{i}.{name}"),
                    kind: RegionKind::Part,
                    masks: from_labels(&|l| l == base + p as u8),
                });
            }
        }
        Ok(Self { dims, shapes, labels, regions })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn frame_count(&self) -> usize {
        self.labels.len()
    }

    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    /// Label map of a 1-based frame.
    pub fn label_map(&self, frame: usize) -> &[u8] {
        &self.labels[frame - 1]
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn region(&self, id: &str) -> Option<&Region> {
        self.regions.iter().find(|r| r.id == id)
    }

    /// Exact flow `F_{from -> from+1}`: shape pixels carry their velocity,
    /// background pixels do not move.
    pub fn exact_flow(&self, from: usize) -> Option<FlowField> {
        if from == 0 || from >= self.frame_count() {
            return None;
        }
        let mut flow = FlowField::zeros(self.dims);
        let map = self.label_map(from);
        for y in 0..self.dims.height {
            for x in 0..self.dims.width {
                let l = map[y * self.dims.width + x];
                if l > 0 {
                    let v = self.shapes[(l as usize - 1) / 2].velocity;
                    flow.set(x, y, v[0] as f32, v[1] as f32);
                }
            }
        }
        Some(flow)
    }
}

impl FlowProvider for SyntheticScene {
    fn flow(&self, from: usize) -> Result<FlowField, FlowError> {
        self.exact_flow(from).ok_or(FlowError::Unavailable { from, to: from + 1 })
    }
}
