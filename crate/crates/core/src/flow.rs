//! Dense displacement fields, point/mask warping and the MGFL flow file.
//!
//! MGFL layout (little-endian): `b"MGFL"`, `u32` height, `u32` width, then
//! `height * width` records of `(dx: f32, dy: f32)` in row-major order.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::mask::{BinaryMask, Dims, Point};

pub const FLOW_MAGIC: &[u8; 4] = b"MGFL";
const HEADER_LEN: usize = 12;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("dimension mismatch: flow is {flow}, frame is {frame}")]
    DimensionMismatch { flow: Dims, frame: Dims },
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("truncated flow file: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: usize, found: usize },
    #[error("flow file has {0} trailing bytes")]
    TrailingBytes(usize),
    #[error("non-finite flow value at pixel {index}")]
    NonfiniteValue { index: usize },
    #[error("flow field must be at least 1x1, got {0}")]
    InvalidDims(Dims),
    #[error("no flow available for frames {from}->{to}")]
    Unavailable { from: usize, to: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl FlowError {
    pub fn code(&self) -> &'static str {
        match self {
            FlowError::DimensionMismatch { .. } | FlowError::InvalidDims(_) => "DIMENSION_MISMATCH",
            FlowError::BadMagic(_) => "BAD_MAGIC",
            FlowError::TruncatedFile { .. } => "TRUNCATED_FILE",
            FlowError::TrailingBytes(_) => "TRAILING_BYTES",
            FlowError::NonfiniteValue { .. } => "NONFINITE_VALUE",
            FlowError::Unavailable { .. } => "FLOW_UNAVAILABLE",
            FlowError::Io { .. } => "IO_ERROR",
        }
    }
}

/// Per-pixel displacement: pixel `p` of frame `t-1` moves to
/// `p + (dx[p], dy[p])` in frame `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    dims: Dims,
    dx: Vec<f32>,
    dy: Vec<f32>,
}

impl FlowField {
    pub fn new(dims: Dims, dx: Vec<f32>, dy: Vec<f32>) -> Result<Self, FlowError> {
        if !dims.is_valid() {
            return Err(FlowError::InvalidDims(dims));
        }
        let n = dims.pixels();
        if dx.len() != n || dy.len() != n {
            return Err(FlowError::DimensionMismatch {
                flow: Dims::new(1, dx.len().min(dy.len())),
                frame: dims,
            });
        }
        if let Some(index) = dx.iter().zip(&dy).position(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(FlowError::NonfiniteValue { index });
        }
        Ok(Self { dims, dx, dy })
    }

    pub fn zeros(dims: Dims) -> Self {
        Self::constant(dims, 0.0, 0.0)
    }

    pub fn constant(dims: Dims, dx: f32, dy: f32) -> Self {
        assert!(dims.is_valid() && dx.is_finite() && dy.is_finite());
        Self { dims, dx: vec![dx; dims.pixels()], dy: vec![dy; dims.pixels()] }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn at(&self, x: usize, y: usize) -> (f32, f32) {
        let i = y * self.dims.width + x;
        (self.dx[i], self.dy[i])
    }

    pub fn set(&mut self, x: usize, y: usize, dx: f32, dy: f32) {
        assert!(dx.is_finite() && dy.is_finite());
        let i = y * self.dims.width + x;
        self.dx[i] = dx;
        self.dy[i] = dy;
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.dims.pixels() * 8);
        out.extend_from_slice(FLOW_MAGIC);
        out.extend_from_slice(&(self.dims.height as u32).to_le_bytes());
        out.extend_from_slice(&(self.dims.width as u32).to_le_bytes());
        for (dx, dy) in self.dx.iter().zip(&self.dy) {
            out.extend_from_slice(&dx.to_le_bytes());
            out.extend_from_slice(&dy.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FlowError> {
        if bytes.len() < 4 {
            return Err(FlowError::TruncatedFile { expected: HEADER_LEN, found: bytes.len() });
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if &magic != FLOW_MAGIC {
            return Err(FlowError::BadMagic(magic));
        }
        if bytes.len() < HEADER_LEN {
            return Err(FlowError::TruncatedFile { expected: HEADER_LEN, found: bytes.len() });
        }
        let read_u32 = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
        let dims = Dims::new(read_u32(4), read_u32(8));
        if !dims.is_valid() {
            return Err(FlowError::InvalidDims(dims));
        }
        let expected = dims
            .pixels()
            .checked_mul(8)
            .and_then(|p| p.checked_add(HEADER_LEN))
            .unwrap_or(usize::MAX);
        if bytes.len() < expected {
            return Err(FlowError::TruncatedFile { expected, found: bytes.len() });
        }
        if bytes.len() > expected {
            return Err(FlowError::TrailingBytes(bytes.len() - expected));
        }
        let mut dx = Vec::with_capacity(dims.pixels());
        let mut dy = Vec::with_capacity(dims.pixels());
        for rec in bytes[HEADER_LEN..].chunks_exact(8) {
            dx.push(f32::from_le_bytes(rec[..4].try_into().unwrap()));
            dy.push(f32::from_le_bytes(rec[4..].try_into().unwrap()));
        }
        Self::new(dims, dx, dy)
    }
}

pub fn read_flow(path: impl AsRef<Path>) -> Result<FlowField, FlowError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| FlowError::Io { path: path.to_owned(), source })?;
    FlowField::from_bytes(&bytes)
}

pub fn write_flow(flow: &FlowField, path: impl AsRef<Path>) -> Result<(), FlowError> {
    let path = path.as_ref();
    fs::write(path, flow.to_bytes()).map_err(|source| FlowError::Io { path: path.to_owned(), source })
}

/// Moves each point by the flow at its nearest pixel, clamping the result
/// into the frame. Order is preserved.
pub fn warp_points(points: &[Point], flow: &FlowField, frame: Dims) -> Result<Vec<Point>, FlowError> {
    if flow.dims != frame {
        return Err(FlowError::DimensionMismatch { flow: flow.dims, frame });
    }
    Ok(points
        .iter()
        .map(|p| {
            let (x, y) = p.pixel(frame);
            let (dx, dy) = flow.at(x, y);
            let clamped = p.clamped(frame);
            Point::new(clamped.x + dx as f64, clamped.y + dy as f64).clamped(frame)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WarpOptions {
    /// Apply a 3x3 morphological closing to the splatted mask.
    pub close_holes: bool,
}

/// Forward splat: every foreground pixel `p` sets `round(p + flow(p))` when
/// that lands inside the frame.
pub fn warp_mask(mask: &BinaryMask, flow: &FlowField) -> Result<BinaryMask, FlowError> {
    warp_mask_with(mask, flow, WarpOptions::default())
}

pub fn warp_mask_with(mask: &BinaryMask, flow: &FlowField, opts: WarpOptions) -> Result<BinaryMask, FlowError> {
    let dims = mask.dims();
    if flow.dims != dims {
        return Err(FlowError::DimensionMismatch { flow: flow.dims, frame: dims });
    }
    let mut out = BinaryMask::empty(dims);
    for (x, y) in mask.pixels() {
        let (dx, dy) = flow.at(x, y);
        let tx = (x as f64 + dx as f64).round();
        let ty = (y as f64 + dy as f64).round();
        if tx >= 0.0 && ty >= 0.0 && (tx as usize) < dims.width && (ty as usize) < dims.height {
            out.set(tx as usize, ty as usize, true);
        }
    }
    if opts.close_holes {
        out = close3x3(&out);
    }
    Ok(out)
}

fn close3x3(mask: &BinaryMask) -> BinaryMask {
    let dims = mask.dims();
    // dilate onto a canvas padded by one pixel so growth past the border is
    // kept for the erosion step, then erode and crop back
    let (pw, ph) = (dims.width + 2, dims.height + 2);
    let mut dilated = vec![false; pw * ph];
    for (x, y) in mask.pixels() {
        for yy in y..y + 3 {
            for xx in x..x + 3 {
                dilated[yy * pw + xx] = true;
            }
        }
    }
    BinaryMask::from_fn(dims, |x, y| (y..y + 3).all(|yy| (x..x + 3).all(|xx| dilated[yy * pw + xx])))
}

/// Source of the flow between consecutive frames. Frame indices are 1-based;
/// `flow(t)` is the field `F_{t -> t+1}`.
pub trait FlowProvider: Sync {
    fn flow(&self, from: usize) -> Result<FlowField, FlowError>;
}

impl FlowProvider for [FlowField] {
    fn flow(&self, from: usize) -> Result<FlowField, FlowError> {
        from.checked_sub(1)
            .and_then(|i| self.get(i))
            .cloned()
            .ok_or(FlowError::Unavailable { from, to: from + 1 })
    }
}

impl FlowProvider for Vec<FlowField> {
    fn flow(&self, from: usize) -> Result<FlowField, FlowError> {
        self.as_slice().flow(from)
    }
}

/// Reads `flow_{t}_{t+1}.mgfl` files from a directory.
#[derive(Debug, Clone)]
pub struct FlowDir {
    dir: PathBuf,
}

impl FlowDir {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn file_name(from: usize) -> String {
        format!("flow_{}_{}.mgfl", from, from + 1)
    }

    pub fn path(&self, from: usize) -> PathBuf {
        self.dir.join(Self::file_name(from))
    }
}

impl FlowProvider for FlowDir {
    fn flow(&self, from: usize) -> Result<FlowField, FlowError> {
        let path = self.path(from);
        if !path.is_file() {
            return Err(FlowError::Unavailable { from, to: from + 1 });
        }
        read_flow(path)
    }
}
