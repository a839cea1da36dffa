//! Dense binary masks and the geometry the pipeline needs on them.

mod boundary;
mod rle;
mod sample;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use boundary::{boundary_extract, boundary_f_score, default_boundary_tolerance};
pub use rle::{rle_decode, rle_encode, RleMask};
pub use sample::{grid_points, kmeans_points, sample_points, sample_points_with, SamplingStrategy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaskError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: Dims, found: Dims },
    #[error("malformed rle: zero-length run at index {index}")]
    MalformedRle { index: usize },
    #[error("mask is empty")]
    EmptyMask,
    #[error("invalid mask dimensions {0}")]
    InvalidDims(Dims),
}

impl MaskError {
    pub fn code(&self) -> &'static str {
        match self {
            MaskError::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
            MaskError::MalformedRle { .. } => "MALFORMED_RLE",
            MaskError::EmptyMask => "EMPTY_MASK",
            MaskError::InvalidDims(_) => "DIMENSION_MISMATCH",
        }
    }
}

/// Image dimensions in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub height: usize,
    pub width: usize,
}

impl Dims {
    pub const fn new(height: usize, width: usize) -> Self {
        Self { height, width }
    }

    pub const fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn is_valid(&self) -> bool {
        self.height >= 1 && self.width >= 1
    }

    pub fn ensure_same(&self, other: Dims) -> Result<(), MaskError> {
        if *self == other {
            Ok(())
        } else {
            Err(MaskError::DimensionMismatch { expected: *self, found: other })
        }
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

/// A point in image coordinates: `x` is the column, `y` the row. Pixel
/// centers sit on integer coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn clamped(self, dims: Dims) -> Point {
        Point {
            x: clamp_coord(self.x, dims.width),
            y: clamp_coord(self.y, dims.height),
        }
    }

    /// Nearest pixel `(col, row)` after clamping into the image. Halves round
    /// away from zero.
    pub fn pixel(self, dims: Dims) -> (usize, usize) {
        let p = self.clamped(dims);
        (p.x.round() as usize, p.y.round() as usize)
    }
}

fn clamp_coord(v: f64, extent: usize) -> f64 {
    let max = (extent - 1) as f64;
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, max)
    }
}

/// Row-major boolean bitmap; `true` is foreground.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    dims: Dims,
    bits: Vec<bool>,
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "BinaryMask {} area={}", self.dims, self.area())?;
        if self.dims.pixels() <= 32 * 32 {
            for row in self.bits.chunks(self.dims.width) {
                let line: String = row.iter().map(|&b| if b { '#' } else { '.' }).collect();
                writeln!(f, "  {line}")?;
            }
        }
        Ok(())
    }
}

impl BinaryMask {
    pub fn empty(dims: Dims) -> Self {
        assert!(dims.is_valid(), "mask dimensions must be at least 1x1");
        Self { dims, bits: vec![false; dims.pixels()] }
    }

    pub fn full(dims: Dims) -> Self {
        assert!(dims.is_valid(), "mask dimensions must be at least 1x1");
        Self { dims, bits: vec![true; dims.pixels()] }
    }

    pub fn from_bits(dims: Dims, bits: Vec<bool>) -> Result<Self, MaskError> {
        if !dims.is_valid() {
            return Err(MaskError::InvalidDims(dims));
        }
        if bits.len() != dims.pixels() {
            return Err(MaskError::DimensionMismatch {
                expected: dims,
                found: Dims::new(1, bits.len()),
            });
        }
        Ok(Self { dims, bits })
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut mask = Self::empty(dims);
        for y in 0..dims.height {
            for x in 0..dims.width {
                mask.bits[y * dims.width + x] = f(x, y);
            }
        }
        mask
    }

    /// Builds a mask from `(x, y)` pixel coordinates; out-of-bounds entries
    /// are ignored.
    pub fn from_pixels(dims: Dims, pixels: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut mask = Self::empty(dims);
        for (x, y) in pixels {
            if x < dims.width && y < dims.height {
                mask.set(x, y, true);
            }
        }
        mask
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn height(&self) -> usize {
        self.dims.height
    }

    pub fn width(&self) -> usize {
        self.dims.width
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.dims.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        let w = self.dims.width;
        self.bits[y * w + x] = value;
    }

    pub fn area(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Foreground pixels as `(x, y)` in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.dims.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask, MaskError> {
        self.dims.ensure_same(other.dims)?;
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect();
        Ok(BinaryMask { dims: self.dims, bits })
    }

    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask, MaskError> {
        self.dims.ensure_same(other.dims)?;
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect();
        Ok(BinaryMask { dims: self.dims, bits })
    }

    pub fn complement(&self) -> BinaryMask {
        BinaryMask { dims: self.dims, bits: self.bits.iter().map(|b| !b).collect() }
    }

    pub fn overlaps(&self, other: &BinaryMask) -> Result<bool, MaskError> {
        self.dims.ensure_same(other.dims)?;
        Ok(self.bits.iter().zip(&other.bits).any(|(a, b)| *a && *b))
    }

    pub fn to_rle(&self) -> RleMask {
        rle_encode(self)
    }
}

/// Intersection over union. Two empty masks score 1.0.
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64, MaskError> {
    a.dims.ensure_same(b.dims)?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &q) in a.bits.iter().zip(&b.bits) {
        inter += (p && q) as usize;
        union += (p || q) as usize;
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square(dims: Dims, x0: usize, y0: usize, w: usize, h: usize) -> BinaryMask {
        BinaryMask::from_fn(dims, |x, y| x >= x0 && x < x0 + w && y >= y0 && y < y0 + h)
    }

    #[test]
    fn iou_identity_disjoint_and_strip() {
        let d = Dims::new(6, 6);
        let a = square(d, 1, 1, 2, 2);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        let b = square(d, 4, 4, 2, 2);
        assert_eq!(iou(&a, &b).unwrap(), 0.0);
        // overlap on a 1x2 strip
        let c = square(d, 2, 1, 2, 2);
        assert_eq!(iou(&a, &c).unwrap(), 2.0 / 6.0);
    }

    #[test]
    fn iou_empty_conventions() {
        let d = Dims::new(3, 3);
        let e = BinaryMask::empty(d);
        assert_eq!(iou(&e, &e).unwrap(), 1.0);
        assert_eq!(iou(&e, &square(d, 0, 0, 1, 1)).unwrap(), 0.0);
    }

    #[test]
    fn iou_rejects_mismatched_dims() {
        let a = BinaryMask::empty(Dims::new(2, 3));
        let b = BinaryMask::empty(Dims::new(3, 2));
        let err = iou(&a, &b).unwrap_err();
        assert_eq!(err.code(), "DIMENSION_MISMATCH");
    }

    #[test]
    fn point_rounding_and_clamping() {
        let d = Dims::new(4, 10);
        assert_eq!(Point::new(2.5, 1.5).pixel(d), (3, 2));
        assert_eq!(Point::new(-3.0, 9.0).pixel(d), (0, 3));
        assert_eq!(Point::new(100.0, 0.49).pixel(d), (9, 0));
    }

    fn arb_pair() -> impl Strategy<Value = (BinaryMask, BinaryMask)> {
        (1usize..12, 1usize..12).prop_flat_map(|(h, w)| {
            let n = h * w;
            (proptest::collection::vec(any::<bool>(), n), proptest::collection::vec(any::<bool>(), n))
                .prop_map(move |(a, b)| {
                    let d = Dims::new(h, w);
                    (BinaryMask::from_bits(d, a).unwrap(), BinaryMask::from_bits(d, b).unwrap())
                })
        })
    }

    proptest! {
        #[test]
        fn iou_is_symmetric_and_bounded((a, b) in arb_pair()) {
            let ab = iou(&a, &b).unwrap();
            prop_assert_eq!(ab, iou(&b, &a).unwrap());
            prop_assert!((0.0..=1.0).contains(&ab));
            if !a.is_empty() {
                prop_assert_eq!(iou(&a, &a).unwrap(), 1.0);
            }
        }

        #[test]
        fn growing_equal_masks_keeps_identity((a, _b) in arb_pair(), px in any::<prop::sample::Index>()) {
            let mut grown = a.clone();
            let i = px.index(a.dims().pixels());
            let (x, y) = (i % a.width(), i / a.width());
            grown.set(x, y, true);
            let twin = grown.clone();
            prop_assert_eq!(iou(&grown, &twin).unwrap(), 1.0);
        }
    }
}
