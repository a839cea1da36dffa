use serde::{Deserialize, Serialize};

use super::{BinaryMask, Dims, MaskError};

/// Row-major run-length encoding. Runs alternate background/foreground and
/// always start with a background run, which may be empty.
///
/// JSON form: `{"size":[H,W],"counts":[...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RleMask {
    pub size: [u32; 2],
    pub counts: Vec<u32>,
}

impl RleMask {
    pub fn dims(&self) -> Dims {
        Dims::new(self.size[0] as usize, self.size[1] as usize)
    }

    /// Foreground area without decoding.
    pub fn area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).map(|&c| c as u64).sum()
    }

    pub fn validate(&self) -> Result<(), MaskError> {
        let dims = self.dims();
        if !dims.is_valid() {
            return Err(MaskError::InvalidDims(dims));
        }
        if let Some(index) = self.counts.iter().skip(1).position(|&c| c == 0) {
            return Err(MaskError::MalformedRle { index: index + 1 });
        }
        let total: u64 = self.counts.iter().map(|&c| c as u64).sum();
        if total != dims.pixels() as u64 {
            return Err(MaskError::DimensionMismatch {
                expected: dims,
                found: Dims::new(1, total as usize),
            });
        }
        Ok(())
    }

    pub fn decode(&self) -> Result<BinaryMask, MaskError> {
        rle_decode(self)
    }
}

pub fn rle_encode(mask: &BinaryMask) -> RleMask {
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u32;
    for &bit in mask.bits() {
        if bit != current {
            counts.push(run);
            run = 0;
            current = bit;
        }
        run += 1;
    }
    counts.push(run);
    RleMask { size: [mask.height() as u32, mask.width() as u32], counts }
}

pub fn rle_decode(rle: &RleMask) -> Result<BinaryMask, MaskError> {
    rle.validate()?;
    let dims = rle.dims();
    let mut bits = Vec::with_capacity(dims.pixels());
    for (i, &count) in rle.counts.iter().enumerate() {
        bits.extend(std::iter::repeat_n(i % 2 == 1, count as usize));
    }
    BinaryMask::from_bits(dims, bits)
}
