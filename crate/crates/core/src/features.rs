//! Block-max feature extraction over filter response magnitudes.
//!
//! Each magnitude image is tiled with non-overlapping `block`×`block` squares
//! (trailing partial rows and columns are discarded). A block's feature is
//! its maximum response, floored at the image's global mean so weakly
//! responding blocks carry the overall activation level instead of noise.
//! All block features across all filters are concatenated into one vector.

use crate::error::{Error, Result};
use crate::gabor::MagnitudeImage;
use crate::util::compensated_sum;

/// Feature stage settings.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureParams {
    /// Block side length in pixels; must satisfy `1 <= block < min(W, H)`.
    pub block: usize,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams { block: 7 }
    }
}

/// Concatenated feature vector, remembering how it was assembled.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    /// Number of magnitude images the vector was built from.
    pub num_fields: usize,
    /// Number of block features contributed by each image.
    pub blocks_per_field: usize,
}

/// Mean of all samples, using compensated summation so the result does not
/// drift on large images.
pub fn global_mean(m: &MagnitudeImage) -> f64 {
    debug_assert!(!m.values.is_empty());
    compensated_sum(m.values.iter().copied()) / m.values.len() as f64
}

fn check_block(block: usize, width: usize, height: usize) -> Result<()> {
    if block == 0 || block >= width.min(height) {
        return Err(Error::Feature {
            reason: format!(
                "block size must satisfy 1 <= block < min(width, height) = {}, got {block}",
                width.min(height)
            ),
        });
    }
    Ok(())
}

/// Block features of one magnitude image, in row-major block order.
/// Output length is `(W / block) · (H / block)` (integer division).
pub fn block_features(m: &MagnitudeImage, block: usize) -> Result<Vec<f64>> {
    check_block(block, m.width, m.height)?;
    let mean = global_mean(m);
    let blocks_x = m.width / block;
    let blocks_y = m.height / block;
    let mut out = Vec::with_capacity(blocks_x * blocks_y);
    for by in 0..blocks_y {
        for bx in 0..blocks_x {
            let mut peak = f64::NEG_INFINITY;
            for y in by * block..(by + 1) * block {
                for x in bx * block..(bx + 1) * block {
                    peak = peak.max(m.values[y * m.width + x]);
                }
            }
            out.push(peak.max(mean));
        }
    }
    Ok(out)
}

/// Concatenates the block features of every magnitude image, in input order.
/// All images must share the same dimensions.
pub fn stack_features(mags: &[MagnitudeImage], block: usize) -> Result<FeatureVector> {
    let first = mags.first().ok_or_else(|| Error::Feature {
        reason: "no magnitude images to extract features from".into(),
    })?;
    check_block(block, first.width, first.height)?;
    let blocks_per_field = (first.width / block) * (first.height / block);
    let mut values = Vec::with_capacity(mags.len() * blocks_per_field);
    for m in mags {
        if m.width != first.width || m.height != first.height {
            return Err(Error::Feature {
                reason: format!(
                    "magnitude images disagree on size: {}x{} vs {}x{}",
                    first.width, first.height, m.width, m.height
                ),
            });
        }
        values.extend(block_features(m, block)?);
    }
    Ok(FeatureVector {
        values,
        num_fields: mags.len(),
        blocks_per_field,
    })
}
