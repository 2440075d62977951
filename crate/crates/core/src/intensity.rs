//! Intensity normalization.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::volume::{Mask, Volume};

const RANGE_EPS: f64 = 1e-12;

/// Nearest-rank percentile over all voxels: 1-based rank `ceil(q * N)`.
pub fn nearest_rank_percentile(sorted: &[f32], q: f64) -> f32 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    let rank = libm::ceil(q * n as f64) as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Map intensities so the 1st percentile lands on 0 and the 99th on 1.
///
/// Percentiles are nearest-rank over every voxel, unmasked; the output is
/// the plain affine map with no clipping, so values outside [0, 1] survive.
pub fn percentile_normalize(v: &Volume) -> Result<Volume> {
    let mut sorted: Vec<f32> = v.data().to_vec();
    sorted.sort_unstable_by(f32::total_cmp);
    let p1 = nearest_rank_percentile(&sorted, 0.01) as f64;
    let p99 = nearest_rank_percentile(&sorted, 0.99) as f64;
    if p99 - p1 < RANGE_EPS {
        return Err(Error::DegenerateIntensityRange);
    }
    affine_map(v, p1, p99 - p1)
}

/// Rescale to [0, 1] exactly: min maps to 0, max to 1.
pub fn minmax_rescale(v: &Volume) -> Result<Volume> {
    let (lo, hi) = v.min_max();
    if (hi as f64 - lo as f64) < RANGE_EPS {
        return Err(Error::DegenerateIntensityRange);
    }
    affine_map(v, lo as f64, hi as f64 - lo as f64)
}

fn affine_map(v: &Volume, offset: f64, scale: f64) -> Result<Volume> {
    let data = v
        .data()
        .iter()
        .map(|&x| ((x as f64 - offset) / scale) as f32)
        .collect();
    Volume::new(v.geom().clone(), data)
}

/// Mean intensity over mask-foreground voxels.
pub fn mean_in_mask(v: &Volume, m: &Mask) -> Result<f64> {
    if !v.geom().compatible(m.geom()) {
        return Err(Error::GeometryMismatch);
    }
    let mut sum = 0.0f64;
    let mut n = 0usize;
    for (x, &inside) in v.data().iter().zip(m.data()) {
        if inside != 0 {
            sum += *x as f64;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyBrainMask);
    }
    Ok(sum / n as f64)
}

/// Nearest-rank median over mask-foreground voxels.
pub fn median_in_mask(v: &Volume, m: &Mask) -> Result<f64> {
    if !v.geom().compatible(m.geom()) {
        return Err(Error::GeometryMismatch);
    }
    let mut inside: Vec<f32> = v
        .data()
        .iter()
        .zip(m.data())
        .filter(|(_, &b)| b != 0)
        .map(|(&x, _)| x)
        .collect();
    if inside.is_empty() {
        return Err(Error::EmptyBrainMask);
    }
    inside.sort_unstable_by(f32::total_cmp);
    Ok(nearest_rank_percentile(&inside, 0.5) as f64)
}
