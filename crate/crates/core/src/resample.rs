//! Grid resizing and slice padding.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::volume::{InterpMode, Volume};

/// Resize to `target_dims`, preserving the physical extent of the grid.
///
/// Output voxel centres map back into the source via
/// `src = (out + 0.5) * dims/target - 0.5`; out-of-range samples take the
/// edge-clamped value.
pub fn resample(v: &Volume, target_dims: [usize; 3], mode: InterpMode) -> Volume {
    assert!(target_dims.iter().all(|&d| d > 0), "target dims must be positive");
    let src = v.geom();
    let ratio = [
        src.dims[0] as f64 / target_dims[0] as f64,
        src.dims[1] as f64 / target_dims[1] as f64,
        src.dims[2] as f64 / target_dims[2] as f64,
    ];

    let mut geom = src.clone();
    geom.dims = target_dims;
    for a in 0..3 {
        geom.spacing[a] = (src.spacing[a] as f64 * ratio[a]) as f32;
    }
    // Keep the world position of each output centre consistent with the
    // source mapping: shift the origin by half the ratio offset.
    let m = src.mapper();
    let shifted = m.index_to_world([
        0.5 * (ratio[0] - 1.0),
        0.5 * (ratio[1] - 1.0),
        0.5 * (ratio[2] - 1.0),
    ]);
    geom.origin = [shifted[0] as f32, shifted[1] as f32, shifted[2] as f32];

    let mut data = Vec::with_capacity(geom.len());
    for k in 0..target_dims[2] {
        let sz = (k as f64 + 0.5) * ratio[2] - 0.5;
        for j in 0..target_dims[1] {
            let sy = (j as f64 + 0.5) * ratio[1] - 0.5;
            for i in 0..target_dims[0] {
                let sx = (i as f64 + 0.5) * ratio[0] - 0.5;
                data.push(v.sample_index([sx, sy, sz], mode));
            }
        }
    }
    Volume::new(geom, data).expect("length matches target dims")
}

/// Zero-pad in z to `target_z` slices, split evenly with the extra slice on
/// top; the origin shifts so existing voxels keep their world coordinates.
pub fn pad_slices(v: &Volume, target_z: usize) -> Result<Volume> {
    let dims = v.dims();
    if target_z < dims[2] {
        return Err(Error::TargetSmallerThanSource);
    }
    if target_z == dims[2] {
        return Ok(v.clone());
    }
    let below = (target_z - dims[2]) / 2;

    let mut geom = v.geom().clone();
    geom.dims[2] = target_z;
    let shifted = v.geom().mapper().index_to_world([0.0, 0.0, -(below as f64)]);
    geom.origin = [shifted[0] as f32, shifted[1] as f32, shifted[2] as f32];

    let slice_len = dims[0] * dims[1];
    let mut data = alloc::vec![0.0f32; slice_len * target_z];
    data[below * slice_len..(below + dims[2]) * slice_len].copy_from_slice(v.data());
    Volume::new(geom, data)
}
