//! Multi-resolution pyramid support shared by both registration stages.

use alloc::vec::Vec;

use crate::filter::smooth_volume;
use crate::geometry::Geometry;
use crate::resample::resample;
use crate::volume::{InterpMode, Volume};

/// Smooth-then-subsample by an integer factor; factor 1 is the original.
pub(super) fn pyramid_level(v: &Volume, factor: usize) -> Volume {
    if factor <= 1 {
        return v.clone();
    }
    let sigma = 0.5 * factor as f64;
    let smoothed = smooth_volume(v, [sigma; 3]);
    let dims = v.dims();
    let target = [
        (dims[0] / factor).max(1),
        (dims[1] / factor).max(1),
        (dims[2] / factor).max(1),
    ];
    resample(&smoothed, target, InterpMode::Linear)
}

/// Coarse-to-fine subsampling factors. The deformable stage runs down to
/// full resolution; the affine stage stops one level short (the deformable
/// stage consumes the remaining alignment) unless only one level is asked.
pub(super) fn scale_schedule(levels: usize, include_finest: bool) -> Vec<usize> {
    let levels = levels.max(1);
    let mut s: Vec<usize> = (0..levels).rev().map(|l| 1usize << l).collect();
    if !include_finest && s.len() > 1 {
        s.pop();
    }
    s
}

/// Central-difference gradients per axis in index units, as volumes on the
/// same grid.
pub(super) fn gradient_volumes(v: &Volume) -> [Volume; 3] {
    let dims = v.dims();
    let geom = v.geom().clone();
    let mut out = [
        Volume::filled(geom.clone(), 0.0),
        Volume::filled(geom.clone(), 0.0),
        Volume::filled(geom, 0.0),
    ];
    for axis in 0..3 {
        let data = out[axis].data_mut();
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let c = [i, j, k];
                    let mut hi = c;
                    let mut lo = c;
                    hi[axis] = (c[axis] + 1).min(dims[axis] - 1);
                    lo[axis] = c[axis].saturating_sub(1);
                    let denom = (hi[axis] - lo[axis]).max(1) as f32;
                    let d = (v.at(hi[0], hi[1], hi[2]) - v.at(lo[0], lo[1], lo[2])) / denom;
                    data[i + dims[0] * (j + dims[1] * k)] = d;
                }
            }
        }
    }
    out
}

/// Transpose-inverse of the index→world linear map, for converting
/// index-space gradients into world-space gradients.
pub(super) fn world_gradient_matrix(geom: &Geometry) -> [[f64; 3]; 3] {
    let mut a = [[0.0f64; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            a[r][c] = geom.orientation[r][c] as f64 * geom.spacing[c] as f64;
        }
    }
    let inv = crate::geometry::invert3(&a).expect("valid geometry");
    let mut t = [[0.0f64; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            t[r][c] = inv[c][r];
        }
    }
    t
}

#[inline]
pub(super) fn mat3_mul(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}
