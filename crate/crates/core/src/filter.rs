//! Separable Gaussian smoothing on raw grids.
//!
//! Borders renormalize the clipped kernel so constants are preserved.

use alloc::vec;
use alloc::vec::Vec;

use crate::volume::Volume;

/// Discrete Gaussian kernel; radius 3 sigma.
fn kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = libm::ceil(3.0 * sigma) as usize;
    let mut w = Vec::with_capacity(2 * radius + 1);
    let inv = 1.0 / (2.0 * sigma * sigma);
    for i in -(radius as i64)..=(radius as i64) {
        w.push(libm::exp(-(i * i) as f64 * inv));
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

/// Smooth a scalar grid along all three axes with per-axis sigma in voxels.
pub fn smooth_grid(data: &[f32], dims: [usize; 3], sigma: [f64; 3]) -> Vec<f32> {
    let mut cur = data.to_vec();
    for axis in 0..3 {
        if sigma[axis] <= 0.0 {
            continue;
        }
        cur = smooth_axis(&cur, dims, axis, &kernel(sigma[axis]));
    }
    cur
}

fn smooth_axis(data: &[f32], dims: [usize; 3], axis: usize, k: &[f64]) -> Vec<f32> {
    let radius = (k.len() / 2) as i64;
    let n = dims[axis] as i64;
    let strides = [1usize, dims[0], dims[0] * dims[1]];
    let stride = strides[axis] as i64;
    let mut out = vec![0.0f32; data.len()];

    // Iterate over all lines along `axis`. The kernel sums to one, so only
    // clipped border windows need renormalizing.
    let (a1, a2) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    for c2 in 0..dims[a2] {
        for c1 in 0..dims[a1] {
            let base = (c1 * strides[a1] + c2 * strides[a2]) as i64;
            let interior_end = (n - radius).max(radius);
            for p in 0..n {
                let idx = (base + p * stride) as usize;
                if p >= radius && p < interior_end {
                    let mut acc = 0.0f64;
                    let start = (base + (p - radius) * stride) as usize;
                    for (o, &w) in k.iter().enumerate() {
                        acc += w * data[start + o * stride as usize] as f64;
                    }
                    out[idx] = acc as f32;
                } else {
                    let lo = (-radius).max(-p);
                    let hi = radius.min(n - 1 - p);
                    let mut acc = 0.0f64;
                    let mut wsum = 0.0f64;
                    for o in lo..=hi {
                        let w = k[(o + radius) as usize];
                        acc += w * data[(base + (p + o) * stride) as usize] as f64;
                        wsum += w;
                    }
                    out[idx] = (acc / wsum) as f32;
                }
            }
        }
    }
    out
}

pub fn smooth_volume(v: &Volume, sigma_voxels: [f64; 3]) -> Volume {
    let data = smooth_grid(v.data(), v.dims(), sigma_voxels);
    Volume::new(v.geom().clone(), data).expect("same length")
}
