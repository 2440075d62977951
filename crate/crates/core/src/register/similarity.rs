//! Image similarity measures.

use crate::error::{Error, Result};
use crate::intensity::minmax_rescale;
use crate::volume::Volume;

/// Zero-mean normalized cross-correlation of two volumes after each is
/// rescaled to [0, 1]; the result lies in [-1, 1].
pub fn cc_similarity(a: &Volume, b: &Volume) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::DimMismatch);
    }
    let ra = minmax_rescale(a)?;
    let rb = minmax_rescale(b)?;
    ncc(ra.data(), rb.data()).ok_or(Error::DegenerateIntensityRange)
}

/// Plain normalized cross-correlation on raw samples; `None` when either
/// input has no variance.
pub(crate) fn ncc(a: &[f32], b: &[f32]) -> Option<f64> {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let mean_a = a.iter().map(|&v| v as f64).sum::<f64>() / n;
    let mean_b = b.iter().map(|&v| v as f64).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let dx = x as f64 - mean_a;
        let dy = y as f64 - mean_b;
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a <= 0.0 || var_b <= 0.0 {
        return None;
    }
    Some(cov / libm::sqrt(var_a * var_b))
}

pub(crate) fn mean_squared_diff(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let d = x as f64 - y as f64;
        s += d * d;
    }
    s / a.len() as f64
}

pub(crate) fn variance(a: &[f32]) -> f64 {
    let n = a.len() as f64;
    let mean = a.iter().map(|&v| v as f64).sum::<f64>() / n;
    a.iter().map(|&v| (v as f64 - mean) * (v as f64 - mean)).sum::<f64>() / n
}
