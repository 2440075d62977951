//! Quality-thresholded voxelwise lesion-burden maps in general-atlas space.

use alloc::vec;

use crate::error::{Error, Result};
use crate::mar::MarResult;
use crate::register::warp_mask_field;
use crate::volume::{Mask, Volume};

/// Average lesion frequency over the subjects whose registration quality
/// cleared the threshold.
#[derive(Debug, Clone)]
pub struct BurdenMap {
    /// Voxelwise mean of the included masks; values in [0, 1].
    pub map: Volume,
    pub n_included: usize,
    pub threshold: f64,
    /// Set when no subject cleared the threshold (the map is all zeros).
    pub no_subjects: bool,
}

/// Warp a subject-space lesion mask into general-atlas space through the
/// subject's composed route, nearest-neighbour.
pub fn warp_wmh(wmh: &Mask, r: &MarResult) -> Result<Mask> {
    if !wmh.geom().compatible(r.final_inverse.geom()) {
        return Err(Error::GeometryMismatch);
    }
    Ok(warp_mask_field(wmh, &r.final_forward))
}

/// Inclusion rule: quality strictly above the threshold, except at T = 0
/// where every nonnegative quality passes.
pub fn includes(q: f64, threshold: f64) -> bool {
    if threshold <= 0.0 {
        q >= threshold
    } else {
        q > threshold
    }
}

/// Voxelwise mean of the masks whose quality passes the threshold. All
/// masks must share the general-atlas geometry.
pub fn build_burden_map(entries: &[(Mask, f64)], threshold: f64) -> Result<BurdenMap> {
    let first = entries.first().map(|(m, _)| m).ok_or(Error::EmptyList)?;
    let geom = first.geom().clone();
    let mut acc = vec![0.0f64; geom.len()];
    let mut n_included = 0usize;
    for (mask, q) in entries {
        if !mask.geom().compatible(&geom) {
            return Err(Error::GeometryMismatch);
        }
        if !includes(*q, threshold) {
            continue;
        }
        n_included += 1;
        for (a, &v) in acc.iter_mut().zip(mask.data()) {
            *a += v as f64;
        }
    }
    let map = if n_included == 0 {
        Volume::filled(geom, 0.0)
    } else {
        let data = acc.iter().map(|&a| (a / n_included as f64) as f32).collect();
        Volume::new(geom, data)?
    };
    Ok(BurdenMap { map, n_included, threshold, no_subjects: n_included == 0 })
}

/// Mean absolute voxelwise difference against a reference map.
pub fn map_error(m: &BurdenMap, reference: &Volume) -> Result<f64> {
    if !m.map.geom().compatible(reference.geom()) {
        return Err(Error::GeometryMismatch);
    }
    let n = reference.geom().len() as f64;
    let sum: f64 = m
        .map
        .data()
        .iter()
        .zip(reference.data())
        .map(|(&a, &b)| (a as f64 - b as f64).abs())
        .sum();
    Ok(sum / n)
}
