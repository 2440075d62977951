//! Grid geometry: dimensions, spacing, origin and direction cosines.
//!
//! Voxel data is stored x-fastest: linear index `i + dims[0]*(j + dims[1]*k)`.
//! World coordinates are millimetres; `world = origin + R * diag(spacing) * index`
//! where column `c` of the orientation matrix `R` is the direction of voxel
//! axis `c`. Geometry fields are kept in `f32` (the width they occupy in the
//! file format) while coordinate arithmetic runs in `f64`.

use crate::error::{Error, Result};

const UNIT_NORM_TOL: f64 = 1e-6;
/// Tolerance used when deciding whether two grids describe the same space.
const COMPAT_TOL: f32 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub dims: [usize; 3],
    pub spacing: [f32; 3],
    pub origin: [f32; 3],
    /// Row-major direction-cosine matrix; `orientation[r][c]` is row r, column c.
    pub orientation: [[f32; 3]; 3],
}

impl Geometry {
    /// Axis-aligned geometry with identity orientation and zero origin.
    pub fn axial(dims: [usize; 3], spacing: [f32; 3]) -> Self {
        Self {
            dims,
            spacing,
            origin: [0.0; 3],
            orientation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidGeometry("zero dimension"));
        }
        if self.spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidGeometry("non-positive spacing"));
        }
        for c in 0..3 {
            let n2: f64 = (0..3)
                .map(|r| self.orientation[r][c] as f64)
                .map(|v| v * v)
                .sum();
            if !n2.is_finite() || libm::fabs(libm::sqrt(n2) - 1.0) > UNIT_NORM_TOL {
                return Err(Error::InvalidGeometry("orientation column not unit-norm"));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, linear: usize) -> [usize; 3] {
        let i = linear % self.dims[0];
        let rest = linear / self.dims[0];
        [i, rest % self.dims[1], rest / self.dims[1]]
    }

    /// Same grid within tolerance; used for the `GeometryMismatch` checks.
    pub fn compatible(&self, other: &Geometry) -> bool {
        if self.dims != other.dims {
            return false;
        }
        let close = |a: f32, b: f32| (a - b).abs() <= COMPAT_TOL;
        (0..3).all(|k| close(self.spacing[k], other.spacing[k]) && close(self.origin[k], other.origin[k]))
            && (0..3).all(|r| (0..3).all(|c| close(self.orientation[r][c], other.orientation[r][c])))
    }

    /// Voxel→world and world→voxel maps with the 3x3 inversion done once.
    pub fn mapper(&self) -> GridMapper {
        let mut a = [[0.0f64; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                a[r][c] = self.orientation[r][c] as f64 * self.spacing[c] as f64;
            }
        }
        let inv = invert3(&a).expect("validated geometry has invertible axes");
        GridMapper {
            fwd: a,
            inv,
            origin: [self.origin[0] as f64, self.origin[1] as f64, self.origin[2] as f64],
        }
    }

    /// World coordinate of a (possibly fractional) voxel index.
    pub fn world_at(&self, index: [f64; 3]) -> [f64; 3] {
        self.mapper().index_to_world(index)
    }
}

/// Precomputed voxel↔world affine for one grid.
#[derive(Debug, Clone)]
pub struct GridMapper {
    fwd: [[f64; 3]; 3],
    inv: [[f64; 3]; 3],
    origin: [f64; 3],
}

impl GridMapper {
    #[inline]
    pub fn index_to_world(&self, idx: [f64; 3]) -> [f64; 3] {
        let m = &self.fwd;
        [
            self.origin[0] + m[0][0] * idx[0] + m[0][1] * idx[1] + m[0][2] * idx[2],
            self.origin[1] + m[1][0] * idx[0] + m[1][1] * idx[1] + m[1][2] * idx[2],
            self.origin[2] + m[2][0] * idx[0] + m[2][1] * idx[1] + m[2][2] * idx[2],
        ]
    }

    /// Apply only the linear part of the world→index map, for converting
    /// displacement vectors (origins cancel).
    #[inline]
    pub fn linear_to_index(&self, d: [f64; 3]) -> [f64; 3] {
        let m = &self.inv;
        [
            m[0][0] * d[0] + m[0][1] * d[1] + m[0][2] * d[2],
            m[1][0] * d[0] + m[1][1] * d[1] + m[1][2] * d[2],
            m[2][0] * d[0] + m[2][1] * d[1] + m[2][2] * d[2],
        ]
    }

    #[inline]
    pub fn world_to_index(&self, w: [f64; 3]) -> [f64; 3] {
        let d = [w[0] - self.origin[0], w[1] - self.origin[1], w[2] - self.origin[2]];
        let m = &self.inv;
        [
            m[0][0] * d[0] + m[0][1] * d[1] + m[0][2] * d[2],
            m[1][0] * d[0] + m[1][1] * d[1] + m[1][2] * d[2],
            m[2][0] * d[0] + m[2][1] * d[1] + m[2][2] * d[2],
        ]
    }
}

pub(crate) fn invert3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det.abs() < 1e-18 {
        return None;
    }
    let inv_det = 1.0 / det;
    let mut out = [[0.0; 3]; 3];
    out[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv_det;
    out[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv_det;
    out[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv_det;
    out[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv_det;
    out[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv_det;
    out[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv_det;
    out[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv_det;
    out[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv_det;
    out[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv_det;
    Some(out)
}
