//! Dense 3D scalar volumes and binary masks sharing one grid geometry.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::Geometry;

/// Interpolation used when sampling a volume off-grid. Label maps must
/// only ever be warped with `Nearest`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpMode {
    Linear,
    Nearest,
}

/// Dense 3D grid of 32-bit intensities with physical geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    geom: Geometry,
    data: Vec<f32>,
}

impl Volume {
    pub fn new(geom: Geometry, data: Vec<f32>) -> Result<Self> {
        geom.validate()?;
        if data.len() != geom.len() {
            return Err(Error::DataLengthMismatch);
        }
        Ok(Self { geom, data })
    }

    pub fn filled(geom: Geometry, value: f32) -> Self {
        let n = geom.len();
        Self::new(geom, vec![value; n]).expect("length matches by construction")
    }

    #[inline]
    pub fn geom(&self) -> &Geometry {
        &self.geom
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.geom.dims
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f32 {
        self.data[self.geom.index(i, j, k)]
    }

    pub fn min_max(&self) -> (f32, f32) {
        let mut lo = f32::INFINITY;
        let mut hi = f32::NEG_INFINITY;
        for &v in &self.data {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    pub fn mean(&self) -> f64 {
        let s: f64 = self.data.iter().map(|&v| v as f64).sum();
        s / self.data.len() as f64
    }

    /// Sample at a fractional voxel index, edge-clamped (replicate border).
    #[inline]
    pub fn sample_index(&self, idx: [f64; 3], mode: InterpMode) -> f32 {
        match mode {
            InterpMode::Nearest => self.sample_nearest(idx),
            InterpMode::Linear => self.sample_trilinear(idx),
        }
    }

    #[inline]
    pub(crate) fn sample_nearest(&self, idx: [f64; 3]) -> f32 {
        let d = self.geom.dims;
        let i = clamp_round(idx[0], d[0]);
        let j = clamp_round(idx[1], d[1]);
        let k = clamp_round(idx[2], d[2]);
        self.data[self.geom.index(i, j, k)]
    }

    #[inline]
    pub(crate) fn sample_trilinear(&self, idx: [f64; 3]) -> f32 {
        let d = self.geom.dims;
        let (x0, x1, fx) = clamp_pair(idx[0], d[0]);
        let (y0, y1, fy) = clamp_pair(idx[1], d[1]);
        let (z0, z1, fz) = clamp_pair(idx[2], d[2]);
        let nx = d[0];
        let nxy = d[0] * d[1];
        let base00 = y0 * nx + z0 * nxy;
        let base10 = y1 * nx + z0 * nxy;
        let base01 = y0 * nx + z1 * nxy;
        let base11 = y1 * nx + z1 * nxy;
        let v000 = self.data[x0 + base00] as f64;
        let v100 = self.data[x1 + base00] as f64;
        let v010 = self.data[x0 + base10] as f64;
        let v110 = self.data[x1 + base10] as f64;
        let v001 = self.data[x0 + base01] as f64;
        let v101 = self.data[x1 + base01] as f64;
        let v011 = self.data[x0 + base11] as f64;
        let v111 = self.data[x1 + base11] as f64;
        let c00 = v000 + fx * (v100 - v000);
        let c10 = v010 + fx * (v110 - v010);
        let c01 = v001 + fx * (v101 - v001);
        let c11 = v011 + fx * (v111 - v011);
        let c0 = c00 + fy * (c10 - c00);
        let c1 = c01 + fy * (c11 - c01);
        (c0 + fz * (c1 - c0)) as f32
    }
}

/// Binary volume sharing the `Volume` geometry; voxel values are 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    geom: Geometry,
    data: Vec<u8>,
}

impl Mask {
    pub fn new(geom: Geometry, data: Vec<u8>) -> Result<Self> {
        geom.validate()?;
        if data.len() != geom.len() {
            return Err(Error::DataLengthMismatch);
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::InvalidMaskValue);
        }
        Ok(Self { geom, data })
    }

    pub fn empty(geom: Geometry) -> Self {
        let n = geom.len();
        Self::new(geom, vec![0u8; n]).expect("length matches by construction")
    }

    #[inline]
    pub fn geom(&self) -> &Geometry {
        &self.geom
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.geom.dims
    }

    #[inline]
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, linear: usize) -> bool {
        self.data[linear] != 0
    }

    pub fn set(&mut self, linear: usize, on: bool) {
        self.data[linear] = on as u8;
    }

    /// Number of foreground voxels.
    pub fn volume(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_blank(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    /// View the mask as a float volume (0.0/1.0), sharing geometry.
    pub fn to_volume(&self) -> Volume {
        let data = self.data.iter().map(|&v| v as f32).collect();
        Volume::new(self.geom.clone(), data).expect("same length")
    }

    /// Nearest-neighbour sample at a fractional voxel index.
    #[inline]
    pub fn sample_nearest(&self, idx: [f64; 3]) -> u8 {
        let d = self.geom.dims;
        let i = clamp_round(idx[0], d[0]);
        let j = clamp_round(idx[1], d[1]);
        let k = clamp_round(idx[2], d[2]);
        self.data[self.geom.index(i, j, k)]
    }
}

#[inline]
fn clamp_round(t: f64, n: usize) -> usize {
    let r = libm::floor(t + 0.5);
    if r <= 0.0 {
        0
    } else if r >= (n - 1) as f64 {
        n - 1
    } else {
        r as usize
    }
}

/// Floor/ceil neighbours and the fractional weight, clamped to the grid.
#[inline]
fn clamp_pair(t: f64, n: usize) -> (usize, usize, f64) {
    let f = libm::floor(t);
    let frac = t - f;
    let hi = (n - 1) as f64;
    if f < 0.0 {
        (0, 0, 0.0)
    } else if f >= hi {
        (n - 1, n - 1, 0.0)
    } else {
        let x0 = f as usize;
        (x0, x0 + 1, frac)
    }
}
