//! Dense displacement fields and stationary-velocity diffeomorphisms.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{Geometry, GridMapper};

/// Per-voxel 3-vector of world displacements (mm) on a reference grid.
#[derive(Debug, Clone)]
pub struct DisplacementField {
    geom: Geometry,
    mapper: GridMapper,
    data: Vec<[f32; 3]>,
}

impl PartialEq for DisplacementField {
    fn eq(&self, other: &Self) -> bool {
        self.geom == other.geom && self.data == other.data
    }
}

impl DisplacementField {
    pub fn new(geom: Geometry, data: Vec<[f32; 3]>) -> Result<Self> {
        geom.validate()?;
        if data.len() != geom.len() {
            return Err(Error::DataLengthMismatch);
        }
        let mapper = geom.mapper();
        Ok(Self { geom, mapper, data })
    }

    pub fn zero(geom: Geometry) -> Self {
        let n = geom.len();
        Self::new(geom, vec![[0.0; 3]; n]).expect("length matches")
    }

    #[inline]
    pub fn geom(&self) -> &Geometry {
        &self.geom
    }

    #[inline]
    pub fn mapper(&self) -> &GridMapper {
        &self.mapper
    }

    #[inline]
    pub fn data(&self) -> &[[f32; 3]] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [[f32; 3]] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|d| d.iter().all(|v| v.is_finite()))
    }

    pub fn scale(&mut self, s: f64) {
        for d in &mut self.data {
            for v in d.iter_mut() {
                *v = (*v as f64 * s) as f32;
            }
        }
    }

    /// Largest displacement magnitude in mm.
    pub fn max_norm_mm(&self) -> f64 {
        let mut worst = 0.0f64;
        for d in &self.data {
            let n2 = d.iter().map(|&v| v as f64 * v as f64).sum::<f64>();
            worst = worst.max(n2);
        }
        libm::sqrt(worst)
    }

    /// Mean displacement magnitude in mm.
    pub fn mean_norm_mm(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        let s: f64 = self
            .data
            .iter()
            .map(|d| libm::sqrt(d.iter().map(|&v| v as f64 * v as f64).sum::<f64>()))
            .sum();
        s / self.data.len() as f64
    }

    /// Trilinear sample at a fractional voxel index, edge-clamped.
    pub fn sample_index(&self, idx: [f64; 3]) -> [f64; 3] {
        let d = self.geom.dims;
        let (x0, x1, fx) = clamp_pair(idx[0], d[0]);
        let (y0, y1, fy) = clamp_pair(idx[1], d[1]);
        let (z0, z1, fz) = clamp_pair(idx[2], d[2]);
        let nx = d[0];
        let nxy = d[0] * d[1];
        let mut out = [0.0f64; 3];
        let corners = [
            (x0 + y0 * nx + z0 * nxy, (1.0 - fx) * (1.0 - fy) * (1.0 - fz)),
            (x1 + y0 * nx + z0 * nxy, fx * (1.0 - fy) * (1.0 - fz)),
            (x0 + y1 * nx + z0 * nxy, (1.0 - fx) * fy * (1.0 - fz)),
            (x1 + y1 * nx + z0 * nxy, fx * fy * (1.0 - fz)),
            (x0 + y0 * nx + z1 * nxy, (1.0 - fx) * (1.0 - fy) * fz),
            (x1 + y0 * nx + z1 * nxy, fx * (1.0 - fy) * fz),
            (x0 + y1 * nx + z1 * nxy, (1.0 - fx) * fy * fz),
            (x1 + y1 * nx + z1 * nxy, fx * fy * fz),
        ];
        for (lin, w) in corners {
            if w == 0.0 {
                continue;
            }
            let v = &self.data[lin];
            out[0] += w * v[0] as f64;
            out[1] += w * v[1] as f64;
            out[2] += w * v[2] as f64;
        }
        out
    }

    /// Convert a world displacement into voxel-index units on this grid.
    #[inline]
    pub fn voxel_offset(&self, d_mm: [f64; 3]) -> [f64; 3] {
        self.mapper.linear_to_index(d_mm)
    }

    /// Gaussian-smooth each component with a per-axis sigma in voxels.
    pub fn smoothed(&self, sigma_voxels: [f64; 3]) -> Self {
        let n = self.data.len();
        let mut comps = [
            alloc::vec![0.0f32; n],
            alloc::vec![0.0f32; n],
            alloc::vec![0.0f32; n],
        ];
        for (i, d) in self.data.iter().enumerate() {
            comps[0][i] = d[0];
            comps[1][i] = d[1];
            comps[2][i] = d[2];
        }
        let smoothed: Vec<Vec<f32>> = comps
            .iter()
            .map(|c| crate::filter::smooth_grid(c, self.geom.dims, sigma_voxels))
            .collect();
        let data = (0..n)
            .map(|i| [smoothed[0][i], smoothed[1][i], smoothed[2][i]])
            .collect();
        Self::new(self.geom.clone(), data).expect("length preserved")
    }

    /// Resample onto another grid by trilinear interpolation of components.
    pub fn resampled(&self, geom: &Geometry) -> Result<Self> {
        let mapper = geom.mapper();
        let mut data = Vec::with_capacity(geom.len());
        for k in 0..geom.dims[2] {
            for j in 0..geom.dims[1] {
                for i in 0..geom.dims[0] {
                    let w = mapper.index_to_world([i as f64, j as f64, k as f64]);
                    let idx = self.mapper.world_to_index(w);
                    let d = self.sample_index(idx);
                    data.push([d[0] as f32, d[1] as f32, d[2] as f32]);
                }
            }
        }
        Self::new(geom.clone(), data)
    }

    /// Mean residual of `fwd` then `inv` against identity, in voxel units.
    pub fn compose_residual_voxels(fwd: &Self, inv: &Self) -> Result<(f64, f64)> {
        let composed = compose_fields(fwd, inv)?;
        let min_spacing = composed
            .geom
            .spacing
            .iter()
            .fold(f32::INFINITY, |a, &b| a.min(b)) as f64;
        let mut sum = 0.0;
        let mut max = 0.0f64;
        for d in &composed.data {
            let n = libm::sqrt(d.iter().map(|&v| v as f64 * v as f64).sum::<f64>()) / min_spacing;
            sum += n;
            max = max.max(n);
        }
        Ok((sum / composed.data.len() as f64, max))
    }
}

/// Compose two pull-back displacement fields on the same grid:
/// `u(x) = u_outer(x) + u_inner(x + u_outer(x))`, i.e. `outer` applies first.
pub fn compose_fields(outer: &DisplacementField, inner: &DisplacementField) -> Result<DisplacementField> {
    if !outer.geom.compatible(&inner.geom) {
        return Err(Error::GeometryMismatch);
    }
    let dims = outer.geom.dims;
    let mut data = Vec::with_capacity(outer.data.len());
    let mut lin = 0usize;
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let d1 = outer.data[lin];
                let d1 = [d1[0] as f64, d1[1] as f64, d1[2] as f64];
                let off = outer.voxel_offset(d1);
                let d2 = inner.sample_index([i as f64 + off[0], j as f64 + off[1], k as f64 + off[2]]);
                data.push([
                    (d1[0] + d2[0]) as f32,
                    (d1[1] + d2[1]) as f32,
                    (d1[2] + d2[2]) as f32,
                ]);
                lin += 1;
            }
        }
    }
    DisplacementField::new(outer.geom.clone(), data)
}

/// Invertible nonlinear transform parameterized by a stationary velocity
/// field; forward and inverse displacements are cached at construction via
/// scaling-and-squaring of the positive and negated velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct Diffeo {
    velocity: DisplacementField,
    squaring_steps: u32,
    forward: DisplacementField,
    inverse: DisplacementField,
}

impl Diffeo {
    pub fn from_velocity(velocity: DisplacementField, squaring_steps: u32) -> Result<Self> {
        let steps = squaring_steps.max(4);
        if !velocity.is_finite() {
            return Err(Error::NonFiniteField);
        }
        let forward = exponentiate(&velocity, steps)?;
        let mut negated = velocity.clone();
        negated.scale(-1.0);
        let inverse = exponentiate(&negated, steps)?;
        Ok(Self { velocity, squaring_steps: steps, forward, inverse })
    }

    pub fn identity(geom: Geometry) -> Self {
        let zero = DisplacementField::zero(geom);
        Self {
            velocity: zero.clone(),
            squaring_steps: 4,
            forward: zero.clone(),
            inverse: zero,
        }
    }

    pub fn velocity(&self) -> &DisplacementField {
        &self.velocity
    }

    pub fn squaring_steps(&self) -> u32 {
        self.squaring_steps
    }

    pub fn forward(&self) -> &DisplacementField {
        &self.forward
    }

    pub fn inverse(&self) -> &DisplacementField {
        &self.inverse
    }

    pub fn geom(&self) -> &Geometry {
        self.velocity.geom()
    }
}

/// Squaring step count so the initial scaled field moves at most a quarter
/// voxel.
pub(crate) fn auto_steps(v: &DisplacementField) -> u32 {
    let min_spacing = v.geom().spacing.iter().fold(f32::INFINITY, |a, &b| a.min(b)) as f64;
    let max_vox = v.max_norm_mm() / min_spacing;
    if max_vox <= 0.0 {
        return 4;
    }
    let n = libm::ceil(libm::log2(max_vox / 0.25));
    (n.max(4.0) as u32).min(12)
}

/// exp(v) by scaling and squaring: halve `steps` times, then self-compose.
pub(crate) fn exponentiate(v: &DisplacementField, steps: u32) -> Result<DisplacementField> {
    let mut u = v.clone();
    u.scale(libm::exp2(-(steps as f64)));
    for _ in 0..steps {
        u = compose_fields(&u, &u)?;
        if !u.is_finite() {
            return Err(Error::NonFiniteField);
        }
    }
    Ok(u)
}

#[inline]
fn clamp_pair(t: f64, n: usize) -> (usize, usize, f64) {
    let f = libm::floor(t);
    let hi = (n - 1) as f64;
    if f < 0.0 {
        (0, 0, 0.0)
    } else if f >= hi {
        (n - 1, n - 1, 0.0)
    } else {
        let x0 = f as usize;
        (x0, x0 + 1, t - f)
    }
}
