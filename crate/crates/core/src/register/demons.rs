//! Demons-style deformable registration of a stationary velocity field.
//!
//! Each iteration exponentiates the current velocity, warps the moving
//! image, computes the gradient-normalized demons force from the intensity
//! difference, fluid-smooths the update, and diffusion-smooths the velocity.
//! Cross-correlation is tracked throughout and the best-scoring velocity is
//! kept, so the returned transform never scores worse than the identity.

use alloc::vec::Vec;

use crate::error::Result;
use crate::geometry::Geometry;
use crate::volume::{InterpMode, Volume};

use super::field::{auto_steps, exponentiate, Diffeo, DisplacementField};
use super::pyramid::{gradient_volumes, mat3_mul, pyramid_level, scale_schedule, world_gradient_matrix};
use super::similarity::{ncc, variance};
use super::RegParams;

#[derive(Debug, Clone)]
pub struct DiffeoReg {
    pub diffeo: Diffeo,
    /// False when the inputs were degenerate or no progress was made on a
    /// poorly aligned pair.
    pub converged: bool,
    /// Cross-correlation of the untransformed pair at full resolution.
    pub initial_cc: f64,
    /// Cross-correlation achieved by the returned transform.
    pub final_cc: f64,
}

/// Register `moving` onto the grid of `fixed`. Affine pre-alignment is
/// assumed to have been applied already; both inputs should be rescaled to
/// [0, 1].
pub fn register_diffeo(moving: &Volume, fixed: &Volume, p: &RegParams) -> Result<DiffeoReg> {
    if variance(moving.data()) < 1e-12 || variance(fixed.data()) < 1e-12 {
        return Ok(DiffeoReg {
            diffeo: Diffeo::identity(fixed.geom().clone()),
            converged: false,
            initial_cc: 0.0,
            final_cc: 0.0,
        });
    }

    let mut velocity: Option<DisplacementField> = None;
    let mut initial_cc = -1.0;
    let mut final_cc = -1.0;

    for (li, factor) in scale_schedule(p.pyramid_levels, true).into_iter().enumerate() {
        let f_level = pyramid_level(fixed, factor);
        let m_level = pyramid_level(moving, factor);
        let level = LevelContext::new(&m_level, &f_level);

        // Candidate start: the upsampled coarse solution, unless the zero
        // field scores better (it is always a legal fallback).
        let zero = DisplacementField::zero(f_level.geom().clone());
        let cc_zero = level.cc_of(&zero)?;
        let mut v = match velocity.take() {
            Some(prev) => {
                let resampled = prev.resampled(f_level.geom())?;
                if level.cc_of(&resampled)? >= cc_zero {
                    resampled
                } else {
                    zero
                }
            }
            None => zero,
        };
        if factor == 1 {
            initial_cc = cc_zero;
        }

        // One exponentiation and warp per iteration, shared between the
        // similarity tracking and the force computation.
        let mut warped = level.warp_by_velocity(&v)?;
        let mut best_cc = ncc(warped.data(), f_level.data()).unwrap_or(-1.0);
        let mut best_v = v.clone();
        for _ in 0..p.iters_at(li) {
            let update = level.demons_force(&warped).smoothed([p.fluid_sigma; 3]);
            add_scaled(&mut v, &update, p.update_step);
            v = v.smoothed([p.diffusion_sigma; 3]);
            if !v.is_finite() {
                return Err(crate::error::Error::NonFiniteField);
            }
            warped = level.warp_by_velocity(&v)?;
            let cc = ncc(warped.data(), f_level.data()).unwrap_or(-1.0);
            if cc > best_cc {
                best_cc = cc;
                best_v = v.clone();
            }
        }
        if factor == 1 {
            final_cc = best_cc;
        }
        velocity = Some(best_v);
    }

    let velocity = velocity.expect("at least one pyramid level");
    let steps = auto_steps(&velocity);
    let diffeo = Diffeo::from_velocity(velocity, steps)?;
    let converged = final_cc - initial_cc > p.convergence_tol || initial_cc >= 0.999;
    Ok(DiffeoReg { diffeo, converged, initial_cc, final_cc })
}

struct LevelContext<'a> {
    moving: &'a Volume,
    fixed: &'a Volume,
    grads: [Volume; 3],
    gmat: [[f64; 3]; 3],
    /// Normalization length: mean voxel spacing (mm).
    kappa: f64,
}

impl<'a> LevelContext<'a> {
    fn new(moving: &'a Volume, fixed: &'a Volume) -> Self {
        let grads = gradient_volumes(fixed);
        let gmat = world_gradient_matrix(fixed.geom());
        let s = fixed.geom().spacing;
        let kappa = (s[0] as f64 + s[1] as f64 + s[2] as f64) / 3.0;
        Self { moving, fixed, grads, gmat, kappa }
    }

    fn warp_by_velocity(&self, v: &DisplacementField) -> Result<Volume> {
        let u = exponentiate(v, auto_steps(v))?;
        Ok(self.warp_by_field(&u))
    }

    fn warp_by_field(&self, u: &DisplacementField) -> Volume {
        let geom: &Geometry = self.fixed.geom();
        let tmap = geom.mapper();
        let mmap = self.moving.geom().mapper();
        let dims = geom.dims;
        let mut data = Vec::with_capacity(geom.len());
        let mut lin = 0usize;
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let p = tmap.index_to_world([i as f64, j as f64, k as f64]);
                    let d = u.data()[lin];
                    let q = [p[0] + d[0] as f64, p[1] + d[1] as f64, p[2] + d[2] as f64];
                    data.push(self.moving.sample_index(mmap.world_to_index(q), InterpMode::Linear));
                    lin += 1;
                }
            }
        }
        Volume::new(geom.clone(), data).expect("length matches")
    }

    fn cc_of(&self, v: &DisplacementField) -> Result<f64> {
        let warped = self.warp_by_velocity(v)?;
        Ok(ncc(warped.data(), self.fixed.data()).unwrap_or(-1.0))
    }

    /// Gradient-normalized demons force from the current residual.
    fn demons_force(&self, warped: &Volume) -> DisplacementField {
        let n = warped.data().len();
        let mut data = Vec::with_capacity(n);
        let inv_k2 = 1.0 / (self.kappa * self.kappa);
        for lin in 0..n {
            let r = warped.data()[lin] as f64 - self.fixed.data()[lin] as f64;
            let gi = [
                self.grads[0].data()[lin] as f64,
                self.grads[1].data()[lin] as f64,
                self.grads[2].data()[lin] as f64,
            ];
            let gw = mat3_mul(&self.gmat, gi);
            let g2 = gw[0] * gw[0] + gw[1] * gw[1] + gw[2] * gw[2];
            let denom = g2 + r * r * inv_k2;
            if denom < 1e-12 {
                data.push([0.0f32; 3]);
            } else {
                let s = -r / denom;
                data.push([(s * gw[0]) as f32, (s * gw[1]) as f32, (s * gw[2]) as f32]);
            }
        }
        DisplacementField::new(self.fixed.geom().clone(), data).expect("length matches")
    }
}

fn add_scaled(v: &mut DisplacementField, u: &DisplacementField, step: f64) {
    for (a, b) in v.data_mut().iter_mut().zip(u.data()) {
        for c in 0..3 {
            a[c] = (a[c] as f64 + step * b[c] as f64) as f32;
        }
    }
}
