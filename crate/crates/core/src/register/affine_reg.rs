//! Affine pre-alignment by gradient descent on mean squared difference.

use alloc::vec::Vec;

use crate::volume::{InterpMode, Volume};

use super::affine::Affine3;
use super::pyramid::{gradient_volumes, mat3_mul, pyramid_level, scale_schedule, world_gradient_matrix};
use super::similarity::{mean_squared_diff, variance};
use super::RegParams;

#[derive(Debug, Clone)]
pub struct AffineReg {
    /// World-coordinate pull-back map: sampling the moving image at
    /// `transform(p)` aligns it with the fixed image at `p`.
    pub transform: Affine3,
    /// False when the optimization could not run (degenerate input).
    pub converged: bool,
}

/// Parameters are a translation plus a linear perturbation around the fixed
/// volume's center, both normalized by the mean half-extent so one step size
/// fits every coefficient.
#[derive(Clone, Copy)]
struct Params {
    t: [f64; 3],
    l: [[f64; 3]; 3],
}

impl Params {
    fn zero() -> Self {
        Self { t: [0.0; 3], l: [[0.0; 3]; 3] }
    }

    fn to_affine(self, center: [f64; 3], rho: f64) -> Affine3 {
        let mut lin = [[0.0f64; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                lin[r][c] = self.l[r][c] + if r == c { 1.0 } else { 0.0 };
            }
        }
        // T(p) = c + rho*t + (I+L)(p - c)
        let lc = mat3_mul(&lin, center);
        let t = [
            center[0] + rho * self.t[0] - lc[0],
            center[1] + rho * self.t[1] - lc[1],
            center[2] + rho * self.t[2] - lc[2],
        ];
        Affine3::from_linear_translation(lin, t)
    }

    fn step(&self, g: &Params, alpha: f64) -> Params {
        let mut out = *self;
        for a in 0..3 {
            out.t[a] -= alpha * g.t[a];
            for b in 0..3 {
                out.l[a][b] -= alpha * g.l[a][b];
            }
        }
        out
    }
}

pub fn register_affine(moving: &Volume, fixed: &Volume, p: &RegParams) -> AffineReg {
    if variance(moving.data()) < 1e-12 || variance(fixed.data()) < 1e-12 {
        return AffineReg { transform: Affine3::identity(), converged: false };
    }

    let center = volume_center(fixed);
    let rho = mean_half_extent(fixed);
    let mut params = Params::zero();
    // Intensity-centroid initialization nails most of the translation.
    let cm = intensity_centroid(moving);
    let cf = intensity_centroid(fixed);
    for a in 0..3 {
        params.t[a] = (cm[a] - cf[a]) / rho;
    }

    for factor in scale_schedule(p.pyramid_levels, false) {
        let f_level = pyramid_level(fixed, factor);
        let m_level = pyramid_level(moving, factor);
        params = optimize_level(&m_level, &f_level, params, center, rho, p);
    }

    AffineReg { transform: params.to_affine(center, rho), converged: true }
}

fn optimize_level(
    moving: &Volume,
    fixed: &Volume,
    mut params: Params,
    center: [f64; 3],
    rho: f64,
    p: &RegParams,
) -> Params {
    let grads = gradient_volumes(moving);
    let gmat = world_gradient_matrix(moving.geom());
    let mut alpha = p.affine_lr;
    let mut energy = eval_mse(moving, fixed, &params.to_affine(center, rho));

    for _ in 0..p.affine_iters {
        let g = eval_gradient(moving, fixed, &grads, &gmat, &params, center, rho);
        let mut accepted = false;
        for _ in 0..10 {
            let cand = params.step(&g, alpha);
            let e = eval_mse(moving, fixed, &cand.to_affine(center, rho));
            if e < energy {
                params = cand;
                energy = e;
                alpha *= 1.3;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted || alpha < 1e-9 {
            break;
        }
        if energy < 1e-14 {
            break;
        }
    }
    params
}

fn eval_mse(moving: &Volume, fixed: &Volume, t: &Affine3) -> f64 {
    let tmap = fixed.geom().mapper();
    let mmap = moving.geom().mapper();
    let dims = fixed.dims();
    let mut warped = Vec::with_capacity(fixed.geom().len());
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let p = tmap.index_to_world([i as f64, j as f64, k as f64]);
                let q = t.apply(p);
                warped.push(moving.sample_index(mmap.world_to_index(q), InterpMode::Linear));
            }
        }
    }
    mean_squared_diff(&warped, fixed.data())
}

fn eval_gradient(
    moving: &Volume,
    fixed: &Volume,
    grads: &[Volume; 3],
    gmat: &[[f64; 3]; 3],
    params: &Params,
    center: [f64; 3],
    rho: f64,
) -> Params {
    let t = params.to_affine(center, rho);
    let tmap = fixed.geom().mapper();
    let mmap = moving.geom().mapper();
    let dims = fixed.dims();
    let mut g = Params::zero();
    let n = fixed.geom().len() as f64;
    let mut lin = 0usize;
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let p = tmap.index_to_world([i as f64, j as f64, k as f64]);
                let q = t.apply(p);
                let midx = mmap.world_to_index(q);
                let r = moving.sample_index(midx, InterpMode::Linear) as f64
                    - fixed.data()[lin] as f64;
                let gi = [
                    grads[0].sample_index(midx, InterpMode::Linear) as f64,
                    grads[1].sample_index(midx, InterpMode::Linear) as f64,
                    grads[2].sample_index(midx, InterpMode::Linear) as f64,
                ];
                let gw = mat3_mul(gmat, gi);
                let xi = [
                    (p[0] - center[0]) / rho,
                    (p[1] - center[1]) / rho,
                    (p[2] - center[2]) / rho,
                ];
                let scale = 2.0 * r / n * rho;
                for a in 0..3 {
                    g.t[a] += scale * gw[a];
                    for b in 0..3 {
                        g.l[a][b] += scale * gw[a] * xi[b];
                    }
                }
                lin += 1;
            }
        }
    }
    g
}

fn volume_center(v: &Volume) -> [f64; 3] {
    let d = v.dims();
    v.geom().mapper().index_to_world([
        (d[0] as f64 - 1.0) / 2.0,
        (d[1] as f64 - 1.0) / 2.0,
        (d[2] as f64 - 1.0) / 2.0,
    ])
}

fn mean_half_extent(v: &Volume) -> f64 {
    let d = v.dims();
    let s = v.geom().spacing;
    let e: f64 = (0..3).map(|a| d[a] as f64 * s[a] as f64).sum();
    (e / 3.0) / 2.0
}

/// Intensity-weighted centroid in world coordinates; weights are shifted to
/// be nonnegative.
fn intensity_centroid(v: &Volume) -> [f64; 3] {
    let (lo, _) = v.min_max();
    let mapper = v.geom().mapper();
    let dims = v.dims();
    let mut acc = [0.0f64; 3];
    let mut wsum = 0.0f64;
    let mut lin = 0usize;
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let w = (v.data()[lin] - lo) as f64;
                if w > 0.0 {
                    let p = mapper.index_to_world([i as f64, j as f64, k as f64]);
                    acc[0] += w * p[0];
                    acc[1] += w * p[1];
                    acc[2] += w * p[2];
                    wsum += w;
                }
                lin += 1;
            }
        }
    }
    if wsum <= 0.0 {
        return volume_center(v);
    }
    [acc[0] / wsum, acc[1] / wsum, acc[2] / wsum]
}
