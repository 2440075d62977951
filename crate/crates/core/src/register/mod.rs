//! Pairwise registration producing invertible transforms.
//!
//! The engine is an affine initialization (gradient descent on mean squared
//! difference over an image pyramid) followed by a demons-style refinement
//! that optimizes a stationary velocity field; forward and inverse
//! displacement fields come from scaling-and-squaring of the positive and
//! negated velocity, so inverse transforms are cheap and consistent by
//! construction.
//!
//! Warping is pull-back: `output(x) = input(x + u(x))`, with `u` in
//! millimetres on the output grid. Composition follows the same convention:
//! `compose(outer, inner)` applies `outer` first, then `inner`.

mod affine;
mod affine_reg;
mod demons;
mod field;
mod pyramid;
mod similarity;
mod transform;

pub use affine::Affine3;
pub use affine_reg::{register_affine, AffineReg};
pub use demons::{register_diffeo, DiffeoReg};
pub use field::{compose_fields, Diffeo, DisplacementField};
pub use similarity::cc_similarity;
pub use transform::{compose, warp, warp_mask_field, warp_mask_with, warp_with, TransformChain, TransformStep};

use alloc::vec::Vec;

/// Knobs for both registration stages. Iteration counts are listed
/// coarsest level first.
#[derive(Debug, Clone, PartialEq)]
pub struct RegParams {
    pub pyramid_levels: usize,
    pub iters_per_level: Vec<u32>,
    pub update_step: f64,
    /// Gaussian sigma (voxels) applied to each demons update.
    pub fluid_sigma: f64,
    /// Gaussian sigma (voxels) applied to the velocity field.
    pub diffusion_sigma: f64,
    /// Gradient-descent iterations per affine pyramid level.
    pub affine_iters: u32,
    /// Initial affine line-search step in normalized parameter units.
    pub affine_lr: f64,
    /// Relative similarity change considered meaningful progress.
    pub convergence_tol: f64,
}

impl Default for RegParams {
    fn default() -> Self {
        Self {
            pyramid_levels: 3,
            iters_per_level: alloc::vec![100, 60, 30],
            update_step: 1.0,
            fluid_sigma: 1.0,
            diffusion_sigma: 1.0,
            affine_iters: 200,
            affine_lr: 0.01,
            convergence_tol: 1e-5,
        }
    }
}

impl RegParams {
    pub(crate) fn iters_at(&self, level_from_coarse: usize) -> u32 {
        self.iters_per_level
            .get(level_from_coarse)
            .copied()
            .unwrap_or_else(|| *self.iters_per_level.last().unwrap_or(&30))
    }
}
