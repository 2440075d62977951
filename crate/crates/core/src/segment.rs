//! Ventricle segmentation with pre/post-processing and the training-time
//! augmentation transforms.
//!
//! The segmenter itself is pluggable: anything producing a ventricle mask in
//! subject space qualifies. The shipped reference is a rule-based dark-region
//! detector so the full pipeline runs without trained weights.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::components::{connected_components, Connectivity};
use crate::error::{Error, Result};
use crate::intensity::{mean_in_mask, median_in_mask};
use crate::register::{warp_mask_with, warp_with, Affine3, TransformChain};
use crate::volume::{InterpMode, Mask, Volume};

#[derive(Debug, Clone, PartialEq)]
pub struct SegmenterConfig {
    /// Voxels darker than this fraction of the brain-median intensity are
    /// ventricle candidates.
    pub dark_threshold: f64,
    /// Components smaller than this survive removal ("smaller than", so a
    /// component of exactly this size is kept).
    pub min_component_voxels: usize,
    /// Threshold for binarizing probability maps.
    pub binarize_level: f32,
    pub connectivity: Connectivity,
    /// Erosion depth (voxels) applied to the brain mask before thresholding,
    /// which keeps dark sulci at the brain border out of the candidate set.
    pub border_erosion: usize,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            dark_threshold: 0.55,
            min_component_voxels: 5,
            binarize_level: 0.5,
            connectivity: Connectivity::TwentySix,
            border_erosion: 2,
        }
    }
}

/// Randomized training-time transform parameters. `mean_intensity` is the
/// mean FLAIR intensity after percentile normalization; the ventricle boost
/// is drawn from U(0, 2*mean) and the dark-region perturbation from
/// U(-2*mean, 2*mean).
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentParams {
    pub max_translation_voxels: f64,
    pub max_rotation_rad: f64,
    pub coronal_flip_prob: f64,
    pub mean_intensity: f64,
    pub dark_cutoff: f32,
    pub seed: u64,
}

impl AugmentParams {
    pub fn new(mean_intensity: f64, seed: u64) -> Self {
        Self {
            max_translation_voxels: 50.0,
            max_rotation_rad: 0.2,
            coronal_flip_prob: 0.5,
            mean_intensity,
            dark_cutoff: 0.25,
            seed,
        }
    }
}

/// Threshold a probability map: voxel >= level maps to foreground.
pub fn binarize(p: &Volume, level: f32) -> Mask {
    let data = p.data().iter().map(|&v| (v >= level) as u8).collect();
    Mask::new(p.geom().clone(), data).expect("binary by construction")
}

/// Drop connected components with volume strictly below `min_voxels`.
pub fn remove_small_components(m: &Mask, min_voxels: usize, conn: Connectivity) -> Mask {
    let mut out = Mask::empty(m.geom().clone());
    for region in connected_components(m, conn) {
        if region.size() >= min_voxels {
            for &v in &region.voxels {
                out.set(v, true);
            }
        }
    }
    out
}

/// Erode a mask: a voxel survives when all face neighbours are inside.
/// Out-of-volume counts as background.
pub fn erode(m: &Mask, iterations: usize) -> Mask {
    let dims = m.dims();
    let mut cur = m.clone();
    for _ in 0..iterations {
        let mut next = Mask::empty(m.geom().clone());
        for lin in 0..cur.data().len() {
            if !cur.get(lin) {
                continue;
            }
            let c = m.geom().coords(lin);
            let mut keep = true;
            'n: for axis in 0..3 {
                for dir in [-1i64, 1] {
                    let mut nc = [c[0] as i64, c[1] as i64, c[2] as i64];
                    nc[axis] += dir;
                    if nc[axis] < 0 || nc[axis] >= dims[axis] as i64 {
                        keep = false;
                        break 'n;
                    }
                    if !cur.get(m.geom().index(nc[0] as usize, nc[1] as usize, nc[2] as usize)) {
                        keep = false;
                        break 'n;
                    }
                }
            }
            if keep {
                next.set(lin, true);
            }
        }
        cur = next;
    }
    cur
}

/// Reference ventricle segmenter: dark voxels well inside the brain,
/// component-filtered.
///
/// Expects a percentile-normalized FLAIR. The intensity cut is
/// `dark_threshold` times the median intensity inside the brain mask.
pub fn rule_based_ventricle_segment(
    flair: &Volume,
    brain: &Mask,
    cfg: &SegmenterConfig,
) -> Result<Mask> {
    if !flair.geom().compatible(brain.geom()) {
        return Err(Error::GeometryMismatch);
    }
    if brain.is_blank() {
        return Err(Error::EmptyBrainMask);
    }
    let median = median_in_mask(flair, brain)?;
    let cut = (cfg.dark_threshold * median) as f32;
    let interior = erode(brain, cfg.border_erosion);
    let mut cand = Mask::empty(flair.geom().clone());
    for lin in 0..flair.data().len() {
        if interior.get(lin) && flair.data()[lin] < cut {
            cand.set(lin, true);
        }
    }
    Ok(remove_small_components(&cand, cfg.min_component_voxels, cfg.connectivity))
}

/// Mean FLAIR intensity inside the brain mask, the augmentation scale mu.
pub fn mean_intensity(flair: &Volume, brain: &Mask) -> Result<f64> {
    mean_in_mask(flair, brain)
}

/// Apply the training-time augmentation: ventricle intensity boost, dark
/// region perturbation, then one rigid motion (translation, per-axis
/// rotations, optional coronal flip) applied identically to the image
/// (linear interpolation) and the mask (nearest). Deterministic per seed.
pub fn augment(image: &Volume, vent: &Mask, p: &AugmentParams) -> Result<(Volume, Mask)> {
    if !image.geom().compatible(vent.geom()) {
        return Err(Error::GeometryMismatch);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);

    // Intensity terms first, geometry second; draw order is fixed so a seed
    // pins the whole augmentation.
    let boost = rng.gen_range(0.0..=(2.0 * p.mean_intensity));
    let dark_shift = rng.gen_range(-2.0 * p.mean_intensity..=2.0 * p.mean_intensity);
    let t: [f64; 3] = [
        rng.gen_range(-p.max_translation_voxels..=p.max_translation_voxels),
        rng.gen_range(-p.max_translation_voxels..=p.max_translation_voxels),
        rng.gen_range(-p.max_translation_voxels..=p.max_translation_voxels),
    ];
    let angles: [f64; 3] = [
        rng.gen_range(-p.max_rotation_rad..=p.max_rotation_rad),
        rng.gen_range(-p.max_rotation_rad..=p.max_rotation_rad),
        rng.gen_range(-p.max_rotation_rad..=p.max_rotation_rad),
    ];
    let flip = rng.gen_bool(p.coronal_flip_prob.clamp(0.0, 1.0));

    let mut shifted = image.clone();
    for (lin, v) in shifted.data_mut().iter_mut().enumerate() {
        if vent.get(lin) {
            *v = (*v as f64 + boost) as f32;
        } else if *v < p.dark_cutoff {
            *v = (*v as f64 + dark_shift) as f32;
        }
    }

    let motion = rigid_motion(image, t, angles, flip);
    // Pull-back warp with the inverse: the object moves by `motion`.
    let map = TransformChain::from_affine(
        motion.inverse().expect("rigid motions are invertible"),
    );
    let out_img = warp_with(&shifted, image.geom(), &map, InterpMode::Linear);
    let out_mask = warp_mask_with(vent, vent.geom(), &map);
    Ok((out_img, out_mask))
}

/// World-coordinate rigid motion about the volume center: optional coronal
/// (y-axis) flip, then Rz*Ry*Rx rotation, then translation in voxel units
/// scaled by spacing.
fn rigid_motion(image: &Volume, t_voxels: [f64; 3], angles: [f64; 3], flip: bool) -> Affine3 {
    let dims = image.dims();
    let sp = image.geom().spacing;
    let c = image.geom().mapper().index_to_world([
        (dims[0] as f64 - 1.0) / 2.0,
        (dims[1] as f64 - 1.0) / 2.0,
        (dims[2] as f64 - 1.0) / 2.0,
    ]);
    let (sx, cx) = (libm::sin(angles[0]), libm::cos(angles[0]));
    let (sy, cy) = (libm::sin(angles[1]), libm::cos(angles[1]));
    let (sz, cz) = (libm::sin(angles[2]), libm::cos(angles[2]));
    let rx = [[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]];
    let ry = [[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]];
    let rz = [[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]];
    let mut rot = mat_mul(&rz, &mat_mul(&ry, &rx));
    if flip {
        // Mirror across the coronal plane: negate the y axis.
        for r in 0..3 {
            rot[r][1] = -rot[r][1];
        }
    }
    let t_mm = [
        t_voxels[0] * sp[0] as f64,
        t_voxels[1] * sp[1] as f64,
        t_voxels[2] * sp[2] as f64,
    ];
    let rc = [
        rot[0][0] * c[0] + rot[0][1] * c[1] + rot[0][2] * c[2],
        rot[1][0] * c[0] + rot[1][1] * c[1] + rot[1][2] * c[2],
        rot[2][0] * c[0] + rot[2][1] * c[1] + rot[2][2] * c[2],
    ];
    Affine3::from_linear_translation(
        rot,
        [c[0] - rc[0] + t_mm[0], c[1] - rc[1] + t_mm[1], c[2] - rc[2] + t_mm[2]],
    )
}

fn mat_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            out[r][c] = (0..3).map(|k| a[r][k] * b[k][c]).sum();
        }
    }
    out
}

/// Clean a raw probability map the way the pipeline post-processes network
/// output: binarize then drop small components.
pub fn postprocess_probability(p: &Volume, cfg: &SegmenterConfig) -> Mask {
    let m = binarize(p, cfg.binarize_level);
    remove_small_components(&m, cfg.min_component_voxels, cfg.connectivity)
}
