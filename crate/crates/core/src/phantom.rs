//! Deterministic synthetic brain phantoms: an ellipsoidal "brain" with
//! age-scaled curved ventricle lobes, periventricular bright lesions, noise,
//! and known smooth deformations. Shapes are defined in coordinates
//! normalized by the grid extent, so any resolution produces the same
//! anatomy.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::geometry::Geometry;
use crate::mar::{build_general_atlas, AgeBand, Atlas, AtlasSet};
use crate::register::{
    register_diffeo, warp, warp_mask_field, Diffeo, DisplacementField, RegParams,
};
use crate::volume::{InterpMode, Mask, Volume};

/// Age parameters used for the five atlas phantoms, youngest first.
pub const ATLAS_AGE_PARAMS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
/// Atlas ids matching [`ATLAS_AGE_PARAMS`]; the general atlas is "g".
pub const ATLAS_IDS: [&str; 5] = ["a1", "a2", "a3", "a4", "a5"];

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub spacing: [f32; 3],
    /// Ventricle scale in [0, 1]; larger means older.
    pub age_param: f64,
    /// Lesion load in [0, 1]; 0 disables lesions.
    pub wmh_load: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            dims: [64, 64, 64],
            spacing: [2.0, 2.0, 2.0],
            age_param: 0.5,
            wmh_load: 0.5,
            noise_sigma: 0.03,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PhantomSubject {
    pub flair: Volume,
    pub brain: Mask,
    pub ventricles: Mask,
    pub wmh: Mask,
    /// Id of the atlas this subject was generated from, for cohort members.
    pub generator_atlas: Option<String>,
    /// The deformation that produced the subject from its generator.
    pub true_deformation: Option<Diffeo>,
}

const BRAIN_INTENSITY: f32 = 0.62;
const VENTRICLE_INTENSITY: f32 = 0.10;
const WMH_INTENSITY: f32 = 0.92;
const CENTER: [f64; 3] = [0.5, 0.52, 0.5];
const BRAIN_SEMI: [f64; 3] = [0.36, 0.42, 0.33];

/// Ventricle radius multiplier for an age parameter; strictly increasing.
fn age_scale(age: f64) -> f64 {
    0.7 + 0.6 * age
}

/// Lateral ventricle arc for one hemisphere, parameterized over [0, 1]:
/// center (normalized coords) and radius.
fn lateral_arc(side: f64, t: f64, scale: f64) -> ([f64; 3], f64) {
    let bulge = libm::sin(core::f64::consts::PI * t);
    let center = [
        CENTER[0] + side * (0.085 + 0.02 * bulge),
        CENTER[1] + 0.30 * (t - 0.45),
        CENTER[2] + 0.06 * bulge + 0.01,
    ];
    let radius = scale * (0.036 + 0.012 * bulge);
    (center, radius)
}

/// Midline third and fourth ventricle primitives: (center, semi-axes).
fn midline_parts(scale: f64) -> [([f64; 3], [f64; 3]); 2] {
    [
        (
            [CENTER[0], CENTER[1] - 0.02, CENTER[2] - 0.05],
            [0.012 * scale + 0.006, 0.05 * scale, 0.04 * scale],
        ),
        (
            [CENTER[0], CENTER[1] - 0.14, CENTER[2] - 0.13],
            [0.024 * scale, 0.024 * scale, 0.024 * scale],
        ),
    ]
}

const ARC_STEPS: usize = 12;

fn inside_ventricles(u: [f64; 3], scale: f64) -> bool {
    for side in [-1.0, 1.0] {
        for s in 0..=ARC_STEPS {
            let t = s as f64 / ARC_STEPS as f64;
            let (c, r) = lateral_arc(side, t, scale);
            let d2 = (u[0] - c[0]) * (u[0] - c[0])
                + (u[1] - c[1]) * (u[1] - c[1])
                + (u[2] - c[2]) * (u[2] - c[2]);
            if d2 <= r * r {
                return true;
            }
        }
    }
    for (c, semi) in midline_parts(scale) {
        let mut q = 0.0;
        for a in 0..3 {
            let d = (u[a] - c[a]) / semi[a];
            q += d * d;
        }
        if q <= 1.0 {
            return true;
        }
    }
    false
}

fn inside_brain(u: [f64; 3]) -> bool {
    let mut q = 0.0;
    for a in 0..3 {
        let d = (u[a] - CENTER[a]) / BRAIN_SEMI[a];
        q += d * d;
    }
    q <= 1.0
}

fn box_muller(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

/// Generate one phantom. Brain and ventricle shapes depend only on
/// `age_param` and the grid; lesions and noise consume the seed.
pub fn make_phantom(spec: &PhantomSpec) -> PhantomSubject {
    let geom = Geometry::axial(spec.dims, spec.spacing);
    let scale = age_scale(spec.age_param.clamp(0.0, 1.0));
    let n = geom.len();
    let dims = spec.dims;

    let norm = |i: usize, a: usize| (i as f64 + 0.5) / dims[a] as f64;

    let mut brain = Mask::empty(geom.clone());
    let mut vent = Mask::empty(geom.clone());
    let mut lin = 0usize;
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let u = [norm(i, 0), norm(j, 1), norm(k, 2)];
                if inside_brain(u) {
                    brain.set(lin, true);
                    if inside_ventricles(u, scale) {
                        vent.set(lin, true);
                    }
                }
                lin += 1;
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut wmh = Mask::empty(geom.clone());
    let blob_count = libm::round(spec.wmh_load.clamp(0.0, 1.0) * 8.0) as usize;
    for _ in 0..blob_count {
        let t: f64 = rng.gen_range(0.1..0.9);
        let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let (arc_c, arc_r) = lateral_arc(side, t, scale);
        let offset: f64 = rng.gen_range(0.03..0.07);
        let jy: f64 = rng.gen_range(-0.02..0.02);
        let jz: f64 = rng.gen_range(-0.02..0.02);
        let c = [arc_c[0] + side * (arc_r + offset), arc_c[1] + jy, arc_c[2] + jz];
        let r: f64 = rng.gen_range(0.018..0.034);
        stamp_sphere(&mut wmh, &brain, &vent, dims, c, r);
    }

    let mut flair = Volume::filled(geom, 0.0);
    for lin in 0..n {
        let v = if !brain.get(lin) {
            0.0
        } else if vent.get(lin) {
            VENTRICLE_INTENSITY
        } else if wmh.get(lin) {
            WMH_INTENSITY
        } else {
            BRAIN_INTENSITY
        };
        flair.data_mut()[lin] = v;
    }
    if spec.noise_sigma > 0.0 {
        for v in flair.data_mut() {
            *v = (*v as f64 + spec.noise_sigma * box_muller(&mut rng)) as f32;
        }
    }

    PhantomSubject { flair, brain, ventricles: vent, wmh, generator_atlas: None, true_deformation: None }
}

fn stamp_sphere(
    wmh: &mut Mask,
    brain: &Mask,
    vent: &Mask,
    dims: [usize; 3],
    c: [f64; 3],
    r: f64,
) {
    let lo = |a: usize| (((c[a] - r) * dims[a] as f64 - 1.0).max(0.0)) as usize;
    let hi = |a: usize| (((c[a] + r) * dims[a] as f64 + 1.0) as usize).min(dims[a] - 1);
    for k in lo(2)..=hi(2) {
        for j in lo(1)..=hi(1) {
            for i in lo(0)..=hi(0) {
                let u = [
                    (i as f64 + 0.5) / dims[0] as f64,
                    (j as f64 + 0.5) / dims[1] as f64,
                    (k as f64 + 0.5) / dims[2] as f64,
                ];
                let d2 = (u[0] - c[0]) * (u[0] - c[0])
                    + (u[1] - c[1]) * (u[1] - c[1])
                    + (u[2] - c[2]) * (u[2] - c[2]);
                let lin = i + dims[0] * (j + dims[1] * k);
                if d2 <= r * r && brain.get(lin) && !vent.get(lin) {
                    wmh.set(lin, true);
                }
            }
        }
    }
}

/// Random smooth stationary velocity field: Gaussian-smoothed white noise
/// rescaled so the maximum forward displacement stays below `max_disp_mm`.
pub fn random_svf(
    geom: &Geometry,
    seed: u64,
    max_disp_mm: f64,
    smooth_sigma_voxels: f64,
) -> Result<Diffeo> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = geom.len();
    let mut data: Vec<[f32; 3]> = Vec::with_capacity(n);
    for _ in 0..n {
        data.push([
            rng.gen_range(-1.0f32..1.0),
            rng.gen_range(-1.0f32..1.0),
            rng.gen_range(-1.0f32..1.0),
        ]);
    }
    let mut v = DisplacementField::new(geom.clone(), data)?
        .smoothed([smooth_sigma_voxels; 3]);
    if max_disp_mm <= 0.0 {
        let mut z = v;
        z.scale(0.0);
        return Diffeo::from_velocity(z, 4);
    }
    let vmax = v.max_norm_mm();
    if vmax > 0.0 {
        v.scale(max_disp_mm / vmax);
    }
    let mut diffeo = Diffeo::from_velocity(v.clone(), 6)?;
    for _ in 0..4 {
        let got = diffeo.forward().max_norm_mm();
        if got <= max_disp_mm * 1.000001 {
            break;
        }
        v.scale(max_disp_mm / got);
        diffeo = Diffeo::from_velocity(v.clone(), 6)?;
    }
    Ok(diffeo)
}

/// Like [`random_svf`] but with a fraction of the displacement budget spent
/// on a constant drift, so central structures are actually transported
/// instead of only jittered. The cap on the forward displacement still
/// holds.
pub fn random_svf_with_drift(
    geom: &Geometry,
    seed: u64,
    max_disp_mm: f64,
    smooth_sigma_voxels: f64,
    drift_fraction: f64,
) -> Result<Diffeo> {
    let f = drift_fraction.clamp(0.0, 1.0);
    let local = random_svf(geom, seed, max_disp_mm * (1.0 - f), smooth_sigma_voxels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd21f7);
    let dir = loop {
        let d = [
            rng.gen_range(-1.0f64..1.0),
            rng.gen_range(-1.0f64..1.0),
            rng.gen_range(-1.0f64..1.0),
        ];
        let n = libm::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
        if n > 1e-3 {
            break [d[0] / n, d[1] / n, d[2] / n];
        }
    };
    let drift = [
        (dir[0] * f * max_disp_mm) as f32,
        (dir[1] * f * max_disp_mm) as f32,
        (dir[2] * f * max_disp_mm) as f32,
    ];
    let mut v = local.velocity().clone();
    for d in v.data_mut() {
        for a in 0..3 {
            d[a] += drift[a];
        }
    }
    let mut diffeo = Diffeo::from_velocity(v.clone(), 6)?;
    for _ in 0..4 {
        let got = diffeo.forward().max_norm_mm();
        if got <= max_disp_mm * 1.000001 {
            break;
        }
        v.scale(max_disp_mm / got);
        diffeo = Diffeo::from_velocity(v.clone(), 6)?;
    }
    Ok(diffeo)
}

/// Registration parameters recommended for atlas-set construction: the
/// atlas-to-general transforms are computed once and reused everywhere, so
/// extra iterations and a tighter velocity smoothing pay for themselves.
pub fn atlas_build_params() -> RegParams {
    RegParams {
        iters_per_level: alloc::vec![200, 150, 100],
        diffusion_sigma: 0.7,
        ..RegParams::default()
    }
}

/// Build the five age atlases plus the general atlas from noise-free
/// phantoms: the general image is the voxelwise mean, its ventricles are the
/// majority vote of the five masks, and each age atlas is diffeomorphically
/// registered to the general image to populate its transform.
pub fn make_atlas_set(base: &PhantomSpec, reg: &RegParams) -> Result<AtlasSet> {
    let mut images = Vec::new();
    let mut vents = Vec::new();
    for age in ATLAS_AGE_PARAMS {
        let spec = PhantomSpec {
            age_param: age,
            wmh_load: 0.0,
            noise_sigma: 0.0,
            seed: 0,
            ..base.clone()
        };
        let ph = make_phantom(&spec);
        images.push(ph.flair);
        vents.push(ph.ventricles);
    }
    let general_image = build_general_atlas(&images)?;

    // Majority vote over the five masks, thresholded from the mean.
    let geom = general_image.geom().clone();
    let mut vg = Mask::empty(geom.clone());
    for lin in 0..geom.len() {
        let votes: usize = vents.iter().map(|m| m.get(lin) as usize).sum();
        if votes * 2 >= vents.len() + 1 {
            vg.set(lin, true);
        }
    }

    let general_rescaled = crate::intensity::minmax_rescale(&general_image)?;
    let mut atlases = Vec::new();
    for ((id, image), band) in ATLAS_IDS.iter().zip(images).zip(AgeBand::AGE_BANDS) {
        let moving = crate::intensity::minmax_rescale(&image)?;
        let dreg = register_diffeo(&moving, &general_rescaled, reg)?;
        atlases.push(Atlas {
            id: String::from(*id),
            age_band: band,
            image,
            to_general: dreg.diffeo,
        });
    }
    atlases.push(Atlas {
        id: String::from("g"),
        age_band: AgeBand::General,
        image: general_image,
        to_general: Diffeo::identity(geom),
    });
    AtlasSet::new(atlases, vg)
}

/// Cohort construction knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortParams {
    pub max_disp_mm: f64,
    pub svf_sigma_voxels: f64,
    pub noise_sigma: f64,
    pub wmh_load_range: (f64, f64),
}

impl Default for CohortParams {
    fn default() -> Self {
        Self {
            max_disp_mm: 8.0,
            svf_sigma_voxels: 4.0,
            noise_sigma: 0.03,
            wmh_load_range: (0.25, 1.0),
        }
    }
}

/// Generate subjects by deforming randomly chosen age atlases with random
/// smooth fields, adding lesions and noise. The generator id and the true
/// deformation are recorded as ground truth.
pub fn make_cohort(
    n: usize,
    s: &AtlasSet,
    params: &CohortParams,
    seed: u64,
) -> Result<Vec<PhantomSubject>> {
    let geom = s.general().image.geom().clone();
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut cohort = Vec::with_capacity(n);
    for _ in 0..n {
        let sub_seed = master.next_u64();
        let atlas_idx = master.gen_range(0..ATLAS_AGE_PARAMS.len());
        let wmh_load = master.gen_range(params.wmh_load_range.0..=params.wmh_load_range.1);
        cohort.push(make_deformed_subject(
            &geom, atlas_idx, wmh_load, params, sub_seed,
        )?);
    }
    Ok(cohort)
}

/// One cohort subject: the age atlas phantom at `atlas_idx`, deformed by a
/// random smooth field, with lesions and noise added afterwards.
pub fn make_deformed_subject(
    geom: &Geometry,
    atlas_idx: usize,
    wmh_load: f64,
    params: &CohortParams,
    seed: u64,
) -> Result<PhantomSubject> {
    let spec = PhantomSpec {
        dims: geom.dims,
        spacing: geom.spacing,
        age_param: ATLAS_AGE_PARAMS[atlas_idx],
        wmh_load,
        noise_sigma: 0.0,
        seed,
    };
    let base = make_phantom(&spec);
    let svf = random_svf(geom, seed ^ 0x5eed_5eed, params.max_disp_mm, params.svf_sigma_voxels)?;

    let fwd = svf.forward();
    let mut flair = warp(&base.flair, fwd, InterpMode::Linear);
    let brain = warp_mask_field(&base.brain, fwd);
    let ventricles = warp_mask_field(&base.ventricles, fwd);
    let wmh = warp_mask_field(&base.wmh, fwd);

    if params.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6e6f_6973);
        for v in flair.data_mut() {
            *v = (*v as f64 + params.noise_sigma * box_muller(&mut rng)) as f32;
        }
    }

    Ok(PhantomSubject {
        flair,
        brain,
        ventricles,
        wmh,
        generator_atlas: Some(String::from(ATLAS_IDS[atlas_idx])),
        true_deformation: Some(svf),
    })
}
