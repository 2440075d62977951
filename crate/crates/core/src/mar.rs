//! Multi-atlas registration: register a subject to every atlas, propagate
//! the general atlas's ventricles through the composed inverse transforms,
//! score each route by ventricle overlap (or cross-correlation), select the
//! best intermediary, and compose the route to general-atlas space.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::intensity::minmax_rescale;
use crate::metrics::{confusion, dice};
use crate::register::{
    cc_similarity, register_affine, register_diffeo, warp_mask_with, warp_with, Affine3, Diffeo,
    DisplacementField, RegParams, TransformChain, TransformStep,
};
use crate::volume::{InterpMode, Mask, Volume};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AgeBand {
    Under70,
    From70To75,
    From75To80,
    From80To85,
    Over85,
    General,
}

impl AgeBand {
    pub const AGE_BANDS: [AgeBand; 5] = [
        AgeBand::Under70,
        AgeBand::From70To75,
        AgeBand::From75To80,
        AgeBand::From80To85,
        AgeBand::Over85,
    ];

    /// Position within the age-ordered bands; the general atlas has none.
    pub fn rank(&self) -> Option<usize> {
        match self {
            AgeBand::Under70 => Some(0),
            AgeBand::From70To75 => Some(1),
            AgeBand::From75To80 => Some(2),
            AgeBand::From80To85 => Some(3),
            AgeBand::Over85 => Some(4),
            AgeBand::General => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            AgeBand::Under70 => "under70",
            AgeBand::From70To75 => "70-75",
            AgeBand::From75To80 => "75-80",
            AgeBand::From80To85 => "80-85",
            AgeBand::Over85 => "over85",
            AgeBand::General => "general",
        }
    }

    pub fn from_label(s: &str) -> Option<AgeBand> {
        match s {
            "under70" => Some(AgeBand::Under70),
            "70-75" => Some(AgeBand::From70To75),
            "75-80" => Some(AgeBand::From75To80),
            "80-85" => Some(AgeBand::From80To85),
            "over85" => Some(AgeBand::Over85),
            "general" => Some(AgeBand::General),
            _ => None,
        }
    }
}

/// One reference image plus its transform to the general atlas (identity
/// for the general atlas itself).
#[derive(Debug, Clone)]
pub struct Atlas {
    pub id: String,
    pub age_band: AgeBand,
    pub image: Volume,
    pub to_general: Diffeo,
}

/// The five age-banded atlases plus the general atlas and its manually
/// defined ventricle mask.
#[derive(Debug, Clone)]
pub struct AtlasSet {
    atlases: Vec<Atlas>,
    ventricles_general: Mask,
}

impl AtlasSet {
    pub fn new(atlases: Vec<Atlas>, ventricles_general: Mask) -> Result<Self> {
        let generals = atlases.iter().filter(|a| a.age_band == AgeBand::General).count();
        if generals != 1 {
            return Err(Error::InvalidGeometry("atlas set needs exactly one general atlas"));
        }
        if ventricles_general.is_blank() {
            return Err(Error::EmptyReference);
        }
        let set = Self { atlases, ventricles_general };
        let g = set.general();
        if !g.image.geom().compatible(set.ventricles_general.geom()) {
            return Err(Error::GeometryMismatch);
        }
        Ok(set)
    }

    pub fn atlases(&self) -> &[Atlas] {
        &self.atlases
    }

    pub fn general(&self) -> &Atlas {
        self.atlases
            .iter()
            .find(|a| a.age_band == AgeBand::General)
            .expect("validated at construction")
    }

    pub fn by_id(&self, id: &str) -> Option<&Atlas> {
        self.atlases.iter().find(|a| a.id == id)
    }

    pub fn ventricles_general(&self) -> &Mask {
        &self.ventricles_general
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    VentricleDice,
    CrossCorrelation,
}

impl Strategy {
    pub fn label(&self) -> &'static str {
        match self {
            Strategy::VentricleDice => "dice",
            Strategy::CrossCorrelation => "cc",
        }
    }
}

/// A completed subject-to-atlas registration (moving = subject,
/// fixed = atlas): affine initialization plus deformable refinement on the
/// atlas grid.
#[derive(Debug, Clone)]
pub struct PairReg {
    pub affine: Affine3,
    pub diffeo: Diffeo,
}

impl PairReg {
    /// Map atlas-space points into subject space; warping the subject with
    /// this chain lands it on the atlas grid.
    pub fn to_moving(&self) -> TransformChain {
        TransformChain::from_field(self.diffeo.forward().clone())
            .then(TransformStep::Affine(self.affine))
    }

    /// Map subject-space points into atlas space; warping atlas content
    /// with this chain lands it on the subject grid.
    pub fn to_fixed(&self) -> TransformChain {
        let inv = self.affine.inverse().expect("registration affines are invertible");
        TransformChain::from_affine(inv)
            .then(TransformStep::Displacement(self.diffeo.inverse().clone()))
    }
}

/// Everything recorded for one subject-to-atlas route.
#[derive(Debug, Clone)]
pub struct AtlasOutcome {
    pub atlas_id: String,
    pub age_band: AgeBand,
    pub pair: PairReg,
    /// Ventricle-overlap quality: Dice of the CNN mask against the general
    /// atlas ventricles propagated through this route.
    pub dice_q: f64,
    /// Cross-correlation of the warped subject against the atlas image.
    pub cc_q: f64,
    /// Both the subject mask and the propagated mask were empty.
    pub ventricles_missing: bool,
    pub affine_converged: bool,
    pub diffeo_converged: bool,
}

#[derive(Debug, Clone)]
pub struct MarResult {
    pub strategy: Strategy,
    /// Strategy metric per atlas id; atlases whose registration failed are
    /// absent.
    pub per_atlas_quality: BTreeMap<String, f64>,
    /// Ventricle-Dice quality per atlas id, recorded for both strategies.
    pub dice_quality: BTreeMap<String, f64>,
    pub selected: String,
    /// Ventricle-Dice gain of the selected route over the direct route.
    pub gain: f64,
    /// Baked pull-back field on the general grid: warping the subject with
    /// it produces the subject in general-atlas space.
    pub final_forward: DisplacementField,
    /// Baked pull-back field on the subject grid (the inverse route).
    pub final_inverse: DisplacementField,
    pub flags: Vec<String>,
}

impl MarResult {
    /// Ventricle-Dice quality of the direct (general-atlas) route.
    pub fn general_quality(&self) -> f64 {
        self.gain_pair().1
    }

    fn gain_pair(&self) -> (f64, f64) {
        let sel = self.dice_quality.get(&self.selected).copied().unwrap_or(0.0);
        let gen = sel - self.gain;
        (sel, gen)
    }
}

/// Propagate the general atlas's ventricles into subject space through the
/// atlas `a`: inverse atlas-to-general displacement, then the inverse of the
/// subject registration, with a single nearest-neighbour resampling.
pub fn propagate_ventricles(
    s: &AtlasSet,
    a: &Atlas,
    reg: &PairReg,
    subject_geom: &Geometry,
) -> Result<Mask> {
    if !reg.diffeo.geom().compatible(a.image.geom()) {
        return Err(Error::GeometryMismatch);
    }
    let chain = reg
        .to_fixed()
        .then(TransformStep::Displacement(a.to_general.inverse().clone()));
    Ok(warp_mask_with(s.ventricles_general(), subject_geom, &chain))
}

/// Dice between the subject's segmented ventricles and a propagated mask.
/// When both are empty the quality is 0 and the subject should be flagged:
/// the ventricles could not be identified at all.
pub fn quality_dice(v_cnn: &Mask, v_prop: &Mask) -> Result<f64> {
    if v_cnn.dims() != v_prop.dims() {
        return Err(Error::DimMismatch);
    }
    let c = confusion(v_cnn, v_prop)?;
    if c.ref_volume() + c.pred_volume() == 0 {
        return Ok(0.0);
    }
    Ok(dice(&c))
}

/// Register one subject to one atlas and score the route both ways.
/// `x_rescaled` must already be minmax-rescaled to [0, 1].
pub fn register_to_atlas(
    x_rescaled: &Volume,
    v_cnn: &Mask,
    s: &AtlasSet,
    atlas: &Atlas,
    p: &RegParams,
) -> Result<AtlasOutcome> {
    let atlas_rescaled = minmax_rescale(&atlas.image)?;
    let aff = register_affine(x_rescaled, &atlas_rescaled, p);
    let pre_aligned = warp_with(
        x_rescaled,
        atlas.image.geom(),
        &TransformChain::from_affine(aff.transform),
        InterpMode::Linear,
    );
    let dreg = register_diffeo(&pre_aligned, &atlas_rescaled, p)?;
    let pair = PairReg { affine: aff.transform, diffeo: dreg.diffeo.clone() };

    let v_prop = propagate_ventricles(s, atlas, &pair, v_cnn.geom())?;
    let dice_q = quality_dice(v_cnn, &v_prop)?;
    let ventricles_missing = v_cnn.is_blank() && v_prop.is_blank();

    let warped = warp_with(x_rescaled, atlas.image.geom(), &pair.to_moving(), InterpMode::Linear);
    let cc_q = cc_similarity(&warped, &atlas_rescaled)?;

    Ok(AtlasOutcome {
        atlas_id: atlas.id.clone(),
        age_band: atlas.age_band,
        pair,
        dice_q,
        cc_q,
        ventricles_missing,
        affine_converged: aff.converged,
        diffeo_converged: dreg.converged,
    })
}

/// Argmax with deterministic tie-breaking: exact ties prefer the general
/// atlas, then the younger age band. Returns the index of the winner.
pub fn select_atlas(entries: &[(AgeBand, f64)]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (band, q)) in entries.iter().enumerate() {
        if !q.is_finite() {
            continue;
        }
        match best {
            None => best = Some(i),
            Some(j) => {
                let (bband, bq) = entries[j];
                if *q > bq || (*q == bq && tie_wins(*band, bband)) {
                    best = Some(i);
                }
            }
        }
    }
    best
}

fn tie_wins(candidate: AgeBand, incumbent: AgeBand) -> bool {
    match (candidate.rank(), incumbent.rank()) {
        (None, Some(_)) => true,
        (Some(_), None) => false,
        (Some(c), Some(i)) => c < i,
        (None, None) => false,
    }
}

/// Merge per-atlas outcomes into the final selection. Failed registrations
/// arrive as errors and are excluded from the argmax.
pub fn assemble_mar(
    s: &AtlasSet,
    subject_geom: &Geometry,
    outcomes: Vec<(String, Result<AtlasOutcome>)>,
    strategy: Strategy,
) -> Result<MarResult> {
    let mut flags: Vec<String> = Vec::new();
    let mut ok: Vec<AtlasOutcome> = Vec::new();
    for (id, res) in outcomes {
        match res {
            Ok(o) => {
                if o.ventricles_missing {
                    flags.push(alloc::format!("{id}: ventricles not identifiable"));
                }
                if !o.affine_converged || !o.diffeo_converged {
                    flags.push(alloc::format!("{id}: registration did not converge"));
                }
                ok.push(o);
            }
            Err(e) => flags.push(alloc::format!("{id}: registration failed ({e})")),
        }
    }
    if ok.is_empty() {
        return Err(Error::AllRegistrationsFailed);
    }

    let mut per_atlas_quality = BTreeMap::new();
    let mut dice_quality = BTreeMap::new();
    for o in &ok {
        let q = match strategy {
            Strategy::VentricleDice => o.dice_q,
            Strategy::CrossCorrelation => o.cc_q,
        };
        per_atlas_quality.insert(o.atlas_id.clone(), q);
        dice_quality.insert(o.atlas_id.clone(), o.dice_q);
    }

    let entries: Vec<(AgeBand, f64)> = ok
        .iter()
        .map(|o| (o.age_band, per_atlas_quality[&o.atlas_id]))
        .collect();
    let winner = select_atlas(&entries).ok_or(Error::AllRegistrationsFailed)?;
    let selected = &ok[winner];

    let general_id = s.general().id.clone();
    let general_dice = *dice_quality.get(&general_id).ok_or(Error::MissingGeneralQuality)?;
    let gain = selected.dice_q - general_dice;

    // Route to general space through the winner: general-grid points flow
    // through the atlas-to-general displacement, then the subject
    // registration; the inverse runs the other way from the subject grid.
    let atlas = s.by_id(&selected.atlas_id).expect("outcome ids come from the set");
    let fwd_chain = TransformChain::from_field(atlas.to_general.forward().clone())
        .then_chain(selected.pair.to_moving());
    let inv_chain = selected
        .pair
        .to_fixed()
        .then(TransformStep::Displacement(atlas.to_general.inverse().clone()));
    let final_forward = fwd_chain.bake(s.general().image.geom())?;
    let final_inverse = inv_chain.bake(subject_geom)?;

    Ok(MarResult {
        strategy,
        per_atlas_quality,
        dice_quality,
        selected: selected.atlas_id.clone(),
        gain,
        final_forward,
        final_inverse,
        flags,
    })
}

/// The full framework for one subject: register to every atlas, score,
/// select, compose. `x` must be percentile-normalized; `v_cnn` is the
/// subject-space ventricle mask.
pub fn run_mar(
    x: &Volume,
    v_cnn: &Mask,
    s: &AtlasSet,
    p: &RegParams,
    strategy: Strategy,
) -> Result<MarResult> {
    let x_rescaled = minmax_rescale(x)?;
    let outcomes: Vec<(String, Result<AtlasOutcome>)> = s
        .atlases()
        .iter()
        .map(|a| (a.id.clone(), register_to_atlas(&x_rescaled, v_cnn, s, a, p)))
        .collect();
    assemble_mar(s, x.geom(), outcomes, strategy)
}

/// Voxelwise mean of pre-aligned volumes.
pub fn build_general_atlas(aligned: &[Volume]) -> Result<Volume> {
    let first = aligned.first().ok_or(Error::EmptyList)?;
    let mut acc = alloc::vec![0.0f64; first.geom().len()];
    for v in aligned {
        if !v.geom().compatible(first.geom()) {
            return Err(Error::GeometryMismatch);
        }
        for (a, &x) in acc.iter_mut().zip(v.data()) {
            *a += x as f64;
        }
    }
    let n = aligned.len() as f64;
    let data = acc.iter().map(|&a| (a / n) as f32).collect();
    Volume::new(first.geom().clone(), data)
}
