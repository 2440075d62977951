//! Shared fixtures for the expensive acceptance runs: one atlas set, one
//! 30-subject cohort with the per-atlas registrations computed a single
//! time, and one mixed-quality cohort for the burden-map criterion.

use std::sync::OnceLock;

use rayon::prelude::*;

use ventriq_core::intensity::percentile_normalize;
use ventriq_core::mar::{assemble_mar, register_to_atlas, AtlasOutcome, AtlasSet, MarResult, Strategy};
use ventriq_core::phantom::{
    atlas_build_params, make_atlas_set, make_cohort, make_deformed_subject, CohortParams,
    PhantomSpec, PhantomSubject,
};
use ventriq_core::register::RegParams;
use ventriq_core::segment::{rule_based_ventricle_segment, SegmenterConfig};
use ventriq_core::Result as CoreResult;

pub const COHORT_SEED: u64 = 4242;
pub const COHORT_SIZE: usize = 30;

pub struct SubjectRun {
    pub subject: PhantomSubject,
    pub outcomes: Vec<(String, CoreResult<AtlasOutcome>)>,
}

impl SubjectRun {
    pub fn assemble(&self, set: &AtlasSet, strategy: Strategy) -> MarResult {
        let cloned: Vec<(String, CoreResult<AtlasOutcome>)> = self.outcomes.to_vec();
        assemble_mar(set, self.subject.flair.geom(), cloned, strategy)
            .expect("cohort subjects register to at least one atlas")
    }
}

pub struct Context {
    pub set: AtlasSet,
    pub runs: Vec<SubjectRun>,
}

static ATLAS: OnceLock<AtlasSet> = OnceLock::new();
static CONTEXT: OnceLock<Context> = OnceLock::new();

pub fn atlas_set() -> &'static AtlasSet {
    ATLAS.get_or_init(|| {
        make_atlas_set(&PhantomSpec::default(), &atlas_build_params())
            .expect("atlas construction succeeds")
    })
}

fn register_subject(subject: PhantomSubject, set: &AtlasSet, reg: &RegParams) -> SubjectRun {
    let norm = percentile_normalize(&subject.flair).expect("phantoms are non-constant");
    let v_cnn = rule_based_ventricle_segment(&norm, &subject.brain, &SegmenterConfig::default())
        .expect("phantom brains are non-empty");
    let rescaled = ventriq_core::intensity::minmax_rescale(&norm).expect("non-constant");
    let outcomes = set
        .atlases()
        .iter()
        .map(|a| (a.id.clone(), register_to_atlas(&rescaled, &v_cnn, set, a, reg)))
        .collect();
    SubjectRun { subject, outcomes }
}

/// The 30-subject cohort shared by the MAR criteria. Registrations run once
/// and both selection strategies are derived from the same outcomes.
pub fn cohort() -> &'static Context {
    CONTEXT.get_or_init(|| {
        let set = atlas_set().clone();
        let subjects = make_cohort(COHORT_SIZE, &set, &CohortParams::default(), COHORT_SEED)
            .expect("cohort generation succeeds");
        let reg = RegParams::default();
        let runs: Vec<SubjectRun> = subjects
            .into_par_iter()
            .map(|s| register_subject(s, &set, &reg))
            .collect();
        Context { set, runs }
    })
}

pub struct BurdenSubject {
    pub run: SubjectRun,
    pub label: &'static str,
}

static BURDEN: OnceLock<Vec<BurdenSubject>> = OnceLock::new();

/// Mixed-quality cohort for the burden-map criterion: clean mid-age
/// subjects that register almost perfectly, ordinary subjects, and heavily
/// corrupted ones whose registrations genuinely fail the quality bar.
pub fn burden_cohort() -> &'static Vec<BurdenSubject> {
    BURDEN.get_or_init(|| {
        let set = atlas_set();
        let geom = set.general().image.geom().clone();
        let reg = RegParams::default();
        let clean = CohortParams { max_disp_mm: 2.5, noise_sigma: 0.02, ..CohortParams::default() };
        let typical = CohortParams::default();
        let corrupt = CohortParams {
            max_disp_mm: 22.0,
            svf_sigma_voxels: 3.0,
            noise_sigma: 0.15,
            ..CohortParams::default()
        };
        let plan: Vec<(&CohortParams, usize, u64, &'static str)> = vec![
            (&clean, 2, 9001, "clean"),
            (&clean, 2, 9002, "clean"),
            (&clean, 1, 9003, "clean"),
            (&clean, 3, 9004, "clean"),
            (&typical, 1, 9005, "typical"),
            (&typical, 3, 9006, "typical"),
            (&typical, 4, 9007, "typical"),
            (&corrupt, 0, 9008, "corrupt"),
            (&corrupt, 2, 9009, "corrupt"),
            (&corrupt, 4, 9010, "corrupt"),
        ];
        plan.into_par_iter()
            .map(|(params, atlas_idx, seed, label)| {
                let subject = make_deformed_subject(&geom, atlas_idx, 0.7, params, seed)
                    .expect("subject generation succeeds");
                BurdenSubject { run: register_subject(subject, set, &reg), label }
            })
            .collect()
    })
}
