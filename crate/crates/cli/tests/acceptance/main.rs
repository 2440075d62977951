//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line. Run with `cargo test -p ventriq --test acceptance -- --nocapture`.

mod context;
mod oracles;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use ventriq_core::components::Connectivity;
use ventriq_core::mar::{quality_dice, Strategy};
use ventriq_core::metrics::{der_oer, metric_panel};
use ventriq_core::phantom::{make_phantom, random_svf_with_drift, PhantomSpec};
use ventriq_core::register::{
    register_affine, register_diffeo, warp_mask_with, warp_with, DisplacementField, RegParams,
    TransformChain, TransformStep,
};
use ventriq_core::segment::{binarize, remove_small_components};
use ventriq_core::stats::{spearman_rho, wilcoxon_signed_rank};
use ventriq_core::{Geometry, InterpMode, Mask, Volume};

fn report(criterion: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {criterion:2} [{verdict}] {name}: {detail}");
    assert!(pass, "criterion {criterion} ({name}) failed: {detail}");
}

fn random_mask(rng: &mut ChaCha8Rng, dims: [usize; 3], density: f64) -> Mask {
    let g = Geometry::axial(dims, [1.0; 3]);
    let data = (0..g.len()).map(|_| rng.gen_bool(density) as u8).collect();
    Mask::new(g, data).unwrap()
}

fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => (a - b).abs() <= tol,
        (None, None) => true,
        _ => false,
    }
}

#[test]
fn criterion_01_metric_oracle_equivalence() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut checked = 0usize;
    for trial in 0..200 {
        let density = rng.gen_range(0.05..0.6);
        let a = random_mask(&mut rng, [8, 8, 8], density);
        let b = random_mask(&mut rng, [8, 8, 8], density);
        let p = metric_panel(&a, &b).unwrap();
        let tol = 1e-10;
        assert!(close(p.dice, Some(oracles::dice(&a, &b)), tol), "dice, trial {trial}");
        assert!(close(p.jaccard, Some(oracles::jaccard(&a, &b)), tol), "jaccard, trial {trial}");
        assert!(close(p.tpr, oracles::tpr(&a, &b), tol), "tpr, trial {trial}");
        assert!(
            close(p.vs, Some(oracles::volumetric_similarity(&a, &b)), tol),
            "vs, trial {trial}"
        );
        assert!(close(p.mi, Some(oracles::normalized_mi(&a, &b)), tol), "mi, trial {trial}");
        assert!(close(p.ari, Some(oracles::ari_pairs(&a, &b)), tol), "ari, trial {trial}");
        assert!(close(p.icc, oracles::icc(&a, &b), tol), "icc, trial {trial}");
        assert!(close(p.pbd, Some(oracles::pbd_rescaled(&a, &b)), tol), "pbd, trial {trial}");
        assert!(close(p.kap, Some(oracles::kappa(&a, &b)), tol), "kap, trial {trial}");
        let (der_raw, oer_raw) = oracles::der_oer_raw(&a, &b);
        assert!(close(p.der, Some(1.0 - der_raw / 2.0), tol), "der, trial {trial}");
        assert!(close(p.oer, Some(1.0 - oer_raw / 2.0), tol), "oer, trial {trial}");
        checked += 1;
    }

    // Hand-enumerated region case: a = {0,1} u {4}, b = {0,1,2} on 6x1x1.
    let g = Geometry::axial([6, 1, 1], [1.0; 3]);
    let a = Mask::new(g.clone(), vec![1, 1, 0, 0, 1, 0]).unwrap();
    let b = Mask::new(g, vec![1, 1, 1, 0, 0, 0]).unwrap();
    let (der_raw, oer_raw) = der_oer(&a, &b, Connectivity::TwentySix).unwrap();
    assert!((der_raw - 1.0 / 3.0).abs() < 1e-12 && (oer_raw - 1.0 / 3.0).abs() < 1e-12);

    let elapsed = t0.elapsed();
    report(
        1,
        "metric-oracle equivalence",
        elapsed.as_secs_f64() < 10.0,
        &format!("{checked} pairs x 11 metrics within 1e-10, plus DER/OER = 1/3 case, in {elapsed:.2?}"),
    );
}

#[test]
fn criterion_02_identity_panel() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for trial in 0..50 {
        let density = rng.gen_range(0.05..0.7);
        let mut a = random_mask(&mut rng, [8, 8, 8], density);
        if a.is_blank() {
            a.set(trial, true);
        }
        let p = metric_panel(&a, &a).unwrap();
        for (name, v) in ventriq_core::metrics::MetricPanel::NAMES.iter().zip(p.values()) {
            let v = v.unwrap_or(-1.0);
            assert!((v - 1.0).abs() < 1e-12, "{name} = {v} on trial {trial}");
        }
    }
    // Disjoint pairs: overlap metrics are exactly zero.
    let g = Geometry::axial([8, 8, 8], [1.0; 3]);
    let mut a = Mask::empty(g.clone());
    let mut b = Mask::empty(g);
    for i in 0..40 {
        a.set(i, true);
        b.set(200 + i, true);
    }
    let p = metric_panel(&a, &b).unwrap();
    assert_eq!(p.dice, Some(0.0));
    assert_eq!(p.jaccard, Some(0.0));
    assert_eq!(p.tpr, Some(0.0));

    let elapsed = t0.elapsed();
    report(
        2,
        "identity panel",
        elapsed.as_secs_f64() < 5.0,
        &format!("50 self-panels all ones; disjoint dice/jaccard/tpr = 0; {elapsed:.2?}"),
    );
}

#[test]
fn criterion_03_postprocessing_contract() {
    // A 4-voxel component is removed, a 5-voxel component is kept.
    let g = Geometry::axial([20, 3, 3], [1.0; 3]);
    let mut m = Mask::empty(g.clone());
    for i in 1..5 {
        let idx = m.geom().index(i, 1, 1);
        m.set(idx, true);
    }
    for i in 9..14 {
        let idx = m.geom().index(i, 1, 1);
        m.set(idx, true);
    }
    let kept = remove_small_components(&m, 5, Connectivity::TwentySix);
    let four_alive = (1..5).any(|i| kept.get(kept.geom().index(i, 1, 1)));
    let five_alive = (9..14).all(|i| kept.get(kept.geom().index(i, 1, 1)));

    // Binarization boundary: exactly 0.5 maps to foreground.
    let vg = Geometry::axial([3, 1, 1], [1.0; 3]);
    let v = Volume::new(vg, vec![0.5, 0.49999997, 0.50000006]).unwrap();
    let bm = binarize(&v, 0.5);
    let boundary_ok = bm.data() == [1, 0, 1];

    report(
        3,
        "post-processing contract",
        !four_alive && five_alive && boundary_ok,
        &format!(
            "4-voxel removed: {}, 5-voxel kept: {}, binarize(0.5) boundary foreground: {}",
            !four_alive, five_alive, boundary_ok
        ),
    );
}

#[test]
fn criterion_04_registration_recovery() {
    let t0 = Instant::now();
    let reg = RegParams::default();
    let results: Vec<(f64, f64, f64)> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let base = make_phantom(&PhantomSpec {
                seed: 400 + seed,
                wmh_load: 0.4,
                ..PhantomSpec::default()
            });
            let svf = random_svf_with_drift(base.flair.geom(), 4000 + seed, 8.0, 6.0, 0.6)
                .unwrap();
            let moving_img =
                ventriq_core::register::warp(&base.flair, svf.forward(), InterpMode::Linear);
            let moving_vent =
                ventriq_core::register::warp_mask_field(&base.ventricles, svf.forward());

            let pre = quality_dice(&base.ventricles, &moving_vent).unwrap();

            let fixed = ventriq_core::intensity::minmax_rescale(&base.flair).unwrap();
            let moving = ventriq_core::intensity::minmax_rescale(&moving_img).unwrap();
            let aff = register_affine(&moving, &fixed, &reg);
            let pre_aligned = warp_with(
                &moving,
                fixed.geom(),
                &TransformChain::from_affine(aff.transform),
                InterpMode::Linear,
            );
            let dreg = register_diffeo(&pre_aligned, &fixed, &reg).unwrap();

            let chain = TransformChain::from_field(dreg.diffeo.forward().clone())
                .then(TransformStep::Affine(aff.transform));
            let warped_vent = warp_mask_with(&moving_vent, fixed.geom(), &chain);
            let post = quality_dice(&base.ventricles, &warped_vent).unwrap();

            let (mean_res, _) = DisplacementField::compose_residual_voxels(
                dreg.diffeo.forward(),
                dreg.diffeo.inverse(),
            )
            .unwrap();
            (pre, post, mean_res)
        })
        .collect();

    let median = |mut xs: Vec<f64>| {
        xs.sort_by(f64::total_cmp);
        xs[xs.len() / 2]
    };
    let pre_median = median(results.iter().map(|r| r.0).collect());
    let post_median = median(results.iter().map(|r| r.1).collect());
    let worst_residual = results.iter().map(|r| r.2).fold(0.0f64, f64::max);
    let elapsed = t0.elapsed();
    report(
        4,
        "registration recovery",
        pre_median <= 0.7
            && post_median >= 0.85
            && worst_residual <= 0.5
            && elapsed.as_secs() < 600,
        &format!(
            "20 pairs: pre median {pre_median:.3} (<= 0.7), post median {post_median:.3} (>= 0.85), worst inverse residual {worst_residual:.3} voxels (<= 0.5), {elapsed:.1?} (< 10 min)"
        ),
    );
}

#[test]
fn criterion_05_mar_correctness() {
    let t0 = Instant::now();
    let ctx = context::cohort();
    let mut near_hits = 0usize;
    let mut nonneg_gains = 0usize;
    let mut pairs = Vec::new();
    for run in &ctx.runs {
        let r = run.assemble(&ctx.set, Strategy::VentricleDice);
        let generator = run.subject.generator_atlas.as_deref().unwrap();
        let gen_rank = ctx.set.by_id(generator).unwrap().age_band.rank().unwrap();
        let sel_rank = ctx.set.by_id(&r.selected).and_then(|a| a.age_band.rank());
        if let Some(sr) = sel_rank {
            if sr.abs_diff(gen_rank) <= 1 {
                near_hits += 1;
            }
        }
        if r.gain >= 0.0 {
            nonneg_gains += 1;
        }
        let q_b = r.dice_quality[&r.selected];
        pairs.push((q_b, r.general_quality()));
    }
    let n = ctx.runs.len();
    let hit_rate = near_hits as f64 / n as f64;
    let w = wilcoxon_signed_rank(&pairs).expect("enough nonzero gains");
    let elapsed = t0.elapsed();
    report(
        5,
        "MAR correctness",
        hit_rate >= 0.8 && nonneg_gains == n && w.p_value < 0.05 && elapsed.as_secs() < 2700,
        &format!(
            "generator-or-adjacent {near_hits}/{n} ({:.0}%), nonnegative gains {nonneg_gains}/{n}, Wilcoxon p = {:.2e} (< 0.05), {elapsed:.1?} (< 45 min)",
            100.0 * hit_rate, w.p_value
        ),
    );
}

#[test]
fn criterion_06_age_volume_monotonicity() {
    let ctx = context::cohort();
    let mut volumes = Vec::new();
    let mut ranks = Vec::new();
    for run in &ctx.runs {
        let r = run.assemble(&ctx.set, Strategy::VentricleDice);
        if let Some(rank) = ctx.set.by_id(&r.selected).and_then(|a| a.age_band.rank()) {
            ranks.push(rank as f64);
            volumes.push(run.subject.ventricles.volume() as f64);
        }
    }
    let rho = spearman_rho(&ranks, &volumes).expect("cohort has rank variation");
    report(
        6,
        "age/volume monotonicity",
        rho > 0.5,
        &format!("Spearman rho = {rho:.3} over {} age-banded selections (> 0.5)", ranks.len()),
    );
}

#[test]
fn criterion_07_strategy_comparison() {
    let ctx = context::cohort();
    let mut csv = String::from("id,gain_dice_strategy,gain_cc_strategy,selected_dice,selected_cc\n");
    let mut paired = Vec::new();
    for (i, run) in ctx.runs.iter().enumerate() {
        let rd = run.assemble(&ctx.set, Strategy::VentricleDice);
        let rc = run.assemble(&ctx.set, Strategy::CrossCorrelation);
        paired.push((rd.gain, rc.gain));
        csv.push_str(&format!(
            "sub-{i:03},{:.6},{:.6},{},{}\n",
            rd.gain, rc.gain, rd.selected, rc.selected
        ));
    }
    let out = std::env::temp_dir().join("ventriq_strategy_comparison.csv");
    std::fs::write(&out, &csv).unwrap();

    // The Wilcoxon machinery itself is validated against the n = 6 exact
    // enumeration: all-positive differences give p = 2/64.
    let six: Vec<(f64, f64)> = (0..6).map(|i| (0.6 + 0.01 * i as f64, 0.5)).collect();
    let w6 = wilcoxon_signed_rank(&six).unwrap();
    let exact_ok = (w6.p_value - 0.03125).abs() < 1e-12 && w6.statistic == 0.0;

    let n_dice_better = paired.iter().filter(|(d, c)| d > c).count();
    report(
        7,
        "strategy comparison harness",
        exact_ok && paired.len() == ctx.runs.len(),
        &format!(
            "paired gains for {} subjects written to {} (dice-strategy gain higher on {}); exact n=6 Wilcoxon p = {:.5} (= 0.03125)",
            paired.len(),
            out.display(),
            n_dice_better,
            w6.p_value
        ),
    );
}

#[test]
fn criterion_08_burden_threshold_behaviour() {
    let t0 = Instant::now();
    let ctx_set = context::atlas_set();
    let cohort = context::burden_cohort();
    let general_geom = ctx_set.general().image.geom().clone();

    // Ground-truth reference: every subject's lesions moved to general
    // space through the true deformation and the atlas-to-general route.
    let mut truth_masks = Vec::new();
    let mut estimates = Vec::new();
    for bs in cohort.iter() {
        let subject = &bs.run.subject;
        let atlas = ctx_set.by_id(subject.generator_atlas.as_deref().unwrap()).unwrap();
        let true_svf = subject.true_deformation.as_ref().unwrap();
        let chain = TransformChain::from_field(atlas.to_general.forward().clone())
            .then(TransformStep::Displacement(true_svf.inverse().clone()));
        truth_masks.push((warp_mask_with(&subject.wmh, &general_geom, &chain), 1.0f64));

        let r = bs.run.assemble(ctx_set, Strategy::VentricleDice);
        let q = r.dice_quality[&r.selected];
        let warped = ventriq_core::wmh::warp_wmh(&subject.wmh, &r).unwrap();
        estimates.push((warped, q, bs.label));
    }
    let reference = ventriq_core::wmh::build_burden_map(&truth_masks, 0.0).unwrap();

    let entries: Vec<(Mask, f64)> =
        estimates.iter().map(|(m, q, _)| (m.clone(), *q)).collect();
    let mut errors = Vec::new();
    let mut included = Vec::new();
    for t in [0.0, 0.6, 0.9] {
        let map = ventriq_core::wmh::build_burden_map(&entries, t).unwrap();
        errors.push(ventriq_core::wmh::map_error(&map, &reference.map).unwrap());
        included.push(map.n_included);
    }
    let qualities: Vec<String> =
        estimates.iter().map(|(_, q, l)| format!("{l}={q:.2}")).collect();
    let err_monotone = errors[0] >= errors[1] - 1e-12 && errors[1] >= errors[2] - 1e-12;
    let incl_monotone = included[0] >= included[1] && included[1] >= included[2];
    let top_tier_nonempty = included[2] >= 1;
    let elapsed = t0.elapsed();
    report(
        8,
        "burden-map thresholding",
        err_monotone && incl_monotone && top_tier_nonempty,
        &format!(
            "errors {errors:.3?} non-increasing over T = 0/0.6/0.9; included {included:?}; qualities [{}]; {elapsed:.1?}",
            qualities.join(", ")
        ),
    );
}

#[test]
fn criterion_09_segmenter_accuracy() {
    use ventriq_core::intensity::percentile_normalize;
    use ventriq_core::segment::{rule_based_ventricle_segment, SegmenterConfig};

    let run = |noise: f64, seed: u64| {
        let p = make_phantom(&PhantomSpec { noise_sigma: noise, seed, ..PhantomSpec::default() });
        let norm = percentile_normalize(&p.flair).unwrap();
        let seg =
            rule_based_ventricle_segment(&norm, &p.brain, &SegmenterConfig::default()).unwrap();
        quality_dice(&seg, &p.ventricles).unwrap()
    };
    let clean: Vec<f64> = (0..3).map(|s| run(0.0, 900 + s)).collect();
    let noisy: Vec<f64> = (0..3).map(|s| run(0.03, 910 + s)).collect();
    let clean_min = clean.iter().cloned().fold(f64::MAX, f64::min);
    let noisy_min = noisy.iter().cloned().fold(f64::MAX, f64::min);
    report(
        9,
        "segmenter accuracy floor",
        clean_min >= 0.95 && noisy_min >= 0.85,
        &format!("noise-free dice >= {clean_min:.3} (>= 0.95), default-noise dice >= {noisy_min:.3} (>= 0.85)"),
    );
}

#[test]
fn criterion_10_io_and_determinism() {
    use ventriq::nifti::{read_nifti, write_nifti};
    use ventriq::pipeline::{run_pipeline, PipelineConfig};

    let tmp = tempfile::tempdir().unwrap();

    // Bit-exact write/read round trip, plus exact value recovery from the
    // two integer payload types.
    let mut g = Geometry::axial([7, 6, 5], [0.8, 1.1, 2.4]);
    g.origin = [4.5, -2.0, 11.0];
    let n = g.len();
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let vol = Volume::new(g, (0..n).map(|_| rng.gen_range(-40.0f32..90.0)).collect()).unwrap();
    let f32_path = tmp.path().join("rt.nii");
    write_nifti(&vol, &f32_path).unwrap();
    let back = read_nifti(&f32_path).unwrap();
    let f32_exact = back.data() == vol.data() && back.geom() == vol.geom();

    let int_exact = {
        // Integer-typed files: read -> write -> read reproduces every voxel.
        let bytes = std::fs::read(&f32_path).unwrap();
        let mut u8_file = bytes.clone();
        u8_file[70..72].copy_from_slice(&2i16.to_le_bytes());
        u8_file[72..74].copy_from_slice(&8i16.to_le_bytes());
        u8_file.truncate(348);
        u8_file.extend((0..n).map(|i| (i % 251) as u8));
        let u8_path = tmp.path().join("u8.nii");
        std::fs::write(&u8_path, &u8_file).unwrap();
        let first = read_nifti(&u8_path).unwrap();
        let rewritten = tmp.path().join("u8_rt.nii");
        write_nifti(&first, &rewritten).unwrap();
        let second = read_nifti(&rewritten).unwrap();
        let u8_ok = first.data() == second.data();

        let mut i16_file = bytes;
        i16_file[70..72].copy_from_slice(&4i16.to_le_bytes());
        i16_file[72..74].copy_from_slice(&16i16.to_le_bytes());
        i16_file.truncate(348);
        for i in 0..n {
            i16_file.extend_from_slice(&((i as i64 * 37 % 1999 - 900) as i16).to_le_bytes());
        }
        let i16_path = tmp.path().join("i16.nii");
        std::fs::write(&i16_path, &i16_file).unwrap();
        let first = read_nifti(&i16_path).unwrap();
        let rewritten = tmp.path().join("i16_rt.nii");
        write_nifti(&first, &rewritten).unwrap();
        let second = read_nifti(&rewritten).unwrap();
        u8_ok && first.data() == second.data()
    };

    // End-to-end determinism: the same seeds and inputs give byte-identical
    // analytic outputs regardless of worker count.
    let (cohort_dir, atlas_dir) = {
        use ventriq::atlas_io::save_atlas_set;
        use ventriq::nifti::write_mask;
        use ventriq_core::phantom::{make_atlas_set, make_cohort, CohortParams};
        use ventriq_core::register::RegParams;

        let spec = PhantomSpec { dims: [24, 24, 24], spacing: [4.0; 3], seed: 77, ..PhantomSpec::default() };
        let set = make_atlas_set(&spec, &RegParams::default()).unwrap();
        let atlas_dir = tmp.path().join("atlas");
        save_atlas_set(&set, &atlas_dir).unwrap();
        let cohort = make_cohort(3, &set, &CohortParams::default(), 77).unwrap();
        let cohort_dir = tmp.path().join("cohort");
        std::fs::create_dir_all(&cohort_dir).unwrap();
        for (i, s) in cohort.iter().enumerate() {
            let id = format!("sub-{i:03}");
            write_nifti(&s.flair, &cohort_dir.join(format!("{id}_flair.nii"))).unwrap();
            write_mask(&s.brain, &cohort_dir.join(format!("{id}_brain.nii"))).unwrap();
            write_mask(&s.ventricles, &cohort_dir.join(format!("{id}_vent.nii"))).unwrap();
            write_mask(&s.wmh, &cohort_dir.join(format!("{id}_wmh.nii"))).unwrap();
        }
        (cohort_dir, atlas_dir)
    };
    let mut identical = true;
    let mut outs = Vec::new();
    for (label, workers) in [("w1", 1usize), ("w2", 2)] {
        let out = tmp.path().join(format!("out_{label}"));
        let cfg = PipelineConfig {
            atlas_dir: atlas_dir.clone(),
            cohort_dir: cohort_dir.clone(),
            out_dir: out.clone(),
            workers,
            ..PipelineConfig::default()
        };
        run_pipeline(&cfg).unwrap();
        outs.push(out);
    }
    for name in ["gains.csv", "metrics_panel.csv", "summary.json", "wmh_T0.00.nii", "wmh_T0.60.nii"] {
        let a = std::fs::read(outs[0].join(name)).unwrap();
        let b = std::fs::read(outs[1].join(name)).unwrap();
        if a != b {
            identical = false;
        }
    }

    report(
        10,
        "I/O bit-exactness and rerun determinism",
        f32_exact && int_exact && identical,
        &format!(
            "float32 round trip exact: {f32_exact}; integer datatypes exact: {int_exact}; pipeline outputs byte-identical across worker counts: {identical}"
        ),
    );
}
