//! Subcommand implementations.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;

use ventriq_core::intensity::{minmax_rescale, percentile_normalize};
use ventriq_core::mar::{register_to_atlas, run_mar, Strategy};
use ventriq_core::metrics::metric_panel;
use ventriq_core::phantom::{make_atlas_set, make_cohort, CohortParams, PhantomSpec};
use ventriq_core::register::{
    register_affine, register_diffeo, warp_with, RegParams, TransformChain, TransformStep,
};
use ventriq_core::segment::rule_based_ventricle_segment;
use ventriq_core::wmh::build_burden_map;
use ventriq_core::{InterpMode, Mask};

use crate::atlas_io::{load_atlas_set, save_atlas_set};
use crate::nifti::{read_mask, read_nifti, write_mask, write_nifti};
use crate::pipeline::{parse_strategy, run_pipeline, PipelineConfig, RegOverrides, SegOverrides};
use crate::report::{now_unix, panel_csv_row, panel_json, write_json, RunManifest, PANEL_CSV_HEADER};
use crate::xfm::{save_transform_pair, save_transform_pair_with, ParamsEcho, TransformSidecar};

/// Write the run manifest for commands that own an output directory.
fn write_manifest<C: Serialize>(out_dir: &Path, command: &str, config: &C, started: u64) -> Result<()> {
    let manifest = RunManifest {
        tool: "ventriq".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        started_unix: started,
        finished_unix: now_unix(),
        config: serde_json::to_value(config)?,
    };
    write_json(&out_dir.join("run.json"), &manifest)
}

#[derive(Debug, Args, Serialize)]
pub struct PhantomArgs {
    /// Number of cohort subjects.
    #[arg(long, default_value_t = 30)]
    pub n: usize,
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
    /// Where to write (or find) the atlas set; defaults to <out-dir>/atlas.
    #[arg(long = "atlas-dir")]
    pub atlas_dir: Option<PathBuf>,
    /// Maximum true-deformation displacement in mm.
    #[arg(long, default_value_t = 8.0)]
    pub max_disp: f64,
    /// Smoothing sigma of the true deformation, in voxels.
    #[arg(long, default_value_t = 4.0)]
    pub svf_sigma: f64,
    /// Additive Gaussian noise sigma.
    #[arg(long, default_value_t = 0.03)]
    pub noise: f64,
    /// Cube edge length in voxels.
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    /// Isotropic voxel spacing in mm.
    #[arg(long, default_value_t = 2.0)]
    pub spacing: f32,
}

pub fn cmd_phantom(args: &PhantomArgs, seed: u64) -> Result<()> {
    let started = now_unix();
    std::fs::create_dir_all(&args.out_dir)?;
    let atlas_dir = args.atlas_dir.clone().unwrap_or_else(|| args.out_dir.join("atlas"));

    let spec = PhantomSpec {
        dims: [args.dim; 3],
        spacing: [args.spacing; 3],
        seed,
        ..PhantomSpec::default()
    };
    let set = if atlas_dir.join("atlas_set.json").is_file() {
        eprintln!("reusing atlas set at {}", atlas_dir.display());
        load_atlas_set(&atlas_dir)?
    } else {
        eprintln!("building atlas set (five registrations to the general image)...");
        let set = make_atlas_set(&spec, &ventriq_core::phantom::atlas_build_params())?;
        save_atlas_set(&set, &atlas_dir)?;
        set
    };

    let params = CohortParams {
        max_disp_mm: args.max_disp,
        svf_sigma_voxels: args.svf_sigma,
        noise_sigma: args.noise,
        ..CohortParams::default()
    };
    let cohort = make_cohort(args.n, &set, &params, seed)?;

    #[derive(Serialize)]
    struct TruthEntry {
        id: String,
        generator_atlas: Option<String>,
        true_transform_prefix: Option<String>,
    }
    let truth_dir = args.out_dir.join("truth");
    std::fs::create_dir_all(&truth_dir)?;
    let mut truth = Vec::new();
    for (i, subj) in cohort.iter().enumerate() {
        let id = format!("sub-{i:03}");
        write_nifti(&subj.flair, &args.out_dir.join(format!("{id}_flair.nii")))?;
        write_mask(&subj.brain, &args.out_dir.join(format!("{id}_brain.nii")))?;
        write_mask(&subj.ventricles, &args.out_dir.join(format!("{id}_vent.nii")))?;
        write_mask(&subj.wmh, &args.out_dir.join(format!("{id}_wmh.nii")))?;
        let prefix = match &subj.true_deformation {
            Some(d) => {
                let prefix = format!("{id}_true");
                save_transform_pair_with(
                    &truth_dir,
                    &prefix,
                    d.forward(),
                    d.inverse(),
                    &serde_json::json!({ "kind": "true_deformation", "id": id }),
                )?;
                Some(format!("truth/{prefix}"))
            }
            None => None,
        };
        truth.push(TruthEntry {
            id,
            generator_atlas: subj.generator_atlas.clone(),
            true_transform_prefix: prefix,
        });
    }
    write_json(
        &args.out_dir.join("truth.json"),
        &serde_json::json!({ "seed": seed, "n": args.n, "subjects": truth }),
    )?;
    write_manifest(&args.out_dir, "phantom", args, started)?;
    println!("wrote {} subjects under {}", cohort.len(), args.out_dir.display());
    Ok(())
}

#[derive(Debug, Args, Serialize)]
pub struct SegmentArgs {
    #[arg(long)]
    pub flair: PathBuf,
    #[arg(long = "brain-mask")]
    pub brain_mask: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Components smaller than this many voxels are removed.
    #[arg(long = "min-component", default_value_t = 5)]
    pub min_component: usize,
    /// Binarization level for probability maps.
    #[arg(long, default_value_t = 0.5)]
    pub binarize: f32,
    /// Dark-intensity cut as a fraction of the brain-median intensity.
    #[arg(long = "dark-threshold", default_value_t = 0.55)]
    pub dark_threshold: f64,
}

pub fn cmd_segment(args: &SegmentArgs) -> Result<()> {
    let flair = read_nifti(&args.flair)?;
    let brain = read_mask(&args.brain_mask)?;
    let norm = percentile_normalize(&flair)?;
    let cfg = ventriq_core::segment::SegmenterConfig {
        min_component_voxels: args.min_component,
        binarize_level: args.binarize,
        dark_threshold: args.dark_threshold,
        ..Default::default()
    };
    let mask = rule_based_ventricle_segment(&norm, &brain, &cfg)?;
    write_mask(&mask, &args.out)?;
    println!("segmented {} ventricle voxels -> {}", mask.volume(), args.out.display());
    Ok(())
}

#[derive(Debug, Args, Serialize)]
pub struct RegisterArgs {
    #[arg(long)]
    pub moving: PathBuf,
    #[arg(long)]
    pub fixed: PathBuf,
    /// Directory receiving the displacement pair and sidecar.
    #[arg(long = "out-transform")]
    pub out_transform: PathBuf,
    /// File-name prefix for the transform files.
    #[arg(long, default_value = "reg")]
    pub prefix: String,
}

pub fn cmd_register(args: &RegisterArgs, reg: &RegParams) -> Result<()> {
    let started = now_unix();
    let moving = minmax_rescale(&read_nifti(&args.moving)?)?;
    let fixed = minmax_rescale(&read_nifti(&args.fixed)?)?;

    let aff = register_affine(&moving, &fixed, reg);
    let pre = warp_with(
        &moving,
        fixed.geom(),
        &TransformChain::from_affine(aff.transform),
        InterpMode::Linear,
    );
    let dreg = register_diffeo(&pre, &fixed, reg)?;

    let fwd_chain = TransformChain::from_field(dreg.diffeo.forward().clone())
        .then(TransformStep::Affine(aff.transform));
    let inv_chain = TransformChain::from_affine(
        aff.transform.inverse().context("affine is not invertible")?,
    )
    .then(TransformStep::Displacement(dreg.diffeo.inverse().clone()));
    let fwd = fwd_chain.bake(fixed.geom())?;
    let inv = inv_chain.bake(moving.geom())?;

    let sidecar = TransformSidecar {
        affine: Some(*aff.transform.matrix()),
        affine_converged: aff.converged,
        diffeo_converged: dreg.converged,
        initial_cc: dreg.initial_cc,
        final_cc: dreg.final_cc,
        params: ParamsEcho::from(reg),
    };
    save_transform_pair(&args.out_transform, &args.prefix, &fwd, &inv, &sidecar)?;
    write_manifest(&args.out_transform, "register", args, started)?;
    println!(
        "registered: cc {:.4} -> {:.4} (converged: {})",
        dreg.initial_cc, dreg.final_cc, dreg.converged
    );
    Ok(())
}

#[derive(Debug, Args, Serialize)]
pub struct QaArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Subject-space ventricle mask (e.g. from `segment`).
    #[arg(long)]
    pub ventricles: PathBuf,
    #[arg(long = "atlas-dir")]
    pub atlas_dir: PathBuf,
    /// Report path (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Exit with code 3 when Q falls below this.
    #[arg(long = "flag-below", default_value_t = 0.6)]
    pub flag_below: f64,
}

/// Registration QA against the general atlas only. Exit codes: 0 ok,
/// 1 I/O failure, 2 registration failure, 3 quality below the flag level.
pub fn cmd_qa(args: &QaArgs, reg: &RegParams) -> i32 {
    let loaded = (|| -> Result<_> {
        let image = read_nifti(&args.image)?;
        let vent = read_mask(&args.ventricles)?;
        let set = load_atlas_set(&args.atlas_dir)?;
        Ok((image, vent, set))
    })();
    let (image, vent, set) = match loaded {
        Ok(t) => t,
        Err(e) => {
            eprintln!("qa: input error: {e:#}");
            return 1;
        }
    };

    let outcome = (|| -> Result<_> {
        let norm = percentile_normalize(&image)?;
        let rescaled = minmax_rescale(&norm)?;
        let general = set.general().clone();
        Ok(register_to_atlas(&rescaled, &vent, &set, &general, reg)?)
    })();
    let o = match outcome {
        Ok(o) => o,
        Err(e) => {
            eprintln!("qa: registration failed: {e:#}");
            return 2;
        }
    };

    let flagged = o.dice_q < args.flag_below;
    let report = serde_json::json!({
        "q": o.dice_q,
        "cc": o.cc_q,
        "flag_below": args.flag_below,
        "flagged": flagged,
        "ventricles_missing": o.ventricles_missing,
        "affine_converged": o.affine_converged,
        "diffeo_converged": o.diffeo_converged,
    });
    if let Err(e) = write_json(&args.out, &report) {
        eprintln!("qa: cannot write report: {e:#}");
        return 1;
    }
    println!("Q = {:.4}, CC = {:.4}{}", o.dice_q, o.cc_q, if flagged { " [flagged]" } else { "" });
    if flagged {
        3
    } else {
        0
    }
}

#[derive(Debug, Args, Serialize)]
pub struct MarArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub ventricles: PathBuf,
    #[arg(long = "atlas-dir")]
    pub atlas_dir: PathBuf,
    /// Atlas-selection strategy: "dice" or "cc".
    #[arg(long, default_value = "dice")]
    pub strategy: String,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cmd_mar(args: &MarArgs, reg: &RegParams) -> Result<()> {
    let started = now_unix();
    let strategy: Strategy = parse_strategy(&args.strategy)?;
    let image = read_nifti(&args.image)?;
    let vent = read_mask(&args.ventricles)?;
    let set = load_atlas_set(&args.atlas_dir)?;
    let norm = percentile_normalize(&image)?;
    let r = run_mar(&norm, &vent, &set, reg, strategy)?;
    std::fs::create_dir_all(&args.out)?;
    write_json(&args.out.join("mar_result.json"), &crate::report::MarReport::from_result(&r))?;
    save_transform_pair_with(
        &args.out,
        "to_general",
        &r.final_forward,
        &r.final_inverse,
        &serde_json::json!({ "kind": "mar_final_transform", "selected": r.selected, "flags": r.flags }),
    )?;
    write_manifest(&args.out, "mar", args, started)?;
    println!("selected {} (gain {:+.4})", r.selected, r.gain);
    Ok(())
}

#[derive(Debug, Args, Serialize)]
pub struct WmhMapArgs {
    /// A pipeline output directory containing subjects/<id>/wmh_general.nii.
    #[arg(long = "cohort-dir")]
    pub cohort_dir: PathBuf,
    #[arg(long, default_value_t = 0.6)]
    pub threshold: f64,
    /// Output NIfTI path; the JSON sidecar lands next to it.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cmd_wmh_map(args: &WmhMapArgs) -> Result<()> {
    let subjects_dir = args.cohort_dir.join("subjects");
    let mut entries: Vec<(Mask, f64)> = Vec::new();
    let mut ids: Vec<String> = Vec::new();
    for entry in std::fs::read_dir(&subjects_dir)
        .with_context(|| format!("reading {}", subjects_dir.display()))?
    {
        let dir = entry?.path();
        if dir.is_dir() {
            ids.push(dir.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    ids.sort();
    for id in &ids {
        let dir = subjects_dir.join(id);
        let wmh_path = dir.join("wmh_general.nii");
        if !wmh_path.is_file() {
            continue;
        }
        let report: crate::report::MarReport =
            serde_json::from_str(&std::fs::read_to_string(dir.join("mar_result.json"))?)?;
        let q = report.dice_quality.get(&report.selected).copied().unwrap_or(0.0);
        entries.push((read_mask(&wmh_path)?, q));
    }
    anyhow::ensure!(!entries.is_empty(), "no warped lesion masks under {}", subjects_dir.display());

    let n_total = entries.len();
    let map = build_burden_map(&entries, args.threshold)?;
    write_nifti(&map.map, &args.out)?;
    let sidecar = args.out.with_extension("json");
    write_json(
        &sidecar,
        &crate::report::BurdenSidecar {
            threshold: args.threshold,
            n_included: map.n_included,
            n_total,
        },
    )?;
    println!("burden map over {}/{} subjects -> {}", map.n_included, n_total, args.out.display());
    Ok(())
}

#[derive(Debug, Args, Serialize)]
pub struct MetricsArgs {
    /// Reference mask.
    #[arg(long)]
    pub reference: PathBuf,
    /// Prediction mask.
    #[arg(long)]
    pub prediction: PathBuf,
    #[arg(long, default_value = "pair")]
    pub id: String,
    /// Optional CSV output path; stdout otherwise.
    #[arg(long = "out-csv")]
    pub out_csv: Option<PathBuf>,
    /// Optional JSON output path.
    #[arg(long = "out-json")]
    pub out_json: Option<PathBuf>,
}

pub fn cmd_metrics(args: &MetricsArgs) -> Result<()> {
    let a = read_mask(&args.reference)?;
    let b = read_mask(&args.prediction)?;
    let panel = metric_panel(&a, &b)?;
    let row = panel_csv_row(&args.id, &panel);
    match &args.out_csv {
        Some(path) => std::fs::write(path, format!("{PANEL_CSV_HEADER}\n{row}\n"))?,
        None => println!("{PANEL_CSV_HEADER}\n{row}"),
    }
    if let Some(path) = &args.out_json {
        write_json(path, &panel_json(&args.id, &panel))?;
    }
    Ok(())
}

#[derive(Debug, Args, Serialize)]
pub struct PipelineArgs {
    #[arg(long = "atlas-dir")]
    pub atlas_dir: Option<PathBuf>,
    #[arg(long = "cohort-dir")]
    pub cohort_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub strategy: Option<String>,
    /// Comma-separated burden thresholds, e.g. "0,0.6,0.9".
    #[arg(long)]
    pub thresholds: Option<String>,
}

pub fn cmd_pipeline(args: &PipelineArgs, config_file: Option<&Path>, workers: usize) -> Result<()> {
    let started = now_unix();
    let mut cfg: PipelineConfig = match config_file {
        Some(path) => serde_json::from_str(
            &std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?,
        )?,
        None => PipelineConfig {
            reg: RegOverrides::default(),
            seg: SegOverrides::default(),
            ..Default::default()
        },
    };
    if let Some(d) = &args.atlas_dir {
        cfg.atlas_dir = d.clone();
    }
    if let Some(d) = &args.cohort_dir {
        cfg.cohort_dir = d.clone();
    }
    if let Some(d) = &args.out {
        cfg.out_dir = d.clone();
    }
    if let Some(s) = &args.strategy {
        cfg.strategy = s.clone();
    }
    if let Some(t) = &args.thresholds {
        cfg.thresholds = t
            .split(',')
            .map(|x| x.trim().parse::<f64>().context("bad threshold"))
            .collect::<Result<_>>()?;
    }
    if workers > 0 {
        cfg.workers = workers;
    }
    anyhow::ensure!(cfg.atlas_dir.as_os_str().len() > 0, "--atlas-dir (or config) is required");
    anyhow::ensure!(cfg.cohort_dir.as_os_str().len() > 0, "--cohort-dir (or config) is required");
    anyhow::ensure!(cfg.out_dir.as_os_str().len() > 0, "--out (or config) is required");

    let summary = run_pipeline(&cfg)?;
    write_manifest(&cfg.out_dir, "pipeline", &cfg, started)?;
    println!(
        "pipeline complete: {}/{} subjects, mean gain {:.4}",
        summary.n_completed, summary.n_subjects, summary.mean_gain
    );
    Ok(())
}
