//! Batch cohort driver: segment, register to all atlases, select, warp
//! lesion masks to general space, and aggregate reports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use ventriq_core::components::Connectivity;
use ventriq_core::intensity::percentile_normalize;
use ventriq_core::mar::{run_mar, MarResult, Strategy};
use ventriq_core::metrics::{metric_panel, MetricPanel};
use ventriq_core::register::RegParams;
use ventriq_core::segment::{rule_based_ventricle_segment, SegmenterConfig};
use ventriq_core::stats::wilcoxon_signed_rank;
use ventriq_core::wmh::{build_burden_map, warp_wmh};
use ventriq_core::{Error as CoreError, Mask};

use crate::nifti::{read_mask, read_nifti, write_mask};
use crate::report::{
    write_gains_csv, write_json, write_panel_csv, BurdenSidecar, GainRow, MarReport, Summary,
};
use crate::subjects::{discover_subjects, SubjectFiles};
use crate::xfm::save_transform_pair_with;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegOverrides {
    pub pyramid_levels: usize,
    pub iters_per_level: Vec<u32>,
    pub update_step: f64,
    pub fluid_sigma: f64,
    pub diffusion_sigma: f64,
    pub affine_iters: u32,
    pub affine_lr: f64,
    pub convergence_tol: f64,
}

impl Default for RegOverrides {
    fn default() -> Self {
        (&RegParams::default()).into()
    }
}

impl From<&RegParams> for RegOverrides {
    fn from(p: &RegParams) -> Self {
        Self {
            pyramid_levels: p.pyramid_levels,
            iters_per_level: p.iters_per_level.clone(),
            update_step: p.update_step,
            fluid_sigma: p.fluid_sigma,
            diffusion_sigma: p.diffusion_sigma,
            affine_iters: p.affine_iters,
            affine_lr: p.affine_lr,
            convergence_tol: p.convergence_tol,
        }
    }
}

impl RegOverrides {
    pub fn to_params(&self) -> RegParams {
        RegParams {
            pyramid_levels: self.pyramid_levels,
            iters_per_level: self.iters_per_level.clone(),
            update_step: self.update_step,
            fluid_sigma: self.fluid_sigma,
            diffusion_sigma: self.diffusion_sigma,
            affine_iters: self.affine_iters,
            affine_lr: self.affine_lr,
            convergence_tol: self.convergence_tol,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegOverrides {
    pub dark_threshold: f64,
    pub min_component_voxels: usize,
    pub binarize_level: f32,
    /// 6 or 26.
    pub connectivity: u8,
    pub border_erosion: usize,
}

impl Default for SegOverrides {
    fn default() -> Self {
        let c = SegmenterConfig::default();
        Self {
            dark_threshold: c.dark_threshold,
            min_component_voxels: c.min_component_voxels,
            binarize_level: c.binarize_level,
            connectivity: 26,
            border_erosion: c.border_erosion,
        }
    }
}

impl SegOverrides {
    pub fn to_config(&self) -> Result<SegmenterConfig> {
        let connectivity = match self.connectivity {
            6 => Connectivity::Six,
            26 => Connectivity::TwentySix,
            other => bail!("connectivity must be 6 or 26, got {other}"),
        };
        Ok(SegmenterConfig {
            dark_threshold: self.dark_threshold,
            min_component_voxels: self.min_component_voxels,
            binarize_level: self.binarize_level,
            connectivity,
            border_erosion: self.border_erosion,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub atlas_dir: PathBuf,
    pub cohort_dir: PathBuf,
    pub out_dir: PathBuf,
    /// "dice" or "cc".
    pub strategy: String,
    /// Burden-map quality thresholds, ascending, in [0, 1].
    pub thresholds: Vec<f64>,
    /// 0 means one worker per CPU.
    pub workers: usize,
    pub reg: RegOverrides,
    pub seg: SegOverrides,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            atlas_dir: PathBuf::new(),
            cohort_dir: PathBuf::new(),
            out_dir: PathBuf::new(),
            strategy: "dice".into(),
            thresholds: vec![0.0, 0.6, 0.9],
            workers: 0,
            reg: RegOverrides::default(),
            seg: SegOverrides::default(),
        }
    }
}

pub fn parse_strategy(s: &str) -> Result<Strategy> {
    match s {
        "dice" => Ok(Strategy::VentricleDice),
        "cc" => Ok(Strategy::CrossCorrelation),
        other => bail!("unknown strategy {other:?}; expected \"dice\" or \"cc\""),
    }
}

struct SubjectOutcome {
    id: String,
    gain_row: GainRow,
    panel: Option<MetricPanel>,
    warped_wmh: Option<Mask>,
    /// Ventricle-Dice quality of the selected route; the burden-map
    /// inclusion criterion.
    quality: f64,
}

fn process_subject(
    files: &SubjectFiles,
    set: &ventriq_core::mar::AtlasSet,
    reg: &RegParams,
    seg: &SegmenterConfig,
    strategy: Strategy,
    out_root: &Path,
) -> Result<SubjectOutcome> {
    let flair = read_nifti(&files.flair)?;
    let brain = read_mask(&files.brain)?;
    let norm = percentile_normalize(&flair)?;
    let v_cnn = rule_based_ventricle_segment(&norm, &brain, seg)?;

    let subject_dir = out_root.join("subjects").join(&files.id);
    std::fs::create_dir_all(&subject_dir)?;
    write_mask(&v_cnn, &subject_dir.join("ventricles_cnn.nii"))?;

    let r: MarResult = run_mar(&norm, &v_cnn, set, reg, strategy)?;
    write_json(&subject_dir.join("mar_result.json"), &MarReport::from_result(&r))?;
    save_transform_pair_with(
        &subject_dir,
        "to_general",
        &r.final_forward,
        &r.final_inverse,
        &serde_json::json!({
            "kind": "mar_final_transform",
            "selected": r.selected,
            "flags": r.flags,
        }),
    )?;

    let warped_wmh = match &files.wmh {
        Some(path) => {
            let wmh = read_mask(path)?;
            let warped = warp_wmh(&wmh, &r)?;
            write_mask(&warped, &subject_dir.join("wmh_general.nii"))?;
            Some(warped)
        }
        None => None,
    };

    let panel = match &files.vent_truth {
        Some(path) => {
            let truth = read_mask(path)?;
            Some(metric_panel(&truth, &v_cnn)?)
        }
        None => None,
    };

    let q_b = r.dice_quality.get(&r.selected).copied().unwrap_or(0.0);
    Ok(SubjectOutcome {
        id: files.id.clone(),
        gain_row: GainRow {
            id: files.id.clone(),
            q_g: r.general_quality(),
            q_b,
            selected: r.selected.clone(),
            gain: r.gain,
        },
        panel,
        warped_wmh,
        quality: q_b,
    })
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Summary> {
    let strategy = parse_strategy(&cfg.strategy)?;
    if cfg.thresholds.windows(2).any(|w| w[0] > w[1]) {
        bail!("thresholds must be ascending");
    }
    if cfg.thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
        bail!("thresholds must lie in [0, 1]");
    }
    let reg = cfg.reg.to_params();
    let seg = cfg.seg.to_config()?;
    let set = crate::atlas_io::load_atlas_set(&cfg.atlas_dir)?;
    let subjects = discover_subjects(&cfg.cohort_dir)?;
    if subjects.is_empty() {
        bail!("no subjects found in {}", cfg.cohort_dir.display());
    }
    std::fs::create_dir_all(&cfg.out_dir)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .context("building worker pool")?;
    let results: Vec<(String, Result<SubjectOutcome>)> = pool.install(|| {
        subjects
            .par_iter()
            .map(|files| {
                let out = process_subject(files, &set, &reg, &seg, strategy, &cfg.out_dir);
                (files.id.clone(), out)
            })
            .collect()
    });

    let mut gains = Vec::new();
    let mut panels = Vec::new();
    let mut burden_entries = Vec::new();
    let mut failed = Vec::new();
    let mut assignment: BTreeMap<String, usize> = BTreeMap::new();
    for (id, res) in results {
        match res {
            Ok(outcome) => {
                *assignment.entry(outcome.gain_row.selected.clone()).or_insert(0) += 1;
                if let Some(panel) = outcome.panel {
                    panels.push((outcome.id.clone(), panel));
                }
                if let Some(wmh) = outcome.warped_wmh {
                    burden_entries.push((wmh, outcome.quality));
                }
                gains.push(outcome.gain_row);
            }
            Err(e) => {
                eprintln!("subject {id} failed: {e:#}");
                failed.push(id);
            }
        }
    }
    if gains.is_empty() {
        bail!("all {} subjects failed", failed.len());
    }

    write_gains_csv(&cfg.out_dir.join("gains.csv"), &gains)?;
    write_panel_csv(&cfg.out_dir.join("metrics_panel.csv"), &panels)?;

    for &t in &cfg.thresholds {
        if burden_entries.is_empty() {
            break;
        }
        let map = build_burden_map(&burden_entries, t)?;
        let name = format!("wmh_T{t:.2}");
        crate::nifti::write_nifti(&map.map, &cfg.out_dir.join(format!("{name}.nii")))?;
        write_json(
            &cfg.out_dir.join(format!("{name}.json")),
            &BurdenSidecar { threshold: t, n_included: map.n_included, n_total: burden_entries.len() },
        )?;
    }

    let pairs: Vec<(f64, f64)> = gains.iter().map(|g| (g.q_b, g.q_g)).collect();
    let wilcoxon = match wilcoxon_signed_rank(&pairs) {
        Ok(w) => Some(w.into()),
        Err(CoreError::TooFewPairs { .. }) => None,
        Err(e) => return Err(e.into()),
    };

    let n_improved = gains.iter().filter(|g| g.gain > 0.0).count();
    let mean_gain = gains.iter().map(|g| g.gain).sum::<f64>() / gains.len() as f64;
    let mean_gain_when_improvement = if n_improved > 0 {
        gains.iter().filter(|g| g.gain > 0.0).map(|g| g.gain).sum::<f64>() / n_improved as f64
    } else {
        0.0
    };

    let summary = Summary {
        strategy: cfg.strategy.clone(),
        n_subjects: subjects.len(),
        n_completed: gains.len(),
        failed,
        mean_gain,
        mean_gain_when_improvement,
        n_improved,
        assignment_counts: assignment,
        wilcoxon_mar_vs_direct: wilcoxon,
    };
    write_json(&cfg.out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}
