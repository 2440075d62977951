//! Displacement-field persistence: a transform is stored as forward and
//! inverse NIfTI displacement volumes (three scalar files each, suffixes
//! `_fx/_fy/_fz` and `_ix/_iy/_iz`) plus a JSON sidecar with parameters and
//! convergence flags.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use ventriq_core::register::DisplacementField;
use ventriq_core::Volume;

use crate::nifti::{read_nifti, write_nifti};

pub const FWD_SUFFIXES: [&str; 3] = ["_fx.nii", "_fy.nii", "_fz.nii"];
pub const INV_SUFFIXES: [&str; 3] = ["_ix.nii", "_iy.nii", "_iz.nii"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransformSidecar {
    pub affine: Option<[[f64; 4]; 4]>,
    pub affine_converged: bool,
    pub diffeo_converged: bool,
    pub initial_cc: f64,
    pub final_cc: f64,
    pub params: ParamsEcho,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamsEcho {
    pub pyramid_levels: usize,
    pub iters_per_level: Vec<u32>,
    pub update_step: f64,
    pub fluid_sigma: f64,
    pub diffusion_sigma: f64,
    pub affine_iters: u32,
    pub affine_lr: f64,
    pub convergence_tol: f64,
}

impl From<&ventriq_core::register::RegParams> for ParamsEcho {
    fn from(p: &ventriq_core::register::RegParams) -> Self {
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

fn component_volume(field: &DisplacementField, axis: usize) -> Volume {
    let data = field.data().iter().map(|d| d[axis]).collect();
    Volume::new(field.geom().clone(), data).expect("same length")
}

fn field_from_components(parts: [Volume; 3]) -> Result<DisplacementField> {
    let geom = parts[0].geom().clone();
    for p in &parts[1..] {
        anyhow::ensure!(p.geom() == &geom, "displacement components disagree on geometry");
    }
    let n = geom.len();
    let mut data = Vec::with_capacity(n);
    for i in 0..n {
        data.push([parts[0].data()[i], parts[1].data()[i], parts[2].data()[i]]);
    }
    Ok(DisplacementField::new(geom, data)?)
}

pub fn save_field(dir: &Path, prefix: &str, field: &DisplacementField, suffixes: &[&str; 3]) -> Result<()> {
    for (axis, suffix) in suffixes.iter().enumerate() {
        let path = dir.join(format!("{prefix}{suffix}"));
        write_nifti(&component_volume(field, axis), &path)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

pub fn load_field(dir: &Path, prefix: &str, suffixes: &[&str; 3]) -> Result<DisplacementField> {
    let mut parts = Vec::with_capacity(3);
    for suffix in suffixes {
        let path = dir.join(format!("{prefix}{suffix}"));
        parts.push(read_nifti(&path).with_context(|| format!("reading {}", path.display()))?);
    }
    let [x, y, z]: [Volume; 3] = parts.try_into().expect("three components");
    field_from_components([x, y, z])
}

/// Persist a forward/inverse pair plus its sidecar under `dir/prefix*`.
pub fn save_transform_pair(
    dir: &Path,
    prefix: &str,
    fwd: &DisplacementField,
    inv: &DisplacementField,
    sidecar: &TransformSidecar,
) -> Result<()> {
    save_transform_pair_with(dir, prefix, fwd, inv, sidecar)
}

/// Same as [`save_transform_pair`] with an arbitrary sidecar payload.
pub fn save_transform_pair_with<S: Serialize>(
    dir: &Path,
    prefix: &str,
    fwd: &DisplacementField,
    inv: &DisplacementField,
    sidecar: &S,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    save_field(dir, prefix, fwd, &FWD_SUFFIXES)?;
    save_field(dir, prefix, inv, &INV_SUFFIXES)?;
    let json = serde_json::to_string_pretty(sidecar)?;
    std::fs::write(sidecar_path(dir, prefix), json)?;
    Ok(())
}

pub fn load_transform_pair(
    dir: &Path,
    prefix: &str,
) -> Result<(DisplacementField, DisplacementField, TransformSidecar)> {
    let fwd = load_field(dir, prefix, &FWD_SUFFIXES)?;
    let inv = load_field(dir, prefix, &INV_SUFFIXES)?;
    let raw = std::fs::read_to_string(sidecar_path(dir, prefix))?;
    Ok((fwd, inv, serde_json::from_str(&raw)?))
}

pub fn sidecar_path(dir: &Path, prefix: &str) -> PathBuf {
    dir.join(format!("{prefix}.json"))
}
