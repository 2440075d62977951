//! Atlas-set directory layout.
//!
//! ```text
//! <atlas-dir>/
//!   atlas_set.json          manifest: ids, age bands, file names
//!   <id>_image.nii          atlas image
//!   <id>_to_general_v{x,y,z}.nii   stationary velocity to general space
//!   general_ventricles.nii  V_g
//! ```
//!
//! Velocities are stored rather than the derived displacement pairs; the
//! forward/inverse fields are regenerated deterministically on load.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use ventriq_core::mar::{AgeBand, Atlas, AtlasSet};
use ventriq_core::register::Diffeo;

use crate::nifti::{read_mask, read_nifti, write_mask, write_nifti};
use crate::xfm::{load_field, save_field};

const VELOCITY_SUFFIXES: [&str; 3] = ["_vx.nii", "_vy.nii", "_vz.nii"];

#[derive(Debug, Serialize, Deserialize)]
pub struct AtlasSetManifest {
    pub atlases: Vec<AtlasEntry>,
    pub ventricles_general: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AtlasEntry {
    pub id: String,
    pub age_band: String,
    pub image: String,
    pub to_general_prefix: String,
    pub squaring_steps: u32,
}

pub fn save_atlas_set(set: &AtlasSet, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for a in set.atlases() {
        let image = format!("{}_image.nii", a.id);
        write_nifti(&a.image, &dir.join(&image))?;
        let prefix = format!("{}_to_general", a.id);
        save_field(dir, &prefix, a.to_general.velocity(), &VELOCITY_SUFFIXES)?;
        entries.push(AtlasEntry {
            id: a.id.clone(),
            age_band: a.age_band.label().to_string(),
            image,
            to_general_prefix: prefix,
            squaring_steps: a.to_general.squaring_steps(),
        });
    }
    write_mask(set.ventricles_general(), &dir.join("general_ventricles.nii"))?;
    let manifest = AtlasSetManifest {
        atlases: entries,
        ventricles_general: "general_ventricles.nii".to_string(),
    };
    std::fs::write(dir.join("atlas_set.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub fn load_atlas_set(dir: &Path) -> Result<AtlasSet> {
    let manifest_path = dir.join("atlas_set.json");
    let raw = std::fs::read_to_string(&manifest_path)
        .with_context(|| format!("reading {}", manifest_path.display()))?;
    let manifest: AtlasSetManifest = serde_json::from_str(&raw)?;
    let mut atlases = Vec::new();
    for e in &manifest.atlases {
        let band = AgeBand::from_label(&e.age_band)
            .with_context(|| format!("unknown age band {:?}", e.age_band))?;
        let image = read_nifti(&dir.join(&e.image))?;
        let velocity = load_field(dir, &e.to_general_prefix, &VELOCITY_SUFFIXES)?;
        let to_general = Diffeo::from_velocity(velocity, e.squaring_steps)?;
        atlases.push(Atlas { id: e.id.clone(), age_band: band, image, to_general });
    }
    let vg = read_mask(&dir.join(&manifest.ventricles_general))?;
    Ok(AtlasSet::new(atlases, vg)?)
}
