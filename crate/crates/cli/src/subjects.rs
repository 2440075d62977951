//! Cohort directory discovery.
//!
//! A subject is a set of sibling files sharing an id prefix:
//! `<id>_flair.nii[.gz]`, `<id>_brain.nii[.gz]`, and optionally
//! `<id>_wmh.nii[.gz]` and `<id>_vent.nii[.gz]` (ground-truth ventricles).

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

#[derive(Debug, Clone)]
pub struct SubjectFiles {
    pub id: String,
    pub flair: PathBuf,
    pub brain: PathBuf,
    pub wmh: Option<PathBuf>,
    pub vent_truth: Option<PathBuf>,
}

fn find_suffixed(dir: &Path, id: &str, role: &str) -> Option<PathBuf> {
    for ext in [".nii", ".nii.gz"] {
        let p = dir.join(format!("{id}_{role}{ext}"));
        if p.is_file() {
            return Some(p);
        }
    }
    None
}

/// Scan a directory for subjects, sorted by id.
pub fn discover_subjects(dir: &Path) -> Result<Vec<SubjectFiles>> {
    let mut subjects = Vec::new();
    let entries = std::fs::read_dir(dir)
        .with_context(|| format!("reading cohort directory {}", dir.display()))?;
    for entry in entries {
        let path = entry?.path();
        let name = match path.file_name().and_then(|n| n.to_str()) {
            Some(n) => n,
            None => continue,
        };
        let stem = name.strip_suffix(".nii.gz").or_else(|| name.strip_suffix(".nii"));
        let id = match stem.and_then(|s| s.strip_suffix("_flair")) {
            Some(id) => id.to_string(),
            None => continue,
        };
        let brain = find_suffixed(dir, &id, "brain")
            .with_context(|| format!("subject {id} has no brain mask"))?;
        subjects.push(SubjectFiles {
            flair: path,
            brain,
            wmh: find_suffixed(dir, &id, "wmh"),
            vent_truth: find_suffixed(dir, &id, "vent"),
            id,
        });
    }
    subjects.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(subjects)
}
