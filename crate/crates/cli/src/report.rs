//! Report files: metric panels, gain tables, MAR results and run summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;
use serde::{Deserialize, Serialize};
use ventriq_core::mar::MarResult;
use ventriq_core::metrics::MetricPanel;
use ventriq_core::stats::WilcoxonResult;

pub const PANEL_CSV_HEADER: &str = "id,dice,jaccard,tpr,vs,mi,ari,icc,pbd,kap,der,oer";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// One panel row as a CSV line matching [`PANEL_CSV_HEADER`].
pub fn panel_csv_row(id: &str, panel: &MetricPanel) -> String {
    let values = panel.values().map(fmt_opt).join(",");
    format!("{id},{values}")
}

pub fn write_panel_csv(path: &Path, rows: &[(String, MetricPanel)]) -> Result<()> {
    let mut out = String::from(PANEL_CSV_HEADER);
    out.push('\n');
    for (id, panel) in rows {
        out.push_str(&panel_csv_row(id, panel));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Panel as a JSON object with nulls for unavailable entries.
pub fn panel_json(id: &str, panel: &MetricPanel) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    map.insert("id".into(), id.into());
    for (name, value) in MetricPanel::NAMES.iter().zip(panel.values()) {
        map.insert(
            (*name).into(),
            value.map(|v| v.into()).unwrap_or(serde_json::Value::Null),
        );
    }
    serde_json::Value::Object(map)
}

/// Per-subject gain line for `gains.csv`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GainRow {
    pub id: String,
    pub q_g: f64,
    pub q_b: f64,
    pub selected: String,
    pub gain: f64,
}

pub fn write_gains_csv(path: &Path, rows: &[GainRow]) -> Result<()> {
    let mut out = String::from("id,q_g,q_b,selected,gain\n");
    for r in rows {
        writeln!(out, "{},{:.6},{:.6},{},{:.6}", r.id, r.q_g, r.q_b, r.selected, r.gain)?;
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Serializable view of a MAR result (the displacement fields live in their
/// own files next to it).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarReport {
    pub strategy: String,
    pub per_atlas_quality: BTreeMap<String, f64>,
    pub dice_quality: BTreeMap<String, f64>,
    pub selected: String,
    pub gain: f64,
    pub flags: Vec<String>,
}

impl MarReport {
    pub fn from_result(r: &MarResult) -> Self {
        Self {
            strategy: r.strategy.label().to_string(),
            per_atlas_quality: r.per_atlas_quality.iter().map(|(k, v)| (k.clone(), *v)).collect(),
            dice_quality: r.dice_quality.iter().map(|(k, v)| (k.clone(), *v)).collect(),
            selected: r.selected.clone(),
            gain: r.gain,
            flags: r.flags.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WilcoxonReport {
    pub statistic: f64,
    pub p_value: f64,
    pub n_used: usize,
}

impl From<WilcoxonResult> for WilcoxonReport {
    fn from(w: WilcoxonResult) -> Self {
        Self { statistic: w.statistic, p_value: w.p_value, n_used: w.n_used }
    }
}

/// Cohort-level summary written as `summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub strategy: String,
    pub n_subjects: usize,
    pub n_completed: usize,
    pub failed: Vec<String>,
    pub mean_gain: f64,
    pub mean_gain_when_improvement: f64,
    pub n_improved: usize,
    pub assignment_counts: BTreeMap<String, usize>,
    pub wilcoxon_mar_vs_direct: Option<WilcoxonReport>,
}

/// Burden-map sidecar.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BurdenSidecar {
    pub threshold: f64,
    pub n_included: usize,
    pub n_total: usize,
}

/// Top-level run manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub config: serde_json::Value,
}

pub fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}
