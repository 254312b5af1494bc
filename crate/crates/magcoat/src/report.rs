//! Cross-scenario comparison of metrics files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use magcoat_core::analysis::MetricsReport;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dir: PathBuf,
    /// `None` marks a run without a readable metrics file.
    pub metrics: Option<MetricsReport>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub rows: Vec<ReportRow>,
}

fn load(dir: &Path) -> ReportRow {
    let path = dir.join("metrics.json");
    let parsed = std::fs::read_to_string(&path)
        .map_err(|e| e.to_string())
        .and_then(|t| serde_json::from_str::<MetricsReport>(&t).map_err(|e| e.to_string()));
    match parsed {
        Ok(m) => ReportRow {
            dir: dir.to_path_buf(),
            metrics: Some(m),
            status: "complete".into(),
        },
        Err(e) => ReportRow {
            dir: dir.to_path_buf(),
            metrics: None,
            status: format!("incomplete: {e}"),
        },
    }
}

/// One row per directory, in the given order.
pub fn report(dirs: &[PathBuf]) -> Result<ReportTable> {
    if dirs.is_empty() {
        return Err(Error::EmptyReport);
    }
    Ok(ReportTable {
        rows: dirs.iter().map(|d| load(d)).collect(),
    })
}

impl ReportTable {
    pub fn is_complete(&self) -> bool {
        self.rows.iter().all(|r| r.metrics.is_some())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<28} {:>10} {:>14} {:>9} {:>9}  status",
            "scenario", "rms_x_mm", "rms_angle_deg", "samples", "outliers"
        );
        for r in &self.rows {
            match &r.metrics {
                Some(m) => {
                    let _ = writeln!(
                        s,
                        "{:<28} {:>10.4} {:>14.4} {:>9} {:>9}  {}",
                        m.scenario_id,
                        m.rms_x_mm,
                        m.rms_angle_deg,
                        m.n_samples,
                        m.n_outliers_replaced,
                        r.status
                    );
                }
                None => {
                    let name = r
                        .dir
                        .file_name()
                        .map(|n| n.to_string_lossy().into_owned())
                        .unwrap_or_default();
                    let _ = writeln!(
                        s,
                        "{:<28} {:>10} {:>14} {:>9} {:>9}  {}",
                        name, "-", "-", "-", "-", r.status
                    );
                }
            }
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "scenario_id,rms_x_mm,rms_angle_deg,n_samples,n_outliers_replaced,status\n",
        );
        for r in &self.rows {
            match &r.metrics {
                Some(m) => {
                    let _ = writeln!(
                        s,
                        "{},{:.8e},{:.8e},{},{},complete",
                        m.scenario_id,
                        m.rms_x_mm,
                        m.rms_angle_deg,
                        m.n_samples,
                        m.n_outliers_replaced
                    );
                }
                None => {
                    let _ = writeln!(s, "{},,,,,incomplete", r.dir.display());
                }
            }
        }
        s
    }
}
