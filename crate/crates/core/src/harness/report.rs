use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{RunConfig, SCHEMA_VERSION};
use crate::error::{Error, Result};

/// A plottable table; written as `<suite>-<name>.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Series {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub suite: String,
    pub trials: usize,
    pub failures: usize,
    /// Smallest `bound - measured` over all checks; negative means a failure.
    pub worst_margin: f64,
    pub seed: u64,
    /// Fitted constants and other scalar outputs.
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
    /// The first few failure descriptions.
    #[serde(default)]
    pub notes: Vec<String>,
    #[serde(default)]
    pub series: Vec<Series>,
    /// Measured duration; never written to reports.
    #[serde(skip)]
    pub wall_time: Option<f64>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.worst_margin.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub config: RunConfig,
    pub suites: Vec<SuiteResult>,
    pub pass: bool,
}

impl Report {
    pub fn new(config: &RunConfig, results: &[SuiteResult]) -> Result<Self> {
        if results.is_empty() {
            return Err(Error::InvalidArgument("report needs at least one suite result".into()));
        }
        let suites: Vec<SuiteResult> = results
            .iter()
            .map(|r| SuiteResult {
                wall_time: None,
                ..r.clone()
            })
            .collect();
        Ok(Report {
            schema_version: SCHEMA_VERSION,
            config: config.clone(),
            pass: suites.iter().all(SuiteResult::passed),
            suites,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// Writes the JSON report to `path` and one CSV per series next to it (or
/// into `csv_dir`); returns every written path.
pub fn emit_report(report: &Report, path: &Path, csv_dir: Option<&Path>) -> Result<Vec<PathBuf>> {
    let io = |e: std::io::Error, p: &Path| Error::Io(format!("{}: {e}", p.display()));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io(e, parent))?;
    }
    fs::write(path, report.to_json()?).map_err(|e| io(e, path))?;
    let mut written = vec![path.to_path_buf()];
    let dir = csv_dir
        .map(Path::to_path_buf)
        .or_else(|| path.parent().map(Path::to_path_buf))
        .unwrap_or_default();
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(&dir).map_err(|e| io(e, &dir))?;
    }
    for suite in &report.suites {
        for series in &suite.series {
            let p = dir.join(format!("{}-{}.csv", suite.suite, series.name));
            fs::write(&p, series.to_csv()).map_err(|e| io(e, &p))?;
            written.push(p);
        }
    }
    Ok(written)
}
