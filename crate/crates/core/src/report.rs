//! Run reports: a JSON summary plus CSV tables written next to it.
//!
//! Report layout (`<experiment>.json`):
//!
//! | field        | meaning                                                   |
//! |--------------|-----------------------------------------------------------|
//! | `experiment` | run identifier, also the file stem                        |
//! | `kind`       | `fit`, `pinn`, `ts` or `gradcheck`                        |
//! | `version`    | crate version that produced the report                    |
//! | `seed`       | seed the run was started from                             |
//! | `config`     | full configuration snapshot                               |
//! | `metrics`    | headline metrics                                          |
//! | `extra`      | further named metrics (grid error, per-model rows)        |
//! | `values`     | scalar diagnostics (final loss, parameter count, ...)     |
//! | `history`    | `(step, loss)` pairs                                      |
//! | `artifacts`  | CSV files written alongside, relative to the report       |
//! | `references` | published numbers for comparison, never computed here     |
//! | `checks`     | threshold checks declared in the config and their outcome |

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Metrics;
use crate::reference::ReferenceRow;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: Bound::AtMost,
            limit,
            passed: value <= limit,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: Bound::AtLeast,
            limit,
            passed: value >= limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub experiment: String,
    pub kind: String,
    pub version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub metrics: Metrics,
    #[serde(default)]
    pub extra: BTreeMap<String, Metrics>,
    #[serde(default)]
    pub values: BTreeMap<String, f64>,
    #[serde(default)]
    pub history: Vec<(usize, f64)>,
    #[serde(default)]
    pub artifacts: Vec<String>,
    #[serde(default)]
    pub references: Vec<ReferenceRow>,
    #[serde(default)]
    pub checks: Vec<Check>,
}

/// A CSV artifact: header plus numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

impl RunReport {
    pub fn new(
        experiment: &str,
        kind: &str,
        seed: u64,
        config: serde_json::Value,
        metrics: Metrics,
    ) -> Self {
        Self {
            experiment: experiment.into(),
            kind: kind.into(),
            version: VERSION.into(),
            seed,
            config,
            metrics,
            extra: BTreeMap::new(),
            values: BTreeMap::new(),
            history: Vec::new(),
            artifacts: Vec::new(),
            references: Vec::new(),
            checks: Vec::new(),
        }
    }

    /// True when every declared check passed (vacuously true with none).
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Every metrics block satisfies `rmse^2 = mse` and `mae <= rmse`.
    pub fn metrics_consistent(&self) -> bool {
        self.metrics.identities_hold() && self.extra.values().all(Metrics::identities_hold)
    }

    /// Copy with all wall-clock fields zeroed, for comparing reruns.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.metrics.wall_time_s = 0.0;
        for m in r.extra.values_mut() {
            m.wall_time_s = 0.0;
        }
        r.values.retain(|k, _| !k.ends_with("time_s"));
        r
    }

    /// Resolves a metric name: `mse`, `rmse`, `mae`, `wall_time_s` for the
    /// headline block, `<block>.<field>` for an entry of `extra`, otherwise a
    /// key of `values`.
    pub fn lookup(&self, key: &str) -> Option<f64> {
        let field = |m: &Metrics, f: &str| match f {
            "mse" => Some(m.mse),
            "rmse" => Some(m.rmse),
            "mae" => Some(m.mae),
            "wall_time_s" => Some(m.wall_time_s),
            _ => None,
        };
        if let Some(v) = field(&self.metrics, key) {
            return Some(v);
        }
        if let Some((block, f)) = key.rsplit_once('.') {
            if let Some(m) = self.extra.get(block) {
                return field(m, f);
            }
        }
        self.values.get(key).copied()
    }

    pub fn path_in(&self, dir: &Path) -> PathBuf {
        dir.join(format!("{}.json", self.experiment))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Writes each table as `<experiment>_<name>.csv` and the report as
/// `<experiment>.json` into an existing directory. Returns the report path.
pub fn emit_report(report: &mut RunReport, dir: &Path, tables: &[Table]) -> Result<PathBuf> {
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "output directory does not exist",
            ),
        ));
    }
    for t in tables {
        let file = format!("{}_{}.csv", report.experiment, t.name);
        write_csv(&dir.join(&file), t)?;
        if !report.artifacts.contains(&file) {
            report.artifacts.push(file);
        }
    }
    let path = report.path_in(dir);
    let text = serde_json::to_string_pretty(report)?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn write_csv(path: &Path, table: &Table) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        msg: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(&table.header).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| format!("{v:e}")))
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
