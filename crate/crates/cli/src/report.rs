//! Reports: a deterministic JSON document plus CSV tables.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Battery, ExperimentConfig};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = "<")]
    Below,
    #[serde(rename = ">=")]
    AtLeast,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::AtMost => "<=",
            Relation::Below => "<",
            Relation::AtLeast => ">=",
        })
    }
}

/// One thresholded quantity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub label: String,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(label: impl Into<String>, value: f64, relation: Relation, threshold: f64) -> Self {
        let passed = match relation {
            Relation::AtMost => value <= threshold,
            Relation::Below => value < threshold,
            Relation::AtLeast => value >= threshold,
        };
        Check {
            label: label.into(),
            value,
            relation,
            threshold,
            passed,
        }
    }

    pub fn at_most(label: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(label, value, Relation::AtMost, threshold)
    }

    pub fn below(label: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(label, value, Relation::Below, threshold)
    }

    pub fn at_least(label: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(label, value, Relation::AtLeast, threshold)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: {:.4e} {} {:.4e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.label,
            self.value,
            self.relation,
            self.threshold
        )
    }
}

/// A plot-ready table, written as `<report>-<name>.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Table {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// What a battery produces before run metadata is attached.
#[derive(Debug, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub details: serde_json::Value,
    pub tables: Vec<Table>,
}

/// The only non-deterministic part of a report.
#[derive(Clone, Debug, Serialize)]
pub struct RunInfo {
    pub started_unix_seconds: u64,
    pub elapsed_seconds: f64,
    pub threads: usize,
    pub version: &'static str,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub name: String,
    pub battery: Battery,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub config: ExperimentConfig,
    pub details: serde_json::Value,
    #[serde(skip)]
    pub tables: Vec<Table>,
    pub run_info: RunInfo,
}

impl Report {
    pub fn new(config: ExperimentConfig, outcome: Outcome, run_info: RunInfo) -> Self {
        let passed = !outcome.checks.is_empty() && outcome.checks.iter().all(|c| c.passed);
        Report {
            name: config.name.clone(),
            battery: config.battery,
            passed,
            checks: outcome.checks,
            config,
            details: outcome.details,
            tables: outcome.tables,
            run_info,
        }
    }

    /// JSON without `run_info`, for reproducibility comparisons.
    pub fn deterministic_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("run_info");
        }
        Ok(serde_json::to_string_pretty(&v)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `<name>.json` and one CSV per table; returns the paths written.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::with_capacity(1 + self.tables.len());
        let json = dir.join(format!("{}.json", self.name));
        std::fs::write(&json, self.to_json()? + "\n")?;
        written.push(json);
        for t in &self.tables {
            let p = dir.join(format!("{}-{}.csv", self.name, t.name));
            std::fs::write(&p, t.to_csv()?)?;
            written.push(p);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relations_decide_pass() {
        assert!(Check::at_most("x", 1.0, 1.0).passed);
        assert!(!Check::below("x", 1.0, 1.0).passed);
        assert!(Check::at_least("x", -3.1, -3.2).passed);
        assert!(!Check::at_most("x", f64::NAN, 1.0).passed);
    }

    #[test]
    fn csv_quotes_fields_with_commas() {
        let mut t = Table::new("t", &["a", "b"]);
        t.push(vec!["1".into(), "x,y".into()]);
        assert_eq!(t.to_csv().unwrap(), "a,b\n1,\"x,y\"\n");
    }
}
