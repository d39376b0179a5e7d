//! Report documents: one JSON file per run plus CSV tables.

use std::fs;
use std::path::{Path, PathBuf};

use anosov_core::quadrature::Estimate;
use anosov_core::tolerances::SIGMA_FLOOR;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// One numeric claim with the bound it was held to.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    pub pass: bool,
}

impl Check {
    /// `|value| <= tolerance`.
    pub fn abs_within(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), value, tolerance, sigma: None, pass: value.abs() <= tolerance }
    }

    /// `value >= threshold`; the threshold is stored as the tolerance.
    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, tolerance: threshold, sigma: None, pass: value >= threshold }
    }

    /// `|value/target - 1| <= rel`, stored as the relative deviation.
    pub fn relative(name: impl Into<String>, value: f64, target: f64, rel: f64) -> Self {
        let dev = (value / target - 1.0).abs();
        Check { name: name.into(), value: dev, tolerance: rel, sigma: None, pass: dev <= rel }
    }

    /// `|estimate - target| <= 3σ + floor`, stored as the deviation.
    pub fn three_sigma(name: impl Into<String>, est: &Estimate, target: f64) -> Self {
        let dev = (est.value - target).abs();
        let tol = 3.0 * est.sigma + SIGMA_FLOOR;
        Check { name: name.into(), value: dev, tolerance: tol, sigma: Some(est.sigma), pass: dev <= tol }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Check { name: name.into(), value: if ok { 1.0 } else { 0.0 }, tolerance: 1.0, sigma: None, pass: ok }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&'static str]) -> Self {
        Table { name: name.to_string(), columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Outcome of one suite.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub details: Value,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

impl SuiteReport {
    pub fn new(suite: &str, checks: Vec<Check>, details: Value, tables: Vec<Table>) -> Self {
        let pass = !checks.is_empty() && checks.iter().all(|c| c.pass);
        SuiteReport { suite: suite.to_string(), pass, checks, details, tables }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

#[derive(Serialize)]
struct Body<'a> {
    schema_version: u32,
    command: &'a str,
    config: &'a RunConfig,
    pass: bool,
    suites: &'a [SuiteReport],
}

/// Serializes the run document with its SHA-256 over the hash-free body.
pub fn render_json(command: &str, cfg: &RunConfig, suites: &[SuiteReport]) -> String {
    let body = Body { schema_version: SCHEMA_VERSION, command, config: cfg, pass: suites.iter().all(|s| s.pass), suites };
    let mut value = serde_json::to_value(&body).expect("report is serializable");
    let digest = Sha256::digest(serde_json::to_vec(&value).expect("report is serializable"));
    value
        .as_object_mut()
        .expect("body is an object")
        .insert("content_sha256".into(), Value::String(hex::encode(digest)));
    let mut text = serde_json::to_string_pretty(&value).expect("report is serializable");
    text.push('\n');
    text
}

pub fn render_csv(table: &Table) -> std::io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.into_inner().map_err(|e| e.into_error())
}

/// Writes `<command>.json` and `<suite>_<table>.csv` under `dir`; returns the paths.
pub fn write_outputs(dir: &Path, command: &str, cfg: &RunConfig, suites: &[SuiteReport]) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let json = dir.join(format!("{command}.json"));
    fs::write(&json, render_json(command, cfg, suites))?;
    written.push(json);
    for s in suites {
        for t in &s.tables {
            let path = dir.join(format!("{}_{}.csv", s.suite, t.name));
            fs::write(&path, render_csv(t)?)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Shortest round-trip decimal form, stable across runs.
pub fn fmt(x: f64) -> String {
    format!("{x:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks() {
        assert!(Check::abs_within("a", -1e-13, 1e-12).pass);
        assert!(!Check::abs_within("a", f64::NAN, 1e-12).pass);
        assert!(Check::relative("r", 0.1406, 0.140600, 0.05).pass);
        assert!(!Check::at_least("m", 0.12, 0.13).pass);
        let est = Estimate::from_replicas(vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        assert!(Check::three_sigma("e", &est, 1.0).pass);
    }

    #[test]
    fn empty_suite_fails() {
        assert!(!SuiteReport::new("x", vec![], Value::Null, vec![]).pass);
    }

    #[test]
    fn json_hash_is_stable_and_sensitive() {
        let cfg = RunConfig::default();
        let s = vec![SuiteReport::new("x", vec![Check::flag("ok", true)], Value::Null, vec![])];
        let a = render_json("model", &cfg, &s);
        assert_eq!(a, render_json("model", &cfg, &s));
        assert_ne!(a, render_json("rates", &cfg, &s));
        let v: Value = serde_json::from_str(&a).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["content_sha256"].as_str().unwrap().len(), 64);
    }

    #[test]
    fn csv_quotes_per_rfc4180() {
        let mut t = Table::new("t", &["a", "b"]);
        t.push(vec!["x,y".into(), "say \"hi\"".into()]);
        let text = String::from_utf8(render_csv(&t).unwrap()).unwrap();
        assert_eq!(text, "a,b\n\"x,y\",\"say \"\"hi\"\"\"\n");
    }
}
