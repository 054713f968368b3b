//! Report model and its CSV / JSON serialization.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{Check, Tolerances};
use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub scenario_id: String,
    pub c: f64,
    pub set_size: usize,
    pub set_proper: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomotopyRow {
    pub scenario_id: String,
    pub t: f64,
    #[serde(rename = "G")]
    pub g: f64,
    pub rhs26: f64,
    pub rhs27: f64,
    pub rhs28: f64,
    pub fd: f64,
    pub fd_step: f64,
    pub max_pairwise_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TczRow {
    pub scenario_id: String,
    pub k: f64,
    pub degree: usize,
    pub n_eval_points: usize,
    pub max_abs_dev: Option<f64>,
    pub mean_abs_dev: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralRow {
    pub scenario_id: String,
    pub weight: String,
    pub rank: usize,
    pub trace: f64,
    pub trace_err: f64,
    pub reproducing_residual: f64,
    pub orthonormality_defect: f64,
    pub min_eigenvalue: f64,
    pub shift_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxPrincipleRow {
    pub scenario_id: String,
    pub omega_size: usize,
    pub verdict: String,
    pub node: Option<usize>,
}

/// Outcome of one check on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub scenario_id: String,
    pub check: Check,
    pub passed: bool,
    pub metrics: BTreeMap<String, f64>,
    /// First failed condition, if any.
    pub failure: Option<String>,
}

impl CheckResult {
    pub fn new(scenario_id: &str, check: Check) -> Self {
        Self {
            scenario_id: scenario_id.to_string(),
            check,
            passed: true,
            metrics: BTreeMap::new(),
            failure: None,
        }
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    /// Records `cond`; the first false condition is kept as the failure.
    pub fn require(&mut self, cond: bool, what: impl FnOnce() -> String) {
        if !cond {
            if self.passed {
                self.failure = Some(what());
            }
            self.passed = false;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub scenario_id: String,
    pub check: Check,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Tables {
    pub structural: Vec<StructuralRow>,
    pub comparison: Vec<ComparisonRow>,
    pub homotopy: Vec<HomotopyRow>,
    pub tcz: Vec<TczRow>,
    pub maxprinciple: Vec<MaxPrincipleRow>,
}

impl Tables {
    pub fn extend(&mut self, other: Tables) {
        self.structural.extend(other.structural);
        self.comparison.extend(other.comparison);
        self.homotopy.extend(other.homotopy);
        self.tcz.extend(other.tcz);
        self.maxprinciple.extend(other.maxprinciple);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub mode: String,
    pub seed: Option<u64>,
    pub n_scenarios: usize,
    pub tol_scale: f64,
    pub tolerances: Tolerances,
    pub versions: BTreeMap<String, String>,
}

impl RunMeta {
    pub fn new(mode: &str, seed: Option<u64>, n_scenarios: usize, tol_scale: f64) -> Self {
        let versions = [
            ("bergman-harness", env!("CARGO_PKG_VERSION")),
            ("report-schema", "1"),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        Self {
            mode: mode.to_string(),
            seed,
            n_scenarios,
            tol_scale,
            tolerances: Tolerances::default().scaled(tol_scale),
            versions,
        }
    }
}

/// Everything a run produced. Wall-clock times live in `timings` and are
/// written to their own file, so the remaining output is reproducible byte
/// for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub meta: RunMeta,
    pub checks: Vec<CheckResult>,
    pub tables: Tables,
    /// Scenario JSON of the first failing scenario, ready to re-run.
    pub failure_dump: Option<String>,
    #[serde(skip)]
    pub timings: Vec<Timing>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn n_failed(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }

    pub fn first_failure(&self) -> Option<&CheckResult> {
        self.checks.iter().find(|c| !c.passed)
    }

    fn executed(&self) -> Vec<Check> {
        let mut seen: Vec<Check> = self.checks.iter().map(|c| c.check).collect();
        seen.sort();
        seen.dedup();
        seen
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    passed: bool,
    n_checks: usize,
    n_failed: usize,
    meta: &'a RunMeta,
    suites: BTreeMap<&'static str, SuiteSummary>,
    first_failure: Option<&'a CheckResult>,
    failure_dump: Option<&'a str>,
}

#[derive(Serialize)]
struct SuiteSummary {
    checks: usize,
    failed: usize,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |e| HarnessError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<(), HarnessError> {
    let csv_err = |e: csv::Error| HarnessError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    if rows.is_empty() {
        w.write_record(header).map_err(csv_err)?;
    }
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(io_err(path))
}

/// Writes the report into `out_dir` and returns the paths written.
pub fn emit_report(report: &RunReport, format: Format, out_dir: &Path) -> Result<Vec<String>, HarnessError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut written = Vec::new();
    let executed = report.executed();
    let mut suites = BTreeMap::new();
    for check in &executed {
        let of_kind = report.checks.iter().filter(|c| c.check == *check);
        suites.insert(
            check.name(),
            SuiteSummary {
                checks: of_kind.clone().count(),
                failed: of_kind.filter(|c| !c.passed).count(),
            },
        );
    }
    let summary = Summary {
        passed: report.passed(),
        n_checks: report.checks.len(),
        n_failed: report.n_failed(),
        meta: &report.meta,
        suites,
        first_failure: report.first_failure(),
        failure_dump: report.failure_dump.as_deref(),
    };
    match format {
        _ if report.checks.is_empty() => {}
        Format::Json => {
            let path = out_dir.join("report.json");
            write_text(&path, &pretty(report))?;
            written.push(path);
        }
        Format::Csv => {
            let t = &report.tables;
            let has = |c: Check| executed.contains(&c);
            if has(Check::Structural) {
                let path = out_dir.join("structural.csv");
                write_csv(
                    &path,
                    &t.structural,
                    &[
                        "scenario_id",
                        "weight",
                        "rank",
                        "trace",
                        "trace_err",
                        "reproducing_residual",
                        "orthonormality_defect",
                        "min_eigenvalue",
                        "shift_dev",
                    ],
                )?;
                written.push(path);
            }
            if has(Check::Comparison) || has(Check::Sweep) {
                let path = out_dir.join("comparison.csv");
                write_csv(
                    &path,
                    &t.comparison,
                    &["scenario_id", "c", "set_size", "set_proper", "lhs", "rhs", "margin", "verdict"],
                )?;
                written.push(path);
            }
            if has(Check::Homotopy) {
                let path = out_dir.join("homotopy.csv");
                write_csv(
                    &path,
                    &t.homotopy,
                    &["scenario_id", "t", "G", "rhs26", "rhs27", "rhs28", "fd", "fd_step", "max_pairwise_dev"],
                )?;
                written.push(path);
            }
            if has(Check::Tcz) {
                let path = out_dir.join("tcz.csv");
                write_csv(
                    &path,
                    &t.tcz,
                    &["scenario_id", "k", "degree", "n_eval_points", "max_abs_dev", "mean_abs_dev"],
                )?;
                written.push(path);
            }
            if has(Check::Maxprinciple) {
                let path = out_dir.join("maxprinciple.csv");
                write_csv(&path, &t.maxprinciple, &["scenario_id", "omega_size", "verdict", "node"])?;
                written.push(path);
            }
            let path = out_dir.join("checks.csv");
            write_checks(&path, &report.checks)?;
            written.push(path);
        }
    }
    let path = out_dir.join("summary.json");
    write_text(&path, &pretty(&summary))?;
    written.push(path);
    if !report.timings.is_empty() {
        let path = out_dir.join("timings.csv");
        write_csv(&path, &report.timings, &["scenario_id", "check", "seconds"])?;
        written.push(path);
    }
    Ok(written.into_iter().map(|p| p.display().to_string()).collect())
}

#[derive(Serialize)]
struct CheckLine<'a> {
    scenario_id: &'a str,
    check: &'static str,
    passed: bool,
    failure: &'a str,
}

fn write_checks(path: &Path, checks: &[CheckResult]) -> Result<(), HarnessError> {
    let lines: Vec<CheckLine<'_>> = checks
        .iter()
        .map(|c| CheckLine {
            scenario_id: &c.scenario_id,
            check: c.check.name(),
            passed: c.passed,
            failure: c.failure.as_deref().unwrap_or(""),
        })
        .collect();
    write_csv(path, &lines, &["scenario_id", "check", "passed", "failure"])
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}
