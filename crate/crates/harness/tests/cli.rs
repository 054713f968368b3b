use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bergman_harness::{emit_report, run_scenarios, Format, ScenarioConfig};

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn lab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bergman-lab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn bergman-lab")
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

fn column(path: &Path, name: &str) -> usize {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers().unwrap().iter().position(|h| h == name).unwrap()
}

#[test]
fn two_node_scenario_is_green_with_expected_margin() {
    let out = tempfile::tempdir().unwrap();
    let file = scenario_dir().join("two_node.json");
    let o = lab(&["run", file.to_str().unwrap()], out.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let path = out.path().join("comparison.csv");
    let m = column(&path, "margin");
    let rows = csv_rows(&path);
    assert_eq!(rows.len(), 1);
    let margin: f64 = rows[0][m].parse().unwrap();
    let expected = 1.0f64.exp() / (1.0f64.exp() + (-1.0f64).exp()) - 0.5;
    assert!((margin - expected).abs() <= 1e-12);
    assert!((margin - 0.3808).abs() < 1e-4);
    assert!(out.path().join("homotopy.csv").exists());
    assert!(!out.path().join("tcz.csv").exists());
}

#[test]
fn equal_weights_give_zero_margins() {
    let out = tempfile::tempdir().unwrap();
    let file = scenario_dir().join("equal_weights.json");
    let o = lab(&["run", file.to_str().unwrap()], out.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let path = out.path().join("comparison.csv");
    let m = column(&path, "margin");
    let rows = csv_rows(&path);
    assert!(!rows.is_empty());
    for r in rows {
        assert_eq!(r[m].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn malformed_measure_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.json");
    fs::write(
        &file,
        r#"{
  "id": "bad",
  "measure": {"kind": "discrete", "points": [[0, 0]], "mass": [1]},
  "span": {"kind": "monomials", "degree": 0},
  "phi": {"kind": "constant", "c": 0},
  "psi": {"kind": "constant", "c": 0}
}"#,
    )
    .unwrap();
    let o = lab(&["run", file.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.json") && err.contains("line 3"), "{err}");
}

#[test]
fn invalid_tolerance_scale_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let file = scenario_dir().join("two_node.json");
    let o = lab(&["run", file.to_str().unwrap(), "--tol-scale", "0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failing_check_sets_exit_status_one() {
    let dir = tempfile::tempdir().unwrap();
    let file = scenario_dir().join("two_node.json");
    // A tiny tolerance scale turns the strictness threshold into an
    // unreachable margin.
    let o = lab(&["run", file.to_str().unwrap(), "--tol-scale", "1e-20"], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn json_format_writes_one_document() {
    let dir = tempfile::tempdir().unwrap();
    let file = scenario_dir().join("two_node.json");
    let o = lab(&["run", file.to_str().unwrap(), "--format", "json"], dir.path());
    assert!(o.status.success());
    let mut names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "timings.csv")
        .collect();
    names.sort();
    assert_eq!(names, ["report.json", "summary.json"]);
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(doc["checks"].as_array().unwrap().len(), 2);
    assert_eq!(doc["tables"]["comparison"].as_array().unwrap().len(), 1);
}

#[test]
fn empty_check_list_writes_only_the_summary() {
    let mut config = ScenarioConfig::load(&scenario_dir().join("two_node.json")).unwrap();
    config.checks.clear();
    let report = run_scenarios(&[config], 1.0, Some(1)).unwrap();
    assert!(report.passed());
    let dir = tempfile::tempdir().unwrap();
    emit_report(&report, Format::Csv, dir.path()).unwrap();
    let names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names, ["summary.json"]);
}

#[test]
fn duplicate_ids_are_rejected() {
    let config = ScenarioConfig::load(&scenario_dir().join("two_node.json")).unwrap();
    assert!(run_scenarios(&[config.clone(), config], 1.0, None).is_err());
}

#[test]
fn bundled_scenarios_are_green() {
    let configs: Vec<ScenarioConfig> = ["two_node", "equal_weights", "disk_harmonic", "fock_scaling"]
        .iter()
        .map(|n| ScenarioConfig::load(&scenario_dir().join(format!("{n}.json"))).unwrap())
        .collect();
    let report = run_scenarios(&configs, 1.0, None).unwrap();
    assert!(report.passed(), "{:?}", report.first_failure());
    assert_eq!(report.checks.len(), 12);
}
