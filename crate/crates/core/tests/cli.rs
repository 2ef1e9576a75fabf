use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn lcbound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lcbound")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn config(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", name].iter().collect();
    p.to_string_lossy().into_owned()
}

#[test]
fn special_case_reports_constants() {
    let out = lcbound(&["special-case", "--tolerance", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["command"], "special-case");
    assert_eq!(v["K"], 50);
    assert!((v["kappa"].as_f64().unwrap() - 0.078_945_902_797_474_27).abs() < 1e-15);
    assert!((v["m0"].as_f64().unwrap() / 9.475_797_230_912_78e57 - 1.0).abs() < 1e-12);
    assert!(v["bound"].as_f64().unwrap() <= 0.5);
}

#[test]
fn out_of_domain_exits_2() {
    let out = lcbound(&["special-case", "--beta0", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta0"));
    let loose = json(&lcbound(&["special-case", "--tolerance", "1.9"]));
    assert!(loose["bound"].as_f64().unwrap() <= 1.9);
    assert!(loose["m0"].as_f64().unwrap() < 9.475_797_230_912_78e57);
    assert_eq!(lcbound(&["special-case", "--tolerance", "1e-300"]).status.code(), Some(3));
    assert_eq!(lcbound(&["bound", "--n", "4", "--frobnicate"]).status.code(), Some(2));
}

#[test]
fn validate_default_passes_with_warning() {
    let out = lcbound(&["validate"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["passed"], true);
    assert_eq!(v["warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn halving_b_fails_validation() {
    let out = lcbound(&["validate", "--b-scale", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    let failed: Vec<&str> = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["status"] == "fail")
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["drift, exact b"]);
}

#[test]
fn sweep_csv_has_nonincreasing_bound() {
    let out = lcbound(&["sweep", "--n-grid", "8,16,32,64,128", "--n-ref", "1024", "--output", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let mut rdr = csv::Reader::from_reader(&out.stdout[..]);
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["n", "m_star", "bound", "empirical_tv", "boundary_mass", "runtime_ms"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 5);
    let bound: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(bound.windows(2).all(|w| w[1] <= w[0]));
    let tv: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(tv.iter().zip(&bound).all(|(t, b)| t <= b));
}

#[test]
fn sweep_single_row_and_margin() {
    let out = lcbound(&["sweep", "--n-grid", "16", "--n-ref", "128"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["rows"].as_array().unwrap().len(), 1);
    assert_eq!(lcbound(&["sweep", "--n-grid", "16", "--n-ref", "100"]).status.code(), Some(2));
    assert_eq!(lcbound(&["sweep", "--n-grid", ""]).status.code(), Some(2));
}

#[test]
fn output_is_deterministic() {
    let args = ["validate", "--n-grid", "8,16", "--n-ref", "128", "--seed", "7"];
    let a = lcbound(&args);
    let b = lcbound(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out = lcbound(&["special-case", "--tolerance", "1", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(v["command"], "special-case");
}

#[test]
fn config_files_and_overrides() {
    let out = lcbound(&["validate", "--config", &config("special_case.ini")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["n_grid"].as_array().unwrap().len(), 5);

    let out = lcbound(&["special-case", "--config", &config("special_case.ini"), "--beta2", "5"]);
    assert_eq!(json(&out)["beta2"].as_f64(), Some(5.0));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.ini");
    std::fs::write(&bad, "[model]\nkind = special-case\ncolour = blue\n").unwrap();
    assert_eq!(lcbound(&["validate", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(lcbound(&["validate", "--config", "/nonexistent.ini"]).status.code(), Some(2));
}

#[test]
fn gig1_custom_model() {
    let out = lcbound(&["validate", "--config", &config("gig1_custom.ini")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["model"], "gig1-custom");

    let out = lcbound(&["sweep", "--config", &config("gig1_custom.ini")]);
    assert_eq!(out.status.code(), Some(0));
    let rows = json(&out)["rows"].as_array().unwrap().clone();
    assert_eq!(rows.len(), 3);
    for r in rows {
        assert!(r["empirical_tv"].as_f64().unwrap() <= r["bound"].as_f64().unwrap());
    }
}

#[test]
fn truncation_and_stationary() {
    let out = lcbound(&["truncate", "--n", "4", "--output", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let out = lcbound(&["stationary", "--n", "16"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let pi: Vec<Vec<f64>> = serde_json::from_value(v["pi"].clone()).unwrap();
    assert_eq!(pi.len(), 17);
    assert!((pi.iter().flatten().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn bound_variants() {
    let special = json(&lcbound(&["bound", "--n", "1e6", "--m", "1e20"]));
    assert_eq!(special["variant"], "special");
    let v = special["bound_value"].as_f64().unwrap();
    let sum = special["term_mixing"].as_f64().unwrap() + special["term_truncation"].as_f64().unwrap();
    assert_eq!(v, sum);

    let main_b = ["bound", "--variant", "main-b", "--n", "100", "--m", "10", "--kappa", "0.1", "--phi-beta0", "1.5"];
    assert_eq!(lcbound(&main_b).status.code(), Some(2));
    let mut full = main_b.to_vec();
    full.extend(["--v1-varpi", "3", "--b", "1", "--phi-v-n", "2"]);
    let out = lcbound(&full);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["term_truncation"].as_f64(), Some(2.0 * 10.0 * 1.0 / 2.0));

    let out = lcbound(&["bound", "--variant", "gig1", "--config", &config("gig1_custom.ini"), "--n", "64"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(lcbound(&["bound", "--variant", "gig1", "--n", "64"]).status.code(), Some(2));
}
