//! End-to-end tests of the `dpnls` binary: exit codes, header stability,
//! determinism, and schema validity of the JSON reports.

use std::path::Path;
use std::process::{Command, Output};

fn dpnls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpnls"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 output")
}

fn assert_schema(name: &str, instance: &serde_json::Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../schemas")
        .join(name);
    let schema: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).expect("schema file")).unwrap();
    let compiled = jsonschema::JSONSchema::compile(&schema).expect("valid schema");
    let msgs: Vec<String> = match compiled.validate(instance) {
        Ok(()) => return,
        Err(errors) => errors.map(|e| e.to_string()).collect(),
    };
    panic!("schema {name} violations: {msgs:?}");
}

#[test]
fn classify_reports_the_gap_region_cell() {
    let out = dpnls(&["classify", "--p", "2.2", "--q", "3.0"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_schema("classify.schema.json", &v);
    assert_eq!(v["class"], "MassDerivNegativeFinite");
    assert_eq!(v["two_p_plus_q"], 7.4);
    let notes = v["notes"].as_array().unwrap();
    assert!(notes.iter().any(|n| n.as_str().unwrap().contains("violates q > gamma1")));
}

#[test]
fn classify_flags_the_gamma1_boundary() {
    // gamma1(2) = 17/5 exactly
    let out = dpnls(&["classify", "--p", "2", "--q", "3.4"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["notes"]
        .as_array()
        .unwrap()
        .iter()
        .any(|n| n.as_str().unwrap().contains("gap region boundary")));
}

#[test]
fn classify_endpoints() {
    let out = dpnls(&["classify", "--p", "2", "--q", "3"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["class"], "MassDerivZero");
    let out = dpnls(&["classify", "--p", "3", "--q", "4"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["class"], "MassDerivMinusInfinity");
}

#[test]
fn profile_header_and_spot_value() {
    let out = dpnls(&["profile", "--p", "2", "--q", "3", "--xmax", "2", "--n", "5"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,phi,phi_prime,phi_closed_form"));
    let first: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|c| c.parse().unwrap())
        .collect();
    // phi_0(0) = sqrt(a(0)) = 4/3 at (p, q) = (2, 3)
    assert!((first[1] - 4.0 / 3.0).abs() < 1e-10, "phi(0) = {}", first[1]);
    assert!((first[1] - first[3]).abs() < 1e-8);
}

#[test]
fn profile_closed_form_column_is_conditional() {
    let out = dpnls(&["profile", "--p", "2", "--q", "3.5", "--n", "3"]);
    let text = stdout(&out);
    assert_eq!(text.lines().next(), Some("x,phi,phi_prime"));
}

#[test]
fn profile_rejects_degenerate_grid() {
    let out = dpnls(&["profile", "--p", "2", "--q", "3", "--n", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    let v: serde_json::Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(v["exit_code"], 2);
}

#[test]
fn malformed_exponents_are_rejected() {
    let out = dpnls(&["classify", "--p", "3", "--q", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seedless_is_reserved() {
    let out = dpnls(&["classify", "--p", "2", "--q", "3", "--seedless"]);
    assert!(out.status.success());
    let out = dpnls(&["classify", "--p", "2", "--q", "3", "--seedless=rng"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eta_grid_is_even_and_pins_the_origin_value() {
    let out = dpnls(&["eta", "--p", "2", "--q", "3", "--xmax", "4", "--n", "9"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let m = rows.len();
    assert!(m % 2 == 1);
    for i in 0..m / 2 {
        let (neg, pos) = (&rows[i], &rows[m - 1 - i]);
        assert_eq!(neg[1], pos[1], "eta0 must mirror bit-exactly");
        assert_eq!(neg[0].trim_start_matches('-'), pos[0]);
    }
    let center = &rows[m / 2];
    assert_eq!(center[0].parse::<f64>().unwrap(), 0.0);
    assert!((center[1].parse::<f64>().unwrap() - 1.5).abs() < 1e-9);
    assert_eq!(text.lines().next().unwrap(), "x,eta0,eta0_prime,eta0_closed_form");
}

#[test]
fn eta_closed_form_column_absent_off_the_family() {
    let out = dpnls(&["eta", "--p", "2", "--q", "3.5", "--xmax", "1", "--n", "3"]);
    assert_eq!(stdout(&out).lines().next(), Some("x,eta0,eta0_prime"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let args = ["eta", "--p", "2.2", "--q", "3.4", "--xmax", "5", "--n", "11"];
    let first = dpnls(&args);
    let second = dpnls(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn mass_curve_fd_column_cross_checks_the_formula() {
    let out = dpnls(&[
        "mass-curve", "--p", "2", "--q", "3", "--omega-min", "0", "--omega-max", "0.2", "--n", "3",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("omega,mass,mass_prime,mass_prime_fd"));
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        let omega: f64 = cells[0].parse().unwrap();
        if omega == 0.0 {
            assert!(cells[3].is_empty(), "no symmetric difference at omega = 0");
        } else {
            let mp: f64 = cells[2].parse().unwrap();
            let fd: f64 = cells[3].parse().unwrap();
            assert!((mp - fd).abs() < 1e-4 * mp.abs().max(1.0), "{mp} vs {fd}");
        }
    }
}

#[test]
fn mass_curve_marks_divergence_with_a_literal() {
    let out = dpnls(&[
        "mass-curve", "--p", "3", "--q", "4", "--omega-min", "0", "--omega-max", "0.1", "--n", "2",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let row = text.lines().nth(1).unwrap();
    assert_eq!(row.split(',').nth(2), Some("-inf"));
}

#[test]
fn unstable_emits_not_applicable_json_below_the_threshold() {
    let out = dpnls(&["unstable", "--p", "1.5", "--q", "2.5"]);
    assert_eq!(out.status.code(), Some(4));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_schema("unstable.schema.json", &v);
    assert!(v["not_applicable"].as_str().unwrap().contains("classifies"));
}

#[test]
fn unstable_echoes_the_schedule_and_reports() {
    let out = dpnls(&["unstable", "--p", "2", "--q", "3.5", "--r", "50", "--r", "100"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_schema("unstable.schema.json", &v);
    assert_eq!(v["schedule"].as_array().unwrap().len(), 2);
    let reports = v["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 2);
    for report in reports {
        assert!(report["total"].as_f64().unwrap() < 0.0);
    }
    assert!(out.status.success(), "a certified scale exists on this cell");
    assert!(v["selected"].is_object());
}

#[test]
fn evolve_stationary_series_is_flat_and_deterministic() {
    let args = [
        "evolve", "--p", "2", "--q", "3.5", "--lambda", "0", "--t-max", "0.05",
        "--n", "1024", "--sample-every", "10",
    ];
    let first = dpnls(&args);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let text = stdout(&first);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("t,energy,charge,modulation_distance,sup_norm")
    );
    for line in lines {
        let dist: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!(dist < 1e-3, "stationary run drifted: {line}");
    }
    let second = dpnls(&args);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn config_file_fills_gaps_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    std::fs::write(&path, "p = 2\nq = 3\n# comment\n").unwrap();
    let cfg = path.to_str().unwrap();
    let out = dpnls(&["classify", "--config", cfg]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["class"], "MassDerivZero");
    let out = dpnls(&["classify", "--config", cfg, "--q", "3.5"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["class"], "MassDerivNegativeFinite");
}

#[test]
fn out_writes_data_and_metadata_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("profile.csv");
    let out = dpnls(&[
        "profile", "--p", "2", "--q", "3", "--n", "3", "--out", data.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let written = std::fs::read_to_string(&data).unwrap();
    assert!(written.starts_with("x,phi,phi_prime"));
    let sidecar = dir.path().join("profile.csv.meta.json");
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(sidecar).unwrap()).unwrap();
    assert_eq!(meta["tool"], "dpnls-cli");
    // the data file itself carries no run metadata, only header + rows
    assert_eq!(written.lines().count(), 4);
    assert!(!written.contains("tool"));
}

#[test]
fn json_format_renders_tables_as_row_objects() {
    let out = dpnls(&[
        "profile", "--p", "2", "--q", "3", "--n", "3", "--format", "json",
    ]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows[0]["phi"].is_number());
}

#[test]
fn report_subcommands_reject_csv() {
    let out = dpnls(&["classify", "--p", "2", "--q", "3", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_passes_on_the_closed_form_cell() {
    let out = dpnls(&["validate", "--p", "2", "--q", "3"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_schema("validate.schema.json", &v);
    assert!(
        v["all_pass"].as_bool().unwrap(),
        "failed checks: {}",
        v["checks"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|c| !c["pass"].as_bool().unwrap())
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    );
    assert!(out.status.success());
}

#[test]
fn validate_passes_off_the_closed_form_family() {
    let out = dpnls(&["validate", "--p", "2", "--q", "3.5"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["all_pass"].as_bool().unwrap(), "{v:#}");
}
