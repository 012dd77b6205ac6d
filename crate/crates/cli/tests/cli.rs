use std::path::Path;
use std::process::{Command, Output};

use etalab::eta::{default_s_grid, eta_spectral_oracle};
use etalab::spectral::ModelOperator;
use serde_json::Value;
use tempfile::TempDir;

fn etalab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_etalab")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout_json(out: &Output) -> Value {
    assert_eq!(code(out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn payload(v: &Value) -> &Value {
    &v["payload"]["data"]
}

#[test]
fn envelope_layout() {
    let v = stdout_json(&etalab(&["group", "constants", "--group", "z2", "--radius", "6"]));
    let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort_unstable();
    assert_eq!(keys, ["config", "diagnostics", "payload", "schema", "tool", "version"]);
    assert_eq!(v["schema"], "etalab/1");
    assert_eq!(v["payload"]["kind"], "constants");
    assert_eq!(v["config"]["command"]["name"], "group");
    assert_eq!(v["config"]["command"]["action"], "constants");
    assert_eq!(v["config"]["command"]["radius"], 6);
    assert!(v["diagnostics"]["wall_time_secs"].is_number());
}

#[test]
fn constants_of_z2_vanish() {
    let v = stdout_json(&etalab(&["group", "constants", "--group", "z2", "--radius", "10"]));
    assert_eq!(payload(&v)["k_gamma"], 0.0);
    assert_eq!(payload(&v)["sigma_gamma"], 0.0);
    assert_eq!(payload(&v)["ball_fit"]["subexponential"], true);
}

#[test]
fn separation_rate_of_psi_quotient_is_zero() {
    for spelling in ["seprate", "separate"] {
        let v = stdout_json(&etalab(&["group", spelling, "--group", "sl2z", "--class", "x", "--tower", "psi"]));
        assert_eq!(v["payload"]["kind"], "separation");
        assert_eq!(payload(&v)["rate"], 0.0);
    }
}

#[test]
fn radius_and_distinguish() {
    let v = stdout_json(&etalab(&["group", "radius", "--group", "sl2z", "--class", "x", "--tower", "psi", "--cap", "8"]));
    let row = &payload(&v)[0];
    assert_eq!(row["order"], 12);
    assert_eq!(row["radius"]["kind"], "exact");
    assert_eq!(row["radius"]["value"], 5);
    let v = stdout_json(&etalab(&[
        "group", "distinguish", "--group", "sl2z", "--class", "x", "--tower", "psi", "--elements", "x^3,y,x^2",
    ]));
    assert_eq!(payload(&v)["index"], 0);
}

#[test]
fn malformed_spec_exits_2_without_output() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("out.json");
    let p = path.to_str().unwrap();
    let out = etalab(&["group", "constants", "--group", "nonsense", "--json", p]);
    assert_eq!(code(&out), 2);
    assert!(!path.exists());
    let out = etalab(&["eta", "--op", "comp=2,m=1,c=abc", "--cover", "n=2", "--class", "1", "--json", p]);
    assert_eq!(code(&out), 2);
    assert!(!path.exists());
    assert_eq!(code(&etalab(&["frobnicate"])), 2);
}

#[test]
fn unknown_plan_fields_are_rejected() {
    let dir = TempDir::new().unwrap();
    let plan = dir.path().join("plan.json");
    std::fs::write(&plan, r#"{"t_min": 0.05, "bogus": 1}"#).unwrap();
    let out = etalab(&["eta", "--op", "comp=1,c=0.3,theta=0.25", "--cover", "2", "--class", "1", "--plan", plan.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn csv_outside_converge_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("t.csv");
    let out = etalab(&["group", "constants", "--group", "z", "--radius", "5", "--csv", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(!csv.exists());
}

#[test]
fn chiral_eta_is_zero() {
    let v = stdout_json(&etalab(&["eta", "--op", "comp=2,m=1,c=0,theta=0.25,v=0.2cos1", "--cover", "n=3", "--class", "1"]));
    let r = payload(&v);
    assert!(r["value"].as_f64().unwrap().abs() <= 1e-8);
    assert!(r["imag"].as_f64().unwrap().abs() <= 1e-8);
}

#[test]
fn gapless_line_exits_3() {
    let out = etalab(&["eta", "--op", "comp=1,c=0.3,theta=0.25", "--cover", "line", "--class", "1"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line cover gapless"));
}

#[test]
fn eta_matches_spectral_oracle() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("eta.json");
    let out = etalab(&["eta", "--op", "comp=1,c=0.3,theta=0.25", "--cover", "n=2", "--class", "1", "--json", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let v = read_json(&path);
    let op = ModelOperator::one_component(0.25, 0.3).unwrap();
    let oracle = eta_spectral_oracle(&op, 2, 1, &default_s_grid(&op)).unwrap();
    let value = payload(&v)["value"].as_f64().unwrap();
    let imag = payload(&v)["imag"].as_f64().unwrap();
    assert!((value - oracle.value).hypot(imag - oracle.imag) <= 1e-6);
    assert_eq!(v["config"]["plan"]["t_min"], 0.05);
}

#[test]
fn tol_flag_reaches_the_plan() {
    let v = stdout_json(&etalab(&["eta", "--op", "comp=1,c=0.3,theta=0.25", "--cover", "2", "--class", "1", "--tol", "1e-9"]));
    assert_eq!(v["config"]["plan"]["tol"], 1e-9);
    assert_eq!(v["config"]["tol"], 1e-9);
}

fn strip_wall_time(mut v: Value) -> Value {
    v["diagnostics"]["wall_time_secs"] = Value::Null;
    v
}

#[test]
fn identical_configs_give_identical_reports() {
    let args = ["converge", "--op", "comp=2,m=1,c=0.3,theta=0.25", "--tower", "2,4,8", "--class", "1"];
    let a = stdout_json(&etalab(&args));
    let b = stdout_json(&etalab(&args));
    assert_eq!(strip_wall_time(a).to_string(), strip_wall_time(b).to_string());
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn num(s: &str) -> Option<f64> {
    (!s.is_empty()).then(|| s.parse().unwrap())
}

#[test]
fn chiral_tower_has_zero_column() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("t.csv");
    let json = dir.path().join("t.json");
    let out = etalab(&[
        "converge", "--op", "comp=2,m=1,c=0,theta=0.25", "--tower", "2,4,8", "--class", "1", "--csv", csv.to_str().unwrap(),
        "--json", json.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let (header, rows) = csv_rows(&csv);
    assert_eq!(&header[..7], ["n", "eta_n", "quad_err", "tail_bound", "trunc_bound", "eta_line", "abs_diff"]);
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert!(num(&r[1]).unwrap().abs() <= 1e-8);
    }
    assert!(read_json(&json)["diagnostics"]["flagged_rows"].as_array().unwrap().is_empty());
}

#[test]
fn gapped_tower_converges_and_csv_matches_json() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("t.csv");
    let json = dir.path().join("t.json");
    let out = etalab(&[
        "converge", "--op", "comp=2,m=1,c=0.3,theta=0.25,v=0.2cos1", "--tower", "2,4,8,16,32,64", "--class", "1", "--csv",
        csv.to_str().unwrap(), "--json", json.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_json(&json);
    let rep = payload(&v);
    assert_eq!(rep["eventually_decreasing"], true);
    let (_, rows) = csv_rows(&csv);
    let json_rows = rep["rows"].as_array().unwrap();
    assert_eq!(rows.len(), json_rows.len());
    let line = &rep["line_value"];
    for (r, j) in rows.iter().zip(json_rows) {
        let eta = &j["eta"];
        assert_eq!(num(&r[0]), j["n"].as_f64());
        assert_eq!(num(&r[1]), eta["value"].as_f64());
        assert_eq!(num(&r[2]), eta["quadrature_error"].as_f64());
        assert_eq!(num(&r[3]), eta["tail_bound"].as_f64());
        assert_eq!(num(&r[4]), eta["truncation_bound"].as_f64());
        assert_eq!(num(&r[5]), line["value"].as_f64());
        assert_eq!(num(&r[6]), j["abs_diff"].as_f64());
        assert_eq!(num(&r[7]), eta["imag"].as_f64());
        assert_eq!(num(&r[8]), line["imag"].as_f64());
    }
    assert!(num(&rows.last().unwrap()[6]).unwrap() <= 1e-4);
}

#[test]
fn single_cover_tower_exits_2() {
    let dir = TempDir::new().unwrap();
    let json = dir.path().join("t.json");
    let csv = dir.path().join("t.csv");
    let out = etalab(&[
        "converge", "--op", "comp=2,m=1,c=0.3,theta=0.25", "--tower", "4", "--class", "1", "--json", json.to_str().unwrap(),
        "--csv", csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert!(!json.exists() && !csv.exists());
}

#[test]
fn spectrum_and_decay() {
    let v = stdout_json(&etalab(&["spectrum", "--op", "comp=2,m=1,c=0.3,theta=0.25", "--cover", "n=3", "--kmax", "8"]));
    assert_eq!(payload(&v)["sectors"].as_array().unwrap().len(), 3);
    assert!(payload(&v)["gap"].as_f64().unwrap() > 0.5);
    let v = stdout_json(&etalab(&["decay", "--op", "comp=2,m=1,c=0.3,theta=0.25,v=0.2cos1", "--cover", "line"]));
    let fit = payload(&v);
    assert!(fit["large_t"]["eps"].as_f64().unwrap() >= 0.95 * fit["gap"].as_f64().unwrap());
}

#[test]
fn selftest_passes() {
    let v = stdout_json(&etalab(&["selftest", "--seed", "7"]));
    let checks = payload(&v).as_array().unwrap();
    assert!(!checks.is_empty());
    assert!(checks.iter().all(|c| c["pass"] == true), "{checks:?}");
}

#[test]
fn tiny_bfs_budget_exits_4() {
    let out = etalab(&["group", "constants", "--group", "f2", "--radius", "10", "--bfs-budget", "100"]);
    assert_eq!(code(&out), 4);
}
