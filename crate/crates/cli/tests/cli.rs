use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const EXAMPLE: &str = r#"{"a1":5,"a2":0.1,"b1":3,"b2":2,"d1":0.4,"l":400,"m":1}"#;
const L500: &str = r#"{"a1":5,"a2":0.1,"b1":3,"b2":2,"d1":0.4,"l":500,"m":1}"#;

fn write_config(dir: &TempDir, body: &str) -> String {
    let path = dir.path().join("config.json");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tritrophic")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn equilibria_report() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, EXAMPLE);
    let v = json(&run(&["--config", &cfg, "--json", "equilibria"]));
    let eqs = v["equilibria"].as_array().unwrap();
    assert_eq!(eqs.len(), 6);
    for (e, label) in eqs.iter().zip(["p1", "p2", "p3"]) {
        assert_eq!(e["label"], label);
        assert_eq!(e["exists"], true);
        assert!(e["residual"].as_f64().unwrap() < 1e-12);
    }
    assert!((v["params"]["rho"].as_f64().unwrap() - 27.738).abs() < 1e-12);
}

#[test]
fn missing_field_exits_2_naming_it() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, r#"{"a1":5,"a2":0.1,"b1":3,"b2":2,"l":400,"m":1}"#);
    let out = run(&["--config", &cfg, "equilibria"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`d1`"));
}

#[test]
fn mixed_config_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, r#"{"a1":5,"a2":0.1,"b1":3,"b2":2,"d1":0.4,"l":400,"m":1,"rho":3}"#);
    assert_eq!(run(&["--config", &cfg, "spectrum"]).status.code(), Some(2));
}

#[test]
fn constraint_violation_exits_4() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, r#"{"a1":5,"a2":0.1,"b1":0.1,"b2":2,"d1":0.4,"l":400,"m":1}"#);
    assert_eq!(run(&["--config", &cfg, "constraints"]).status.code(), Some(4));
}

#[test]
fn spectrum_from_model_parameters() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, r#"{"a1":5,"a2":0.1,"b1":3,"b2":2,"d1":0.4,"d2":0.2,"k":0.5,"rho":10}"#);
    let v = json(&run(&["--config", &cfg, "--json", "spectrum"]));
    assert!(v["setup"].is_null());
    assert!(v["expected"].is_null());
    assert!(v["spectrum"]["Delta"].is_number());
}

#[test]
fn constraints_report() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, EXAMPLE);
    let v = json(&run(&["--config", &cfg, "--json", "constraints"]));
    let d = &v["derived"];
    assert!((d["d2"].as_f64().unwrap() - 0.09).abs() < 5e-3);
    assert!((d["rho"].as_f64().unwrap() - 27.74).abs() < 5e-3);
    assert!((d["k"].as_f64().unwrap() - 0.13).abs() < 5e-3);
    assert_eq!(d["l3_margin"].as_f64().unwrap(), 13.4);
}

#[test]
fn predict_with_grid_scan() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, L500);
    let v = json(&run(&["--config", &cfg, "--json", "predict", "--grid-scan"]));
    let preds = v["predictions"].as_array().unwrap();
    assert_eq!(preds.len(), 3);
    assert!(preds.iter().all(|p| p["exists"] == true));
    assert_eq!(v["grid_scan"]["extra_zeros"], 0);
    assert_eq!(v["time_orientation"], -1.0);
}

#[test]
fn predict_reports_missing_radicand() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, EXAMPLE);
    let v = json(&run(&["--config", &cfg, "--json", "predict"]));
    let preds = v["predictions"].as_array().unwrap();
    assert_eq!(preds[0]["exists"], true);
    assert_eq!(preds[1]["exists"], false);
    assert_eq!(preds[1]["missing_radicand"], "W2");
}

#[test]
fn verify_rejects_zero_epsilon() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, EXAMPLE);
    let out = run(&["--config", &cfg, "verify", "--epsilon", "0.01,0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ε = 0"));
}

fn verify_l500(dir: &Path, extra: &[&str]) -> Value {
    let cfg = dir.join("config.json");
    fs::write(&cfg, L500).unwrap();
    let cfg = cfg.display().to_string();
    let csv = dir.join("out").display().to_string();
    let mut args = vec![
        "--config",
        cfg.as_str(),
        "--json",
        "--csv-dir",
        csv.as_str(),
        "verify",
        "--epsilon",
        "5e-4,2.5e-4,1.25e-4",
    ];
    args.extend_from_slice(extra);
    json(&run(&args))
}

#[test]
fn verify_writes_trajectories_and_orders() {
    let dir = TempDir::new().unwrap();
    let v = verify_l500(dir.path(), &[]);
    let cycles = v["cycles"].as_array().unwrap();
    assert_eq!(cycles.len(), 3);
    for c in cycles {
        let entries = c["entries"].as_array().unwrap();
        assert!(entries.iter().all(|e| e["record"].is_object()));
        let last = entries.last().unwrap()["order"].as_f64().unwrap();
        assert!((last - 2.0).abs() < 0.25, "order {last}");
    }
    let files = v["trajectories"].as_array().unwrap();
    assert_eq!(files.len(), 9);
    let text = fs::read_to_string(files[0].as_str().unwrap()).unwrap();
    assert!(text.starts_with("t,x,y,z\n"));
    assert!(text.lines().count() > 10);
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/verify.json")).unwrap()).unwrap();
    assert_eq!(summary, v);
}

#[test]
fn parallel_matches_sequential() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let mut seq = verify_l500(a.path(), &[]);
    let mut par = verify_l500(b.path(), &["--parallel", "3"]);
    seq["trajectories"] = Value::Null;
    par["trajectories"] = Value::Null;
    assert_eq!(seq, par);
}

#[test]
fn verify_failure_exits_3() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, EXAMPLE);
    let out = run(&["--config", &cfg, "--json", "verify", "--epsilon", "0.05"]);
    assert_eq!(out.status.code(), Some(3));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["cycles"][0]["entries"][0]["error"].is_string());
}

#[test]
fn reproduce_example_flags() {
    let v = json(&run(&["--json", "reproduce-example"]));
    assert!(v["constants"].as_array().unwrap().iter().all(|c| c["agree"] == true));
    let flags = |run: &Value| -> Vec<(String, bool)> {
        run["comparisons"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| (c["quantity"].as_str().unwrap().to_string(), c["agree"].as_bool().unwrap()))
            .collect()
    };
    let example = flags(&v["example"]);
    assert!(example.iter().any(|(_, ok)| !ok), "disagreements must be reported");
    let variant = flags(&v["variant"]);
    assert!(variant.contains(&("planar zero r1".to_string(), true)));
    assert!(variant.contains(&("off-plane zero |w2|".to_string(), false)));
}

#[test]
fn reproduce_example_takes_no_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, EXAMPLE);
    assert_eq!(run(&["--config", &cfg, "reproduce-example"]).status.code(), Some(2));
}

#[test]
fn dump_field_csv() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        r#"{"a1":5,"a2":0.1,"b1":3,"b2":2,"d1":0.4,"l":500,"m":1,"r_min":200,"r_max":230,"w_min":-5,"w_max":5,"nr":7,"nw":5}"#,
    );
    let csv = dir.path().join("csv");
    let v = json(&run(&["--config", &cfg, "--json", "--csv-dir", csv.to_str().unwrap(), "dump-field"]));
    assert_eq!(v["rows"], 35);
    assert_eq!(v["failed"], 0);
    let text = fs::read_to_string(csv.join("averaged_field.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r,w,F201,F202"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 35);
    // F202 is odd in w.
    for row in &rows {
        let mirror = rows.iter().find(|o| o[0] == row[0] && o[1] == -row[1]).unwrap();
        assert_eq!(row[3], -mirror[3]);
    }
}

#[test]
fn dump_field_numerical_matches_closed_form() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        r#"{"a1":5,"a2":0.1,"b1":3,"b2":2,"d1":0.4,"l":500,"m":1,"r_min":1,"r_max":200,"w_min":-20,"w_max":20,"nr":3,"nw":3}"#,
    );
    let parse = |args: &[&str]| -> Vec<Vec<f64>> {
        let out = run(args);
        assert!(out.status.success());
        String::from_utf8(out.stdout)
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
            .collect()
    };
    let closed = parse(&["--config", &cfg, "dump-field"]);
    let numerical = parse(&["--config", &cfg, "dump-field", "--numerical"]);
    for (a, b) in closed.iter().zip(&numerical) {
        for c in 2..4 {
            assert!((a[c] - b[c]).abs() <= 1e-8 * a[c].abs().max(1.0), "{a:?} vs {b:?}");
        }
    }
}
