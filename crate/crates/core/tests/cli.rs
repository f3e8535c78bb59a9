use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_excitent"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn dimer_csv_has_metadata_and_header() {
    let out = run(&["dimer", "--alpha", "0.3", "--gt-steps", "8"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# excitent "));
    assert_eq!(lines[1], "# command: dimer");
    assert!(lines[2].contains("\"gt_steps\":8"));
    assert_eq!(lines[3], "alpha,gt,full,p1,p01,wootters_decohered");
    assert_eq!(lines.len(), 4 + 9);
    // gt = pi/4 row
    let cells: Vec<f64> = lines[6].split(',').map(|c| c.parse().unwrap()).collect();
    assert!(cells[2] <= 1e-7);
    assert!((cells[3] - 1.0).abs() < 1e-11);
    assert!((cells[4] - 0.082569).abs() < 1e-6);
    assert!((cells[5] - 0.082569).abs() < 1e-6);
}

#[test]
fn cmax_scan_json_is_valid() {
    let out = run(&["cmax-scan", "--alpha", "0.3,0.5", "--n-max", "4", "--format", "json"]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["command"], "cmax-scan");
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    assert!((rows[0][2].as_f64().unwrap() - 0.0825688).abs() < 1e-6);
    assert!((rows[1][2].as_f64().unwrap() - 0.017935).abs() < 1e-6);
}

#[test]
fn fn_table_reports_max_delta() {
    let out = run(&["fn-table"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let line = text.lines().find(|l| l.starts_with("# max_abs_delta:")).unwrap();
    let delta: f64 = line.split(':').nth(1).unwrap().trim().parse().unwrap();
    assert!(delta <= 5e-4);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scan.csv");
    let out = run(&["cmax-scan", "--n-max", "3", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("alpha,n,cmax"));
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["cmax-scan", "--alpha", "0"]).status.code(), Some(2));
    assert_eq!(run(&["dimer", "--gt-steps", "0"]).status.code(), Some(2));
    assert_eq!(run(&["transport", "--config", "/nonexistent.toml"]).status.code(), Some(2));
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
    assert_eq!(run(&["dimer", "--out", "/nonexistent-dir/x.csv"]).status.code(), Some(1));
}

#[test]
fn malformed_config_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "alphas = [0.1]\n\n[network]\nenergies = [0.0, 0.0\nentry = 0\n").unwrap();
    let out = run(&["transport", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line"), "{err}");
}

#[test]
fn fixed_step_transport_is_byte_identical() {
    let cfg = config("chain3.toml");
    let args = ["transport", "--config", cfg.to_str().unwrap(), "--fixed-step", "0.02", "--alpha", "0.2"];
    let first = run(&args);
    let second = run(&args);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(first.stdout, second.stdout);
    let text = stdout(&first);
    assert!(text.contains("\"fixed_step\":0.02"));
    assert!(text.contains("# alpha2_coefficient:"));
}

#[test]
fn transport_json_round_trip() {
    let cfg = config("chain3.toml");
    let out = run(&["transport", "--config", cfg.to_str().unwrap(), "--format", "json", "--alpha", "0,0.1"]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let reports = doc["reports"].as_array().unwrap();
    assert_eq!(reports[0]["full"]["efficiency"]["value"].as_f64(), Some(0.0));
    let eff = reports[1]["full"]["efficiency"]["value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&eff));
    assert_eq!(doc["config"]["network"]["exit"], 2);
    assert!(doc["version"].is_string());
}
