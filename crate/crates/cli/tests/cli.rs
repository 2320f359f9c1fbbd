use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_commons-lab"))
        .args(args)
        .env("COMMONS_LAB_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn equilibria_bistable_punishment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = lab(&[
        "equilibria", "--kind", "punishment", "--r", "0.6", "--delta", "0.004", "--out", out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("5 points, 2 stable"));
    assert_eq!(stdout(&o).lines().count(), 1);
    let report = read_json(&dir.path().join("equilibria.json"));
    let points = report["points"].as_array().unwrap();
    assert_eq!(points.len(), 5);
    let stable = points.iter().filter(|p| p["stability"] == "stable").count();
    assert_eq!(stable, 2);
}

#[test]
fn out_of_range_start_exits_2() {
    let o = lab(&["simulate", "--kind", "reward", "--r", "0.6", "--delta", "0.2", "--x0", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("x = 1.5"), "{}", stderr(&o));
}

#[test]
fn missing_required_parameter_exits_2() {
    let o = lab(&["simulate", "--kind", "reward", "--r", "0.6"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--delta"));
}

#[test]
fn unknown_preset_exits_2() {
    let o = lab(&["preset", "fig42"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fig42"));
    assert!(stderr(&o).contains("fig8c"));
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"commands":["simulate"],"kind":"reward","extra":1}"#).unwrap();
    let o = lab(&["--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("malformed config"));
}

#[test]
fn unwritable_output_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = blocker.join("sub");
    let o = lab(&["preset", "fig1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn numerical_failure_exits_3() {
    let o = lab(&[
        "simulate", "--kind", "reward", "--r", "1e300", "--delta", "0.2", "--capacity", "1e300",
        "--y0", "5e299",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("last valid state"));
}

#[test]
fn preset_fig1_writes_trajectory_and_equilibria() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["preset", "fig1", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x,y"));
    assert_eq!(lines.next(), Some("0,0.5,500"));
    let last: Vec<f64> = csv
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert!(last[1] > 0.999 && last[2] < 1.0, "{last:?}");
    let report = read_json(&dir.path().join("equilibria.json"));
    assert_eq!(report["params"]["growth_rate"], 0.25);
    let sim = read_json(&dir.path().join("simulate.json"));
    assert_eq!(sim["outcome"], "corner_1_0");
    assert_eq!(sim["clamp_events"], 0);
}

#[test]
fn json_format_replaces_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&[
        "simulate", "--kind", "reward", "--r", "0.6", "--delta", "0.2", "--t-end", "10",
        "--format", "json", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!dir.path().join("trajectory.csv").exists());
    let traj = read_json(&dir.path().join("trajectory.json"));
    assert_eq!(traj["times"].as_array().unwrap().len(), 11);
}

#[test]
fn dump_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let first = lab(&["preset", "fig8b", "--dump-config"]);
    assert!(first.status.success());
    let path = dir.path().join("c.json");
    fs::write(&path, stdout(&first)).unwrap();
    let second = lab(&["--config", path.to_str().unwrap(), "--dump-config"]);
    assert!(second.status.success(), "{}", stderr(&second));
    assert_eq!(stdout(&first), stdout(&second));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let first = lab(&["preset", "fig2a", "--dump-config"]);
    let path = dir.path().join("c.json");
    fs::write(&path, stdout(&first)).unwrap();
    let o = lab(&[
        "--config", path.to_str().unwrap(), "simulate", "--delta", "0.02", "--t-end", "5",
        "--dump-config",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["params"]["tax"], 0.02);
    assert_eq!(v["params"]["growth_rate"], 0.6);
    assert_eq!(v["integrator"]["t_end"], 5.0);
    assert_eq!(v["commands"], serde_json::json!(["simulate"]));
}

#[test]
fn basin_csv_schema() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&[
        "basin", "--kind", "reward", "--r", "0.6", "--delta", "0.2", "--nx", "3", "--ny", "2",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("basin.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "x0,y0,label");
    assert_eq!(lines.len(), 7);
    assert!(lines[1..].iter().all(|l| l.ends_with(",full_cooperation")));
    let doc = read_json(&dir.path().join("basin.json"));
    assert_eq!(doc["counts"]["full_cooperation"], 6);
    assert!(doc["legend"]["full_cooperation"].is_object());
}

#[test]
fn basin_without_stable_point_is_rejected() {
    let o = lab(&[
        "basin", "--kind", "punishment", "--n", "10", "--r", "0.006", "--delta", "0.0001",
        "--nx", "2", "--ny", "2",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("limit-cycle"));
}

#[test]
fn single_point_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&[
        "sweep", "--kind", "reward", "--r", "1", "--delta", "0.04", "--axis", "delta:0.04:0.04:1",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("delta,regime,"));
    assert!(lines[1].contains("interior@0.44339"), "{}", lines[1]);
}

#[test]
fn bad_sweep_axis_exits_2() {
    let o = lab(&["sweep", "--kind", "reward", "--r", "1", "--delta", "0.04", "--axis", "delta:0:1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn abm_preset_reports_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["preset", "fig8c", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("abm: 6/6"), "{}", stdout(&o));
    let checks = read_json(&dir.path().join("abm.json"));
    let labels: Vec<&str> = checks
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["check"]["reference"]["label"].as_str().unwrap())
        .collect();
    assert!(labels.contains(&"full_cooperation") && labels.contains(&"full_defection"));
    let csv = fs::read_to_string(dir.path().join("abm_start0_seed1.csv")).unwrap();
    assert!(csv.starts_with("t,x,y\n0,0.98,500\n"));
}
