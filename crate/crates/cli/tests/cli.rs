use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn evpt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evpt")).args(args).env("SOURCE_DATE_EPOCH", "0").output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_trace_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let (trace, report) = (dir.path().join("t.csv"), dir.path().join("r.json"));
    let cfg = fixtures().join("scenarios/stop.toml");
    let out = evpt(&["simulate", "--config", s(&cfg), "--trace", s(&trace), "--report", s(&report)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let header = fs::read_to_string(&trace).unwrap().lines().next().unwrap().to_string();
    assert!(header.starts_with("time_s,cycle.v_target,"));
    assert!(header.contains("battery.terminal_v"));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    for key in [
        "distance_m",
        "battery_energy_wh",
        "wh_per_km",
        "regen_wh",
        "loss_wh",
        "soc_start",
        "soc_end",
        "peak_temperatures_k",
        "constraint_violations",
    ] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    assert!(r["wh_per_km"].is_null());

    let stdout = evpt(&["simulate", "--config", s(&cfg)]);
    assert_eq!(String::from_utf8(stdout.stdout).unwrap(), fs::read_to_string(&report).unwrap());
}

#[test]
fn exit_codes_separate_config_and_runtime_failures() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "cycle = \"missing.csv\"\n").unwrap();
    assert_eq!(evpt(&["simulate", "--config", s(&bad)]).status.code(), Some(1));
    let cfg = fixtures().join("scenarios/stop.toml");
    let unwritable = dir.path().join("no/such/dir/r.json");
    assert_eq!(evpt(&["simulate", "--config", s(&cfg), "--report", s(&unwritable)]).status.code(), Some(2));
}

#[test]
fn sweep_fit_validate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixtures().join("scenarios/reference.toml");
    let (data, holdout, model) = (dir.path().join("d.csv"), dir.path().join("h.csv"), dir.path().join("m.json"));
    let grid = "speed=0:1000:11,torque=0:250:11";
    assert!(evpt(&["sweep", "--config", s(&cfg), "--component", "motor", "--grid", grid, "--out", s(&data)]).status.success());
    let csv = fs::read_to_string(&data).unwrap();
    assert!(csv.starts_with("# speed [rad/s], torque [N*m], loss_w [W]\nspeed,torque,loss_w\n"));
    assert_eq!(csv.lines().count(), 2 + 121);
    let holdout_grid = fixtures().join("grids/motor_holdout.toml");
    let sweep =
        evpt(&["sweep", "--config", s(&cfg), "--component", "motor", "--grid", s(&holdout_grid), "--out", s(&holdout), "--jobs", "3"]);
    assert!(sweep.status.success());

    let fit = evpt(&["fit-table", "--data", s(&data), "--axes", grid, "--out", s(&model), "--holdout", s(&holdout)]);
    assert!(fit.status.success(), "{}", String::from_utf8_lossy(&fit.stderr));
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(m["schema_version"], 1);
    assert_eq!(m["metadata"]["created"], "1970-01-01T00:00:00Z");
    assert_eq!(m["metadata"]["source"], "d.csv");
    let recorded = m["metadata"]["validation"]["rmse"][0].as_f64().unwrap();

    let v = evpt(&["validate", "--model", s(&model), "--holdout", s(&holdout)]);
    assert!(v.status.success());
    let metrics: serde_json::Value = serde_json::from_slice(&v.stdout).unwrap();
    assert_eq!(metrics["outputs"][0]["name"], "loss_w");
    assert_eq!(metrics["outputs"][0]["rmse"].as_f64().unwrap(), recorded);

    let again = dir.path().join("m2.json");
    assert!(evpt(&["fit-table", "--data", s(&data), "--axes", grid, "--out", s(&again), "--holdout", s(&holdout)]).status.success());
    assert_eq!(fs::read(&model).unwrap(), fs::read(&again).unwrap());

    let coarse = evpt(&["fit-table", "--data", s(&data), "--axes", "speed=0:1000:21,torque=0:250:11", "--out", s(&again)]);
    assert_eq!(coarse.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&coarse.stderr).contains("no samples"));
}

#[test]
fn batch_reports_partial_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cycle = fixtures().join("cycles/all_stop.csv");
    for name in ["a", "c"] {
        fs::write(dir.path().join(format!("{name}.toml")), format!("cycle = {:?}\n", s(&cycle))).unwrap();
    }
    fs::write(dir.path().join("b.toml"), "dt = -1\n").unwrap();
    let pattern = format!("{}/*.toml", s(dir.path()));
    let (one, eight) = (dir.path().join("one.csv"), dir.path().join("eight.csv"));
    assert_eq!(evpt(&["batch", "--configs", &pattern, "--jobs", "1", "--out", s(&one)]).status.code(), Some(3));
    assert_eq!(evpt(&["batch", "--configs", &pattern, "--jobs", "8", "--out", s(&eight)]).status.code(), Some(3));
    let summary = fs::read_to_string(&one).unwrap();
    assert_eq!(summary.lines().count(), 4);
    assert_eq!(summary.lines().filter(|l| l.contains(",error,")).count(), 1);
    assert_eq!(summary, fs::read_to_string(&eight).unwrap());

    let fixtures_glob = format!("{}/scenarios/*.toml", s(&fixtures()));
    assert_eq!(evpt(&["batch", "--configs", &fixtures_glob, "--jobs", "2", "--out", s(&one)]).status.code(), Some(0));
}
