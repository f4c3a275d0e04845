mod common;

use std::fs;

use common::{fixtures, scenario};
use evpt_core::harness::assemble::run_report;
use evpt_core::harness::{load_config, run_batch, run_scenario, ScenarioConfig};

#[test]
fn all_stop_draws_nothing() {
    let r = run_report(&load_config(scenario("stop")).unwrap()).unwrap();
    assert_eq!(r.traction_wh, 0.0);
    assert_eq!(r.battery_energy_wh, 0.0);
    assert_eq!(r.soc_end, r.soc_start);
    assert_eq!(r.wh_per_km, None);
    assert!(r.to_json().contains("\"wh_per_km\": null"));
}

#[test]
fn report_and_trace_are_reproducible() {
    let cfg = load_config(scenario("cruise")).unwrap();
    let (a, b) = (run_scenario(&cfg).unwrap(), run_scenario(&cfg).unwrap());
    assert_eq!(a.report.to_json(), b.report.to_json());
    assert_eq!(a.trace, b.trace);
    assert_eq!(run_report(&cfg).unwrap(), a.report);
}

#[test]
fn declaration_order_does_not_change_the_run() {
    let text = fs::read_to_string(scenario("reference")).unwrap().replace("../cycles/", "");
    let base = fixtures().join("cycles");
    let mut cfg = ScenarioConfig::parse(&text, &base).unwrap();
    cfg.duration = Some(60.0);
    let forward = run_scenario(&cfg).unwrap();
    cfg.feedback.as_mut().unwrap().reverse();
    let reversed = run_scenario(&cfg).unwrap();
    assert_eq!(forward.trace, reversed.trace);
}

#[test]
fn batch_rows_follow_paths_and_isolate_failures() {
    let dir = tempfile::tempdir().unwrap();
    let cruise = fs::read_to_string(scenario("cruise")).unwrap();
    let cycle = fixtures().join("cycles/cruise_20mps.csv");
    let cruise = cruise.replace("\"../cycles/cruise_20mps.csv\"", &format!("{:?}", cycle.display().to_string()));
    for name in ["a", "b", "c", "d"] {
        fs::write(dir.path().join(format!("{name}.toml")), &cruise).unwrap();
    }
    let paths: Vec<_> = ["d", "b", "a", "c"].iter().map(|n| dir.path().join(format!("{n}.toml"))).collect();
    let s = run_batch(&paths, 4).unwrap();
    assert_eq!(s.failures(), 0);
    assert!(s.rows.windows(2).all(|w| w[0].config < w[1].config && w[0].result == w[1].result));

    fs::write(dir.path().join("b.toml"), "cycle = 3\n").unwrap();
    let paths: Vec<_> = ["a", "b", "c"].iter().map(|n| dir.path().join(format!("{n}.toml"))).collect();
    let s = run_batch(&paths, 2).unwrap();
    assert_eq!(s.rows.len(), 3);
    assert_eq!(s.failures(), 1);
    assert!(s.rows[1].result.is_err());
    let mut csv = Vec::new();
    s.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().filter(|l| l.contains(",ok,")).count(), 2);
    assert_eq!(text.lines().filter(|l| l.contains(",error,")).count(), 1);

    let one = run_batch(&paths, 1).unwrap();
    let mut a = Vec::new();
    let mut b = Vec::new();
    one.write_csv(&mut a).unwrap();
    run_batch(&paths, 8).unwrap().write_csv(&mut b).unwrap();
    assert_eq!(a, b);
}
