use std::fs;
use std::path::Path;
use std::process::Command;

use aoi_forge::experiments::{run_sweep, Scenario, SweepSpec, THREADS_ENV};
use aoi_forge::sim::AccessMode;

const SCENARIO: &str = r#"{
  "name": "cli-test",
  "seed": 3,
  "topology": { "links": 2 },
  "sim": { "horizon_s": 5.0 },
  "sweep": { "power_dbm": [10, 20], "links": [2, 3], "seeds": 2 }
}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aoi-forge"))
}

fn drop_column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == name).unwrap();
    lines
        .map(|l| l.split(',').enumerate().filter(|(i, _)| *i != col).map(|(_, v)| v).collect::<Vec<_>>().join(","))
        .collect()
}

fn run(args: &[&str], dir: &Path, threads: &str) {
    let out = bin().args(args).env(THREADS_ENV, threads).current_dir(dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn trace_writes_reproducible_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.json");
    fs::write(&scenario, SCENARIO).unwrap();
    let s = scenario.to_str().unwrap();
    run(&["trace", "--scenario", s, "--out", "a"], dir.path(), "1");
    run(&["trace", "--scenario", s, "--out", "b"], dir.path(), "1");

    let hash = Scenario::from_json(SCENARIO).unwrap().hash();
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["scenario_hash"], hash.as_str());
    for file in manifest["files"].as_array().unwrap() {
        let name = file.as_str().unwrap();
        let a = fs::read_to_string(dir.path().join("a").join(name)).unwrap();
        let b = fs::read_to_string(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
        let mut lines = a.lines();
        assert!(lines.next().unwrap().starts_with("scenario_hash,"));
        assert!(lines.all(|l| l.starts_with(&hash)), "{name} has a row without the hash");
    }
    let trace = fs::read_to_string(dir.path().join("a/trace_noma.csv")).unwrap();
    assert!(trace.starts_with("scenario_hash,mode,time_s,link_id,aoi_s,event"));
}

#[test]
fn sweep_is_thread_count_independent() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.json");
    fs::write(&scenario, SCENARIO).unwrap();
    let s = scenario.to_str().unwrap();
    run(&["sweep", "--scenario", s, "--out", "one"], dir.path(), "1");
    run(&["sweep", "--scenario", s, "--out", "four"], dir.path(), "4");
    for name in ["sweep.csv", "sweep_points.csv"] {
        let a = fs::read_to_string(dir.path().join("one").join(name)).unwrap();
        let b = fs::read_to_string(dir.path().join("four").join(name)).unwrap();
        assert_eq!(drop_column(&a, "runtime_s"), drop_column(&b, "runtime_s"));
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("four/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["threads"], 4);
    assert_eq!(manifest["nondeterministic_columns"][0], "runtime_s");
    // 2 modes × 2 link counts × 2 powers × 2 seeds
    let points = fs::read_to_string(dir.path().join("one/sweep_points.csv")).unwrap();
    assert_eq!(points.lines().count(), 1 + 16);
}

#[test]
fn validate_passes_and_bad_scenario_fails() {
    let out = bin().arg("validate").output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    assert!(text.lines().all(|l| l.starts_with("PASS")));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"topology": {"linkz": 3}}"#).unwrap();
    let out = bin().args(["trace", "--scenario", bad.to_str().unwrap(), "--out", "x"]).current_dir(dir.path()).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.json"));
}

#[test]
fn sweep_records_failed_points() {
    let scenario = Scenario {
        profile: aoi_forge::experiments::ProfileSpec { payload_bits: 5e9, ..Default::default() },
        sweep: SweepSpec { power_dbm: vec![20.0], links: vec![2], seeds: 2 },
        modes: vec![AccessMode::Noma],
        ..Scenario::default()
    };
    let table = run_sweep(&scenario, 2).unwrap();
    assert_eq!(table.failures(), 2);
    assert_eq!(table.rows[0].seeds_failed, 2);
    assert!(table.rows[0].psi_mean.is_none());
}

#[test]
fn shipped_scenario_parses() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/default.json");
    let s = Scenario::load(&path).unwrap();
    assert_eq!(s.link_count(), 5);
}
