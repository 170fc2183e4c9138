use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ctipon::pon::AllocKind;
use ctipon_harness::engine::{EngineOptions, Simulation};
use ctipon_harness::scenario::{load_scenario, ScenarioConfig};
use ctipon_harness::ComparisonReport;

fn ctipon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctipon"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn explain_config_prints_the_defaults() {
    let o = ctipon(&["explain-config"]);
    assert!(o.status.success());
    let parsed = ScenarioConfig::from_toml_str(&stdout(&o)).unwrap();
    assert_eq!(parsed, ScenarioConfig::default());
}

#[test]
fn validate_prints_the_scenario_hash() {
    let path = scenario("default.toml");
    let o = ctipon(&["validate", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cfg = load_scenario(&path).unwrap();
    assert_eq!(stdout(&o).trim(), format!("ok default {}", cfg.hash()));
}

#[test]
fn bad_config_exits_with_code_2_and_names_every_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(
        &bad,
        "name = \"bad\"\n\
         [[onus]]\nonu_id = 0\nfronthaul_tcont = 1\nfiber_km = -1.0\n\
         [[ues]]\nue_id = 0\nonu = 0\ntcont = 9\n\
         traffic = { kind = \"constant-rate\", mean_rate = 1e6 }\n",
    )
    .unwrap();
    let o = ctipon(&["validate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("onus[0].fiber_km"), "{err}");
    assert!(err.contains("ues[0].tcont"), "{err}");

    let typo = dir.path().join("typo.toml");
    std::fs::write(&typo, "nmae = \"x\"\n").unwrap();
    let o = ctipon(&["run", typo.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nmae"), "{}", stderr(&o));
}

#[test]
fn missing_file_exits_with_code_2() {
    let o = ctipon(&["validate", "/nonexistent/scenario.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_writes_every_requested_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = load_scenario(scenario("minimal.toml")).unwrap();
    cfg.duration = ctipon::sim::SimTime::from_millis(200);
    let path = dir.path().join("s.toml");
    std::fs::write(&path, cfg.to_toml_string()).unwrap();
    let out = |f: &str| dir.path().join(f).to_str().unwrap().to_string();
    let o = ctipon(&[
        "run",
        path.to_str().unwrap(),
        "--mode",
        "sr",
        "--out",
        &out("r.json"),
        "--csv",
        &out("r.csv"),
        "--jsonl",
        &out("r.jsonl"),
        "--bwmap-trace",
        &out("t.txt"),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("mode=sr"));

    let report: ctipon::telemetry::RunReport =
        serde_json::from_str(&std::fs::read_to_string(out("r.json")).unwrap()).unwrap();
    assert_eq!(report.windows.len(), 2);
    let csv = std::fs::read_to_string(out("r.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let jsonl = std::fs::read_to_string(out("r.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), 2);
    let trace = std::fs::read_to_string(out("t.txt")).unwrap();
    let rows = ctipon::pon::parse_bwmap_trace(&trace).unwrap();
    // Only frames with allocations appear; 200 ms is 1,600 frames.
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.0 < 1_600 + 4));
}

#[test]
fn compare_on_zero_traffic_is_all_polling() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario("zero-traffic.toml");
    let o = ctipon(&["compare", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cmp: ComparisonReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("comparison.json")).unwrap())
            .unwrap();
    assert_eq!(cmp.cti_scenario_hash, cmp.sr_scenario_hash);
    for metric in ["mean_queue_delay_us", "p99_queue_delay_us"] {
        let d = cmp.delta(metric).unwrap();
        assert_eq!((d.cti, d.sr, d.delta), (None, None, None), "{metric}");
    }
    for metric in ["granted_bytes", "wasted_bytes", "drops"] {
        assert_eq!(cmp.delta(metric).unwrap().delta, Some(0.0), "{metric}");
    }
    assert_eq!(cmp.cti.aggregates.fronthaul_samples, 0);
    assert!(dir.path().join("cti.csv").exists() && dir.path().join("sr.csv").exists());

    // Every grant is a minimal poll, so the air time used is polling alone.
    let cfg = load_scenario(&path).unwrap();
    let opts = EngineOptions {
        record_maps: true,
        ..EngineOptions::default()
    };
    let run = Simulation::new(&cfg, cfg.mode, opts).unwrap().run().unwrap();
    assert!(run
        .maps
        .iter()
        .flat_map(|m| &m.allocations)
        .all(|a| a.kind == AllocKind::Poll && a.grant_bytes == 4));
    let polls = run.maps.iter().map(|m| m.allocations.len() as u64).sum::<u64>();
    let a = &run.report.aggregates;
    assert_eq!(a.granted_bytes, 4 * polls);
    assert_eq!(a.used_bytes, a.granted_bytes);
    assert_eq!(a.wasted_bytes, 0);
}
