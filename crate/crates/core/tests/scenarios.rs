use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use graph_heat_control::report::to_json;
use graph_heat_control::scenario::{emit_report, run_scenario, Scenario};

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn scenario_files() -> Vec<PathBuf> {
    let mut files: Vec<_> = fs::read_dir(scenario_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    files
}

fn ghc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ghc"))
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn bundled_scenarios_pass() {
    let files = scenario_files();
    assert!(files.len() >= 10);
    for path in files {
        let scenario = Scenario::load(&path).unwrap();
        let outcome = run_scenario(&scenario, None, false).unwrap();
        let failed: Vec<_> = outcome.summary.failed_assertions().map(|a| &a.name).collect();
        assert!(failed.is_empty(), "{}: {failed:?}", path.display());
    }
}

#[test]
fn replay_is_byte_identical() {
    for name in ["k2_stochastic.json", "c4_weak_obs.json", "k2_stabilize.json"] {
        let scenario = Scenario::load(scenario_dir().join(name)).unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        emit_report(&run_scenario(&scenario, Some(7), false).unwrap(), a.path()).unwrap();
        emit_report(&run_scenario(&scenario, Some(7), false).unwrap(), b.path()).unwrap();
        assert_eq!(read_dir_sorted(a.path()), read_dir_sorted(b.path()), "{name}");
    }
}

#[test]
fn seed_is_echoed() {
    let scenario = Scenario::load(scenario_dir().join("k2_stochastic.json")).unwrap();
    let outcome = run_scenario(&scenario, Some(12345), false).unwrap();
    assert_eq!(outcome.summary.seed, Some(12345));
    assert!(to_json(&outcome.summary).unwrap().contains("\"seed\": 12345"));
}

#[test]
fn cli_writes_reports_and_exits_zero() {
    let out = tempfile::tempdir().unwrap();
    let status = ghc()
        .arg("run")
        .arg(scenario_dir().join("k2_control.json"))
        .arg("--out")
        .arg(out.path())
        .args(["--seed", "3", "--verbose"])
        .status()
        .unwrap();
    assert!(status.success());
    let summary = fs::read_to_string(out.path().join("summary.json")).unwrap();
    assert!(summary.contains("\"passed\": true"));
    assert!(read_dir_sorted(out.path()).iter().any(|(n, _)| n.ends_with(".csv")));
}

#[test]
fn cli_output_dir_from_environment() {
    let out = tempfile::tempdir().unwrap();
    let status = ghc()
        .arg("run")
        .arg(scenario_dir().join("c4_spectrum.json"))
        .env("GHC_OUT_DIR", out.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.path().join("summary.json").exists());
}

#[test]
fn cli_rejects_bad_input() {
    let work = tempfile::tempdir().unwrap();
    let bad = work.path().join("bad.json");
    fs::write(&bad, "{\"name\": \"x\", \"graph\": ").unwrap();
    let out = work.path().join("out");
    let status = ghc().arg("run").arg(&bad).arg("--out").arg(&out).status().unwrap();
    assert!(!status.success());

    let missing = work.path().join("absent.json");
    let status = ghc().arg("run").arg(&missing).arg("--out").arg(&out).status().unwrap();
    assert!(!status.success());
}

#[test]
fn cli_exit_code_reflects_failed_assertion() {
    let work = tempfile::tempdir().unwrap();
    // Adjacent vertices on C4 see every eigenfunction, so no obstruction exists.
    let path = work.path().join("adjacent.json");
    fs::write(
        &path,
        r#"{"graph": {"family": "cycle", "n": 4}, "subset": {"ids": ["0", "1"]},
            "task": "non-null", "params": {"T": 1}}"#,
    )
    .unwrap();
    let out = work.path().join("out");
    let output = ghc().arg("run").arg(&path).arg("--out").arg(&out).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stdout).contains("obstruction_found"));
    let summary = fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains("\"passed\": false"));
}
