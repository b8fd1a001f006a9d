use std::path::{Path, PathBuf};
use std::process::Command;

use opcalc_harness::{run_suite, ExperimentConfig};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn opcalc(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_opcalc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

#[test]
fn every_shipped_config_loads() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs()).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "toml") {
            ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{e}"));
            n += 1;
        }
    }
    assert!(n >= 12);
}

#[test]
fn reports_are_reproducible_apart_from_run_info() {
    let cfg = ExperimentConfig::load(&configs().join("theorem-identity-b.toml")).unwrap();
    let a = run_suite(&cfg).unwrap();
    let b = run_suite(&cfg).unwrap();
    assert_eq!(a.deterministic_json().unwrap(), b.deterministic_json().unwrap());
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let files_a = a.write(dir_a.path()).unwrap();
    b.write(dir_b.path()).unwrap();
    for f in files_a.iter().filter(|f| f.extension().is_some_and(|e| e == "csv")) {
        let other = dir_b.path().join(f.file_name().unwrap());
        assert_eq!(std::fs::read(f).unwrap(), std::fs::read(other).unwrap());
    }
}

#[test]
fn passing_run_writes_json_and_csv_and_exits_zero() {
    let out = tempfile::tempdir().unwrap();
    let cfg = configs().join("lemma-basestep.toml");
    let o = opcalc(&["verify-lemmas", "--config", path_str(&cfg), "--seed", "100", "--out", path_str(out.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("lemma-basestep.json")).unwrap()).unwrap();
    assert_eq!(json["passed"], true);
    assert_eq!(json["config"]["seeds"]["start"], 100);
    assert!(json["run_info"]["elapsed_seconds"].is_number());
    let csv = std::fs::read_to_string(out.path().join("lemma-basestep-residuals.csv")).unwrap();
    assert!(csv.starts_with("nu,d,seed,case,residual\n"));
}

#[test]
fn hypothesis_violation_is_rejected_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let src = std::fs::read_to_string(configs().join("bounds-nu1.toml")).unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, src.replace("s = -2.0", "s = 1.5")).unwrap();
    let o = opcalc(&["bound-sweep", "--config", path_str(&bad), "--out", path_str(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.toml:7") && err.contains("t1 + t2 + s"), "{err}");
}

#[test]
fn subcommand_must_match_the_config() {
    let cfg = configs().join("aae-decay.toml");
    let o = opcalc(&["hs-apply", "--config", path_str(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("aae-probe"));
}

#[test]
fn symbolic_battery_runs_from_flags_alone() {
    let out = tempfile::tempdir().unwrap();
    let o = opcalc(&["verify-symbolic", "--nu", "1,2", "--max-degree", "3", "--out", path_str(out.path())]);
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.matches("[PASS]").count(), 4, "{stdout}");
}

#[test]
fn family_catalog_lists_checked_families() {
    let o = opcalc(&["list-families"]);
    assert!(o.status.success());
    let cat: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let names: Vec<&str> = cat.as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"bracket_power") && names.contains(&"shifted_inverse_bracket"));
}
