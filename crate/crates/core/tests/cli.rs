use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use phireg::cli::{run_scenario, write_csv, ScenarioConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_phireg"))
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn phireg")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn examples_meet_their_expectations() {
    for name in ["ex_gd_external.json", "ex_conformal_covered.json", "ex_squared_difference.json"] {
        let cfg = ScenarioConfig::load(&scenario(name)).unwrap();
        let out = run_scenario(&cfg).unwrap();
        assert!(out.passed(), "{name}: {:?}", out.checks);
        assert!(!out.records.is_empty());
    }
}

#[test]
fn gd_external_regret_value() {
    // x = 0, -0.1, -0.2 against loss x; best fixed point -1.
    let cfg = ScenarioConfig::load(&scenario("ex_gd_external.json")).unwrap();
    let out = run_scenario(&cfg).unwrap();
    let last = out.records.iter().find(|r| r.t == 3).unwrap();
    let reg = last.get("regret_external").unwrap();
    assert!((reg - 2.7).abs() < 1e-12, "{reg}");
}

#[test]
fn run_is_byte_for_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let cfg = scenario("c05_tree_sampler.json");
    let o1 = bin().args(["run", p(&cfg), "--out", p(&a)]).env("PHIREG_THREADS", "1").output().unwrap();
    let o2 = bin().args(["run", p(&cfg), "--out", p(&b)]).env("PHIREG_THREADS", "4").output().unwrap();
    assert!(o1.status.success() && o2.status.success());
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn check_flag_passes_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested/ex.csv");
    let o = run(&["run", p(&scenario("ex_gd_external.json")), "--check", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("scenario,seed,t,"));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("PASS"));
}

#[test]
fn failed_expectation_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("ex_gd_external.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["expect"][0]["value"] = serde_json::json!(2.5);
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, v.to_string()).unwrap();
    let out = dir.path().join("o.csv");
    let o = run(&["run", p(&cfg), "--check", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
    // Without --check the run still succeeds.
    let o = run(&["run", p(&cfg), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn config_errors_exit_2_with_a_path() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("ex_gd_external.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["params"]["learner"]["schedule"]["eta"] = serde_json::json!("fast");
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, v.to_string()).unwrap();
    let o = run(&["run", p(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("params.learner"), "{err}");

    v["params"]["learner"]["schedule"]["eta"] = serde_json::json!(0.1);
    v["bogus"] = serde_json::json!(1);
    std::fs::write(&cfg, v.to_string()).unwrap();
    assert_eq!(run(&["run", p(&cfg)]).status.code(), Some(2));

    assert_eq!(run(&["run", p(&dir.path().join("missing.json"))]).status.code(), Some(2));
}

#[test]
fn bad_thread_count_exits_2() {
    let o = bin().args(["list-scenarios"]).env("PHIREG_THREADS", "zero").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn list_scenarios_shows_configs_and_protocols() {
    let dir = scenario("");
    let o = run(&["list-scenarios", "--dir", p(&dir)]);
    assert!(o.status.success());
    let s = String::from_utf8_lossy(&o.stdout);
    assert!(s.contains("c16_conformal_identity"));
    assert!(s.contains("protocols:"));
}

#[test]
fn audit_subcommand_reports_external_regret() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("traj.json");
    let body = serde_json::json!({
        "set": {"kind": "interval", "lo": -1.0, "hi": 1.0},
        "rounds": [
            {"x": [0.5], "loss": {"fn": "abs1d"}},
            {"x": [-0.5], "loss": {"fn": "abs1d"}}
        ]
    });
    std::fs::write(&traj, body.to_string()).unwrap();
    let o = run(&["audit", p(&traj), r#"{"audit":"external"}"#]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let total = v[0]["total"].as_f64().unwrap();
    assert!((total - 1.0).abs() < 1e-12, "{v}");
}

#[test]
fn conformal_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("s.csv");
    std::fs::write(&scores, "0.2\n0.9\n0.4\n0.7\n").unwrap();
    let o = run(&["conformal", p(&scores), "--alpha", "0.1", "--eta", "0.05"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["rounds"].as_u64(), Some(4));
    let gap = v["gap"].as_f64().unwrap();
    let id = v["identity_gap"].as_f64().unwrap();
    assert!((gap - id).abs() < 1e-12);

    std::fs::write(&scores, "").unwrap();
    assert_eq!(run(&["conformal", p(&scores), "--alpha", "0.1", "--eta", "0.05"]).status.code(), Some(2));
}

#[test]
fn hardness_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.txt");
    // A triangle plus a pendant vertex: ω = 3.
    std::fs::write(&graph, "4\n0 1\n1 2\n0 2\n2 3\n").unwrap();
    let o = run(&["hardness", p(&graph), "--k", "2", "--delta", "0.5", "--samples", "20"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["omega"].as_u64(), Some(3));
}

#[test]
fn empty_record_set_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    write_csv(&[], std::fs::File::create(&path).unwrap()).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.trim_end(), "scenario,seed,t");
}
