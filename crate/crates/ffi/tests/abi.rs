use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use phireg_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let n = unsafe { phireg_last_error(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn take_string(p: *mut c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { phireg_string_free(p) };
    s
}

#[test]
fn conformal_handle_tracks_the_identity() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { phireg_conformal_new(0.0, 0.05, 0.1, &mut h) }, PhiregStatus::Ok);
    let scores = [0.3, 0.9, -0.2, 0.05, 0.6, 0.01];
    let mut covered = false;
    for s in scores {
        assert_eq!(unsafe { phireg_conformal_update(h, s, &mut covered) }, PhiregStatus::Ok);
    }
    let mut rounds = 0usize;
    let mut theta = f64::NAN;
    let (mut m, mut gap, mut id) = (0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(phireg_conformal_rounds(h, &mut rounds), PhiregStatus::Ok);
        assert_eq!(phireg_conformal_theta(h, &mut theta), PhiregStatus::Ok);
        assert_eq!(phireg_conformal_stats(h, &mut m, &mut gap, &mut id), PhiregStatus::Ok);
        phireg_conformal_free(h);
    }
    assert_eq!(rounds, 6);
    assert!((gap - id).abs() < 1e-12);
    assert!((gap - (theta.abs() / (0.05 * 6.0))).abs() < 1e-12);
    assert!((gap - (m - 0.1).abs()).abs() < 1e-15);
}

#[test]
fn bad_arguments_set_status_and_message() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { phireg_conformal_new(0.0, -1.0, 0.1, &mut h) }, PhiregStatus::InvalidInput);
    assert!(h.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(unsafe { phireg_conformal_new(0.0, 0.1, 0.1, ptr::null_mut()) }, PhiregStatus::NullPointer);
    assert!(last_error().contains("null"));

    // No rounds yet: the statistics are undefined.
    assert_eq!(unsafe { phireg_conformal_new(0.0, 0.1, 0.1, &mut h) }, PhiregStatus::Ok);
    assert_eq!(unsafe { phireg_conformal_stats(h, ptr::null_mut(), ptr::null_mut(), ptr::null_mut()) }, PhiregStatus::InvalidInput);
    unsafe { phireg_conformal_free(h) };
    unsafe { phireg_conformal_free(ptr::null_mut()) };
}

#[test]
fn gd_learner_steps_through_the_interval() {
    let set = CString::new(r#"{"kind":"interval","lo":-1.0,"hi":1.0}"#).unwrap();
    let spec = CString::new(r#"{"learner":"gd","x1":[0.0],"schedule":{"schedule":"constant","eta":0.1}}"#).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { phireg_learner_new(set.as_ptr(), spec.as_ptr(), &mut h) }, PhiregStatus::Ok);
    let mut dim = 0;
    assert_eq!(unsafe { phireg_learner_dim(h, &mut dim) }, PhiregStatus::Ok);
    assert_eq!(dim, 1);
    let mut x = [f64::NAN];
    let mut plays = Vec::new();
    for _ in 0..12 {
        assert_eq!(unsafe { phireg_learner_next(h, x.as_mut_ptr(), 1) }, PhiregStatus::Ok);
        plays.push(x[0]);
        assert_eq!(unsafe { phireg_learner_observe(h, [1.0].as_ptr(), 1) }, PhiregStatus::Ok);
    }
    // Projection onto [-1, 1] pins the iterate at the boundary.
    assert!((plays[3] + 0.3).abs() < 1e-12);
    assert_eq!(plays[11], -1.0);
    assert_eq!(unsafe { phireg_learner_next(h, x.as_mut_ptr(), 2) }, PhiregStatus::OutOfRange);
    assert_eq!(unsafe { phireg_learner_observe(h, [1.0, 2.0].as_ptr(), 2) }, PhiregStatus::InvalidInput);
    unsafe { phireg_learner_free(h) };
}

#[test]
fn learner_rejects_malformed_json() {
    let set = CString::new(r#"{"kind":"interval","lo":1.0,"hi":-1.0}"#).unwrap();
    let spec = CString::new(r#"{"learner":"gd","x1":[0.0],"schedule":{"schedule":"constant","eta":0.1}}"#).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { phireg_learner_new(set.as_ptr(), spec.as_ptr(), &mut h) }, PhiregStatus::InvalidInput);
    let junk = CString::new("{").unwrap();
    assert_eq!(unsafe { phireg_learner_new(junk.as_ptr(), spec.as_ptr(), &mut h) }, PhiregStatus::InvalidInput);
    assert!(h.is_null());
}

fn example(name: &str) -> CString {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    CString::new(std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn scenario_handle_reports_checks_and_writes_csv() {
    let cfg = example("ex_gd_external.json");
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { phireg_scenario_run(cfg.as_ptr(), &mut h) }, PhiregStatus::Ok);
    let mut passed = false;
    let mut n = 0;
    let mut rows = 0;
    unsafe {
        assert_eq!(phireg_scenario_passed(h, &mut passed), PhiregStatus::Ok);
        assert_eq!(phireg_scenario_check_count(h, &mut n), PhiregStatus::Ok);
        assert_eq!(phireg_scenario_record_count(h, &mut rows), PhiregStatus::Ok);
    }
    assert!(passed);
    assert_eq!(n, 1);
    assert!(rows > 0);
    let mut ok = false;
    let mut name = ptr::null_mut();
    let mut detail = ptr::null_mut();
    assert_eq!(unsafe { phireg_scenario_check(h, 0, &mut ok, &mut name, &mut detail) }, PhiregStatus::Ok);
    assert!(ok);
    assert!(take_string(name).contains("regret_external"));
    assert!(!take_string(detail).is_empty());
    assert_eq!(unsafe { phireg_scenario_check(h, 1, &mut ok, ptr::null_mut(), ptr::null_mut()) }, PhiregStatus::OutOfRange);

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sub/run.csv");
    let path = CString::new(out.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { phireg_scenario_write_csv(h, path.as_ptr()) }, PhiregStatus::Ok);
    assert!(std::fs::read_to_string(&out).unwrap().starts_with("scenario,seed,t,"));
    unsafe { phireg_scenario_free(h) };
}

#[test]
fn scenario_config_errors_carry_the_path() {
    let cfg = CString::new(r#"{"id":"x","kind":"conformal","protocol":"conformal","T":0,"seeds":[0],"params":{}}"#).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { phireg_scenario_run(cfg.as_ptr(), &mut h) }, PhiregStatus::InvalidInput);
    assert!(last_error().contains('T'));
}

#[test]
fn audit_returns_json() {
    let traj = CString::new(
        r#"{"set":{"kind":"interval","lo":-1.0,"hi":1.0},
            "rounds":[{"x":[0.5],"loss":{"fn":"abs1d"}},{"x":[-0.5],"loss":{"fn":"abs1d"}}]}"#,
    )
    .unwrap();
    let spec = CString::new(r#"{"audit":"proj","delta":0.25}"#).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { phireg_audit(traj.as_ptr(), spec.as_ptr(), &mut out) }, PhiregStatus::Ok);
    let v: serde_json::Value = serde_json::from_str(&take_string(out)).unwrap();
    assert_eq!(v[0]["name"], "proj");
    assert_eq!(v[0]["total"].as_f64(), Some(0.0));
    assert_eq!(v[0]["exactness"], "exact");

    let path_spec = CString::new("spec.json").unwrap();
    assert_eq!(unsafe { phireg_audit(traj.as_ptr(), path_spec.as_ptr(), &mut out) }, PhiregStatus::InvalidInput);
}

/// Compiles a C program against the generated header, links the static
/// library and runs it.
#[test]
fn c_program_links_and_runs() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "phireg.h"
int main(void) {
  PhiregConformal *h = NULL;
  if (phireg_conformal_new(0.0, 0.05, 0.1, &h) != PHIREG_STATUS_OK) return 1;
  bool c = false;
  if (phireg_conformal_update(h, 0.3, &c) != PHIREG_STATUS_OK || c) return 2;
  double gap = -1.0, id = -2.0;
  if (phireg_conformal_stats(h, NULL, &gap, &id) != PHIREG_STATUS_OK) return 3;
  phireg_conformal_free(h);
  if (phireg_conformal_new(0.0, -1.0, 0.1, &h) != PHIREG_STATUS_INVALID_INPUT) return 4;
  char msg[256];
  if (phireg_last_error(msg, sizeof msg) == 0) return 5;
  printf("%.17g %.17g\n", gap, id);
  return 0;
}
"#,
    )
    .unwrap();
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    // The test binary sits in <target>/<profile>/deps.
    let lib_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    assert!(lib_dir.join("libphireg_ffi.a").exists(), "static library missing in {}", lib_dir.display());
    let exe = dir.path().join("use");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(&include)
        .arg(&src)
        .arg(lib_dir.join("libphireg_ffi.a"))
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("a C compiler on PATH");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let v: Vec<f64> = text.split_whitespace().map(|t| t.parse().unwrap()).collect();
    // One miss with α = 0.1: gap 0.9 and θ moves by η·0.9.
    assert!((v[0] - 0.9).abs() < 1e-12 && (v[0] - v[1]).abs() < 1e-12, "{text}");
}
