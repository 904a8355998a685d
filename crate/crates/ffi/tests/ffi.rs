use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use covdil_ffi::*;

fn last_error() -> String {
    let p = covdil_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn demo(name: &str) -> *mut CovdilScenario {
    let name = CString::new(name).unwrap();
    let mut sc = ptr::null_mut();
    assert_eq!(unsafe { covdil_demo_scenario(name.as_ptr(), &mut sc) }, CovdilStatus::Ok);
    assert!(!sc.is_null());
    sc
}

fn run(sc: *const CovdilScenario, cmd: &str) -> (CovdilStatus, Option<serde_json::Value>) {
    let cmd = CString::new(cmd).unwrap();
    let mut out = ptr::null_mut();
    let status = unsafe { covdil_run(sc, cmd.as_ptr(), &mut out) };
    if out.is_null() {
        return (status, None);
    }
    let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_string();
    unsafe { covdil_string_free(out) };
    (status, Some(serde_json::from_str(&text).unwrap()))
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(covdil_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn demos_run_through_handles() {
    for name in ["scalar", "automorphism", "tower"] {
        let sc = demo(name);
        for cmd in ["check", "extend", "dilate", "unitary", "matricial"] {
            let (status, rep) = run(sc, cmd);
            assert_eq!(status, CovdilStatus::Ok, "{name} {cmd}");
            let rep = rep.unwrap();
            assert_eq!(rep["command"], cmd);
            assert_eq!(rep["passed"], true);
        }
        unsafe { covdil_scenario_free(sc) };
    }
}

#[test]
fn json_scenarios_and_validation_errors() {
    let good = CString::new(r#"{"schema": 1, "backend": "finite-dim", "blocks": [1], "alpha": "identity", "T": [[0.5]], "N": 1, "M": 1}"#).unwrap();
    let mut sc = ptr::null_mut();
    assert_eq!(unsafe { covdil_scenario_from_json(good.as_ptr(), &mut sc) }, CovdilStatus::Ok);
    assert_eq!(run(sc, "unitary").0, CovdilStatus::Ok);
    unsafe { covdil_scenario_free(sc) };

    let big = CString::new(r#"{"schema": 1, "backend": "finite-dim", "blocks": [1], "alpha": "identity", "T": [[2.0]], "N": 1, "M": 1}"#).unwrap();
    let mut sc = ptr::null_mut();
    assert_eq!(unsafe { covdil_scenario_from_json(big.as_ptr(), &mut sc) }, CovdilStatus::Invalid);
    assert!(sc.is_null());
    assert!(last_error().contains("contraction"));

    let broken = CString::new("{\n\"schema\": ").unwrap();
    assert_eq!(unsafe { covdil_scenario_from_json(broken.as_ptr(), &mut sc) }, CovdilStatus::Invalid);
    assert!(last_error().contains("line"));
}

#[test]
fn clause_failures_still_produce_a_report() {
    let text = r#"{"schema": 1, "backend": "finite-dim", "blocks": [2, 2, 1],
        "alpha": {"automorphism": {"permutation": [1, 0, 2], "unitaries": [[[0, 1], [1, 0]], [[1, 0], [0, [0, 1]]], [[1]]]}},
        "T": [[0,0,[0,0.7],0,0],[0,0,0,0.7,0],[0,[0,0.7],0,0,0],[[0,0.7],0,0,0,0],[0,0,0,0,[0,0.7]]],
        "N": 2, "M": 2, "seed": 7, "tolerances": {"rank_eps": 1e-20, "residual_tol": 1e-20}}"#;
    let text = CString::new(text).unwrap();
    let mut sc = ptr::null_mut();
    assert_eq!(unsafe { covdil_scenario_from_json(text.as_ptr(), &mut sc) }, CovdilStatus::Ok, "{}", last_error());
    let (status, rep) = run(sc, "unitary");
    assert_eq!(status, CovdilStatus::ClauseFailed);
    assert_eq!(rep.unwrap()["passed"], false);
    assert!(last_error().starts_with("failed clauses"));
    unsafe { covdil_scenario_free(sc) };
}

#[test]
fn bad_arguments_map_to_status_codes() {
    let sc = demo("scalar");
    assert_eq!(run(sc, "compare").0, CovdilStatus::Invalid);
    assert_eq!(run(sc, "frobnicate").0, CovdilStatus::Invalid);
    assert_eq!(run(ptr::null(), "check").0, CovdilStatus::NullPointer);
    let cmd = CString::new("check").unwrap();
    assert_eq!(unsafe { covdil_run(sc, cmd.as_ptr(), ptr::null_mut()) }, CovdilStatus::NullPointer);
    let bad = [0xffu8, 0xfe, 0];
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { covdil_run(sc, bad.as_ptr().cast(), &mut out) }, CovdilStatus::InvalidUtf8);
    assert_eq!(unsafe { covdil_scenario_from_json(ptr::null(), &mut ptr::null_mut()) }, CovdilStatus::NullPointer);
    let missing = CString::new("/nonexistent/scenario.json").unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { covdil_scenario_from_path(missing.as_ptr(), &mut h) }, CovdilStatus::Invalid);
    unsafe {
        covdil_scenario_free(sc);
        covdil_scenario_free(ptr::null_mut());
        covdil_string_free(ptr::null_mut());
    }
}

#[test]
fn compare_through_handles() {
    let a = demo("tower");
    let b = demo("tower");
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { covdil_compare(a, b, &mut out) }, CovdilStatus::Ok);
    let rep: serde_json::Value = serde_json::from_str(unsafe { CStr::from_ptr(out) }.to_str().unwrap()).unwrap();
    assert_eq!(rep["verdicts"]["extensions"]["verdict"], "equivalent");
    unsafe {
        covdil_string_free(out);
        covdil_scenario_free(a);
        covdil_scenario_free(b);
    }
}

#[test]
fn schaffer_dilation_of_a_scalar() {
    let t = [0.6, 0.0];
    let mut dim = 0usize;
    assert_eq!(unsafe { covdil_schaffer_dilation(t.as_ptr(), 1, 2, ptr::null_mut(), 0, &mut dim) }, CovdilStatus::Ok);
    assert_eq!(dim, 3);
    let mut small = [0.0; 4];
    assert_eq!(
        unsafe { covdil_schaffer_dilation(t.as_ptr(), 1, 2, small.as_mut_ptr(), small.len(), &mut dim) },
        CovdilStatus::BufferTooSmall
    );
    let mut w = vec![f64::NAN; 2 * dim * dim];
    assert_eq!(unsafe { covdil_schaffer_dilation(t.as_ptr(), 1, 2, w.as_mut_ptr(), w.len(), &mut dim) }, CovdilStatus::Ok);
    let re = |i: usize, j: usize| w[2 * (i * dim + j)];
    assert_eq!(re(0, 0), 0.6);
    // W*W = I on the whole space except the last copy
    for j in 0..dim - 1 {
        let norm: f64 = (0..dim).map(|i| re(i, j).powi(2) + w[2 * (i * dim + j) + 1].powi(2)).sum();
        assert!((norm - 1.0).abs() < 1e-12, "column {j}: {norm}");
    }
    let t = [1.5, 0.0];
    assert_eq!(unsafe { covdil_schaffer_dilation(t.as_ptr(), 1, 1, ptr::null_mut(), 0, &mut dim) }, CovdilStatus::Invalid);
}

fn target_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "covdil.h"

int main(void) {
    CovdilScenario *sc = NULL;
    if (covdil_demo_scenario("scalar", &sc) != COVDIL_STATUS_OK) return 10;
    char *report = NULL;
    CovdilStatus s = covdil_run(sc, "unitary", &report);
    if (s != COVDIL_STATUS_OK) return 11;
    if (strstr(report, "\"passed\": true") == NULL) return 12;
    covdil_string_free(report);
    if (covdil_run(sc, "nope", &report) != COVDIL_STATUS_INVALID) return 13;
    if (covdil_last_error() == NULL) return 14;
    covdil_scenario_free(sc);
    printf("%s\n", covdil_version());
    return 0;
}
"#;

#[test]
fn header_compiles_and_links_from_c() {
    let lib = target_dir().join("libcovdil_ffi.a");
    assert!(lib.exists(), "static library not built at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let exe = dir.path().join("main");
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), env!("CARGO_PKG_VERSION"));
}
