//! End-to-end runs of the `quadratope` binary against the bundled fixtures.

use serde_json::Value;
use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(format!("{name}.json"))
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quadratope"))
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn run_fixture(sub: &str, name: &str, extra: &[&str]) -> Output {
    let path = fixture(name);
    let mut args = vec![sub, path.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout should be a JSON report")
}

fn check<'a>(r: &'a Value, name: &str) -> &'a Value {
    r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == name)
        .unwrap_or_else(|| panic!("missing check {name}"))
}

#[test]
fn info_summarizes_a_polytope() {
    let out = run_fixture("info", "cube", &[]);
    assert!(out.status.success());
    let r = report(&out);
    assert_eq!(r["dim"], 3);
    assert_eq!(r["facets"], 6);
    assert_eq!(r["vertices"], 8);
    assert_eq!(r["codim"], 3);
    assert!(r["input"]["sha256"].as_str().unwrap().len() == 64);
}

#[test]
fn quadrics_emit_one_row_per_codimension() {
    let out = run_fixture("quadrics", "cube", &[]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = v["C"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0].as_array().unwrap().len(), 6);
    assert_eq!(v["c"].as_array().unwrap().len(), 3);
}

#[test]
fn check_manifold_is_byte_deterministic() {
    let a = run_fixture("check-manifold", "simplex2", &["--samples", "300"]);
    let b = run_fixture("check-manifold", "simplex2", &["--samples", "300"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let threaded = run_fixture(
        "check-manifold",
        "simplex2",
        &["--samples", "300", "--threads", "4"],
    );
    assert_eq!(a.stdout, threaded.stdout, "bytes must not depend on --threads");
}

#[test]
fn sample_is_deterministic_and_seed_sensitive() {
    let a = run_fixture("sample", "square", &["--samples", "12"]);
    let b = run_fixture("sample", "square", &["--samples", "12"]);
    let c = run_fixture("sample", "square", &["--samples", "12", "--seed", "7"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn atlas_check_passes_on_the_pentagon() {
    let out = run_fixture("atlas-check", "pentagon", &["--probes", "25"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert_eq!(r["schema"], 1);
    assert_eq!(r["status"], "pass");
    assert_eq!(check(&r, "round_trip")["status"], "pass");
    assert_eq!(check(&r, "cocycle")["status"], "pass");
}

#[test]
fn collar_check_passes_on_the_skew_quadrilateral() {
    let out = run_fixture("collar-check", "quadrilateral", &["--probes", "40"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert_eq!(check(&r, "consistency")["status"], "pass");
    assert_eq!(check(&r, "round_trip")["status"], "pass");
    assert_eq!(check(&r, "c1")["status"], "pass");
}

#[test]
fn pyramid_is_rejected_as_not_simple() {
    let out = run_fixture("info", "pyramid", &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("not simple"), "stderr was: {err}");
}

#[test]
fn garbage_input_exits_with_usage_error() {
    let out = run_fixture("info", "no_such_fixture", &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_diffeo_certifies_an_affine_scaling() {
    let src = fixture("simplex2");
    let tgt = fixture("simplex2_scaled");
    let out = run(&[
        "verify-diffeo",
        src.to_str().unwrap(),
        tgt.to_str().unwrap(),
        "--affine",
        "--points",
        "40",
        "--sign-vectors",
        "16",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert_eq!(r["status"], "pass");
    assert_eq!(check(&r, "equivariance")["residual"], 0.0);
    assert_eq!(check(&r, "target_membership")["status"], "pass");
    assert_eq!(check(&r, "round_trip")["status"], "pass");
    assert_eq!(check(&r, "stabilizer")["status"], "pass");
    assert_eq!(r["data"]["base_map"]["kind"], "affine");
}

#[test]
fn structure_lift_verifies_against_itself() {
    let src = fixture("square");
    let out = run(&[
        "verify-diffeo",
        src.to_str().unwrap(),
        src.to_str().unwrap(),
        "--structure",
        "--points",
        "30",
        "--sign-vectors",
        "8",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert_eq!(r["data"]["base_map"]["kind"], "structure-composite");
    assert_eq!(check(&r, "wall_derivatives")["status"], "pass");
}

const ROT: &str = "python3 -c \"import sys,json\nfor l in sys.stdin: d=json.loads(l); x=d['x']; print(json.dumps({'gx':[1.0-x[1],x[0]]}),flush=True)\"";
const ROT_INV: &str = "python3 -c \"import sys,json\nfor l in sys.stdin: d=json.loads(l); y=d['x']; print(json.dumps({'gx':[y[1],1.0-y[0]]}),flush=True)\"";

#[test]
fn external_rotation_with_true_pairing_passes() {
    let src = fixture("square");
    let out = run(&[
        "verify-diffeo",
        src.to_str().unwrap(),
        src.to_str().unwrap(),
        "--map",
        ROT,
        "--inverse-map",
        ROT_INV,
        "--pairing",
        "2,3,1,0",
        "--points",
        "24",
        "--sign-vectors",
        "8",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert_eq!(r["status"], "pass");
    assert_eq!(r["data"]["base_map"]["kind"], "user-supplied");
}

#[test]
fn external_rotation_with_wrong_pairing_fails_membership() {
    let src = fixture("square");
    let out = run(&[
        "verify-diffeo",
        src.to_str().unwrap(),
        src.to_str().unwrap(),
        "--map",
        ROT,
        "--inverse-map",
        ROT_INV,
        "--points",
        "24",
        "--sign-vectors",
        "8",
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert_eq!(r["status"], "fail");
    assert_eq!(check(&r, "target_membership")["status"], "fail");
}

#[test]
fn verify_diffeo_insists_on_an_inverse_for_external_maps() {
    let src = fixture("square");
    let out = run(&[
        "verify-diffeo",
        src.to_str().unwrap(),
        src.to_str().unwrap(),
        "--map",
        ROT,
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--inverse-map"), "stderr was: {err}");
}

#[test]
fn lift_accepts_a_one_way_external_map() {
    let src = fixture("square");
    let out = run(&[
        "lift",
        src.to_str().unwrap(),
        src.to_str().unwrap(),
        "--map",
        ROT,
        "--pairing",
        "2,3,1,0",
        "--points",
        "10",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn mismatched_combinatorics_fail_with_exit_one() {
    let src = fixture("square");
    let tgt = fixture("pentagon");
    let out = run(&[
        "lift",
        src.to_str().unwrap(),
        tgt.to_str().unwrap(),
        "--affine",
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert_eq!(check(&r, "base_map")["status"], "fail");
}

#[test]
fn out_flag_writes_the_report_to_a_file() {
    let dir = std::env::temp_dir().join("quadratope-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("info.json");
    let out = run_fixture("info", "square", &["--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    let r: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(r["vertices"], 4);
    std::fs::remove_file(&path).ok();
}
