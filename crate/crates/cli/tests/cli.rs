use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_projkahler"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

#[test]
fn star_suite_passes_and_exits_zero() {
    let out = run(&["verify", "star", "--n", "2", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("report is valid structured text");
    assert_eq!(report["schema"], 1);
    assert_eq!(report["overall_pass"], true);
    assert_eq!(report["config"]["seed"], 7);
}

#[test]
fn out_of_bounds_config_exits_two() {
    let out = run(&["verify", "all", "--n", "9"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["verify", "star", "--k", "100"]);
    assert_eq!(out.status.code(), Some(2));
    // pauli-z preset is 2×2
    let out = run(&["verify", "star", "--n", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    let out = run(&["verify", "nonsense-suite"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failed_check_exits_one() {
    // an absurdly tight override forces a failure without breaking anything
    let out = run(&[
        "verify",
        "star",
        "--tol",
        "sup-norm-matches-singular-value=1e-30",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["overall_pass"], false);
}

#[test]
fn reports_are_bit_identical_for_fixed_seed() {
    let a = run(&["verify", "star", "--seed", "11"]);
    let b = run(&["verify", "star", "--seed", "11"]);
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["verify", "star", "--seed", "12"]);
    assert_eq!(c.status.code(), Some(0));

    // the crossed campaign exercises the parallel tensor assemblies, which
    // must still sum in a fixed order
    let a = run(&["verify", "crossed", "--seed", "11"]);
    let b = run(&["verify", "crossed", "--seed", "11"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.status.code(), Some(0));
}

#[test]
fn demo_flow_trajectory_is_conservative() {
    let dir = std::env::temp_dir().join(format!("projkahler-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let a_path: PathBuf = dir.join("sx.json");
    std::fs::write(&a_path, "[[[0,0],[1,0]],[[1,0],[0,0]]]").unwrap();
    let out_path = dir.join("traj.json");
    let out = run(&[
        "demo-flow",
        "--a-file",
        a_path.to_str().unwrap(),
        "--p0",
        "[[1,0],[0,0]]",
        "--t",
        "3.141592653589793",
        "--steps",
        "2000",
        "--samples",
        "20",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Vec<serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(rows.len(), 21);
    // energy column constant; σx expectation at e0 is 0
    for r in &rows {
        assert!(r["energy"].as_f64().unwrap().abs() < 1e-8);
    }
    // one full period returns to the start chart
    let first = &rows[0];
    let last = &rows[rows.len() - 1];
    assert_eq!(first["pivot"], last["pivot"]);
    let z0 = first["z"][0][0].as_f64().unwrap();
    let z1 = last["z"][0][0].as_f64().unwrap();
    assert!((z0 - z1).abs() < 1e-5);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn demo_flow_rejects_non_hermitian() {
    let dir = std::env::temp_dir().join(format!("projkahler-badh-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let a_path = dir.join("bad.json");
    std::fs::write(&a_path, "[[[0,0],[1,0]],[[0,0],[0,0]]]").unwrap();
    let out = run(&[
        "demo-flow",
        "--a-file",
        a_path.to_str().unwrap(),
        "--p0",
        "[[1,0],[0,0]]",
    ]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn commutant_dimensions_for_known_spans() {
    let dir = std::env::temp_dir().join(format!("projkahler-comm-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let d1 = dir.join("d1.json");
    let d2 = dir.join("d2.json");
    std::fs::write(&d1, "[[[1,0],[0,0]],[[0,0],[0,0]]]").unwrap();
    std::fs::write(&d2, "[[[0,0],[0,0]],[[0,0],[1,0]]]").unwrap();
    let out = run(&["commutant", d1.to_str().unwrap(), d2.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let rep: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep["dim_s"], 2);
    assert_eq!(rep["dim_commutant"], 2);
    assert_eq!(rep["dim_bicommutant"], 2);
    assert_eq!(rep["bicommutant_equals_span"], true);

    // pauli pair generates an irreducible span
    let sx = dir.join("sx.json");
    let sz = dir.join("sz.json");
    std::fs::write(&sx, "[[[0,0],[1,0]],[[1,0],[0,0]]]").unwrap();
    std::fs::write(&sz, "[[[1,0],[0,0]],[[0,0],[-1,0]]]").unwrap();
    let out = run(&["commutant", sx.to_str().unwrap(), sz.to_str().unwrap()]);
    let rep: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep["dim_s"], 2);
    assert_eq!(rep["dim_commutant"], 1);

    // scalars
    let id = dir.join("id.json");
    std::fs::write(&id, "[[[1,0],[0,0]],[[0,0],[1,0]]]").unwrap();
    let out = run(&["commutant", id.to_str().unwrap()]);
    let rep: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep["dim_s"], 1);
    assert_eq!(rep["dim_commutant"], 4);
    assert_eq!(rep["dim_bicommutant"], 1);

    // parse errors exit 2
    let bad = dir.join("bad.json");
    std::fs::write(&bad, "[[[1,0]],[[0,0],[1,0]]]").unwrap();
    let out = run(&["commutant", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn timings_flag_adds_elapsed_fields() {
    let out = run(&["verify", "star", "--timings"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let checks = report["sections"]["star"].as_array().unwrap();
    assert!(checks.iter().all(|c| c.get("elapsed_ms").is_some()));
    // and without the flag the field is absent
    let out = run(&["verify", "star"]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let checks = report["sections"]["star"].as_array().unwrap();
    assert!(checks.iter().all(|c| c.get("elapsed_ms").is_none()));
}
