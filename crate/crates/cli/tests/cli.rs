use std::path::Path;
use std::process::Command;

use dsmf_cli::scenario_file::REFERENCE_SCENARIO;
use dsmf_cli::{cmd_certify, cmd_run, cmd_verify, parse_scenario, reference_scenario, scenario_to_toml};
use dsmf_core::{Mat, SensorId, Verdict};

/// Two-state plant, two sensors in a cycle, short horizon.
const SMALL: &str = r#"
[plant]
a = [[0.9, 0.1], [0.0, 1.0]]
b = [[1.0], [0.5]]
w = { lo = [-0.2], hi = [0.2] }

[[sensors]]
id = 1
c = [[1.0, 0.0]]
v = { lo = [-0.3], hi = [0.3] }

[[sensors]]
id = 2
c = [[0.0, 1.0]]
v = { lo = [-0.3], hi = [0.3] }

[graph]
edges = [[1, 2], [2, 1]]

[init]
true_x0 = [0.5, -0.5]
default = { lo = [-5.0, -5.0], hi = [5.0, 5.0] }

[run]
horizon = 12
seed = 7
"#;

fn with(text: &str, from: &str, to: &str) -> String {
    assert!(text.contains(from), "fixture edit {from:?} does not apply");
    text.replacen(from, to, 1)
}

fn dsmf() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dsmf"))
}

fn write_tmp(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn reference_file_carries_the_published_matrices() {
    let s = reference_scenario();
    assert_eq!(s.dim(), 6);
    assert_eq!(s.num_sensors(), 12);
    let diag: Vec<f64> = (0..6).map(|k| s.plant.a[(k, k)]).collect();
    assert_eq!(diag, [0.99, 1.01, 0.98, 1.0, 0.8, 0.9]);
    assert_eq!(s.plant.a.iter().filter(|v| **v != 0.0).count(), 6);
    let b = Mat::from_row_slice(6, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0]);
    assert_eq!(s.plant.b, b);
    let row = |i: usize| s.sensor(SensorId(i)).c.row(0).iter().copied().collect::<Vec<f64>>();
    assert_eq!(row(2), [0.0, 0.86, 0.0, 0.0, 0.0, 0.0]);
    assert_eq!(row(3), [0.0, 1.0, 1.01, 0.0, 0.0, 0.0]);
    assert_eq!(row(4), [0.0; 6]);
    assert_eq!(row(5), [0.0, 0.6, 0.0, 0.2, 0.0, 0.0]);
    assert_eq!(row(6), [0.95, 0.0, 0.0, 0.0, 0.0, 0.0]);
    assert_eq!(row(7), [0.0, 1.05, 0.0, 0.0, 0.0, 0.0]);
    assert_eq!(row(8), [0.0, 0.0, 2.0, 0.0, 0.0, 0.0]);
    for i in 10..=12 {
        assert_eq!(s.sensor(SensorId(i)).num_outputs(), 0);
    }
    assert_eq!(s.plant.w.lower, [-1.0, -1.0]);
    assert_eq!((s.horizon, s.max_gen, s.max_con), (200, 120, 60));
    let comps = s.graph.source_components();
    let mut members: Vec<Vec<usize>> = comps.iter().map(|c| c.vertices.iter().map(|v| v.0).collect()).collect();
    members.sort();
    assert_eq!(members, [vec![1, 2, 3, 4, 5], vec![6, 7, 8, 9]]);
    let on_disk = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/reference_12_sensor.toml");
    assert_eq!(std::fs::read_to_string(on_disk).unwrap(), REFERENCE_SCENARIO);
}

#[test]
fn toml_round_trip_preserves_the_scenario() {
    for s in [reference_scenario(), parse_scenario(SMALL).unwrap()] {
        let again = parse_scenario(&scenario_to_toml(&s)).unwrap();
        assert_eq!(again, s);
    }
}

#[test]
fn malformed_files_get_stable_codes() {
    let cases = [
        (
            with(SMALL, "a = [[0.9, 0.1], [0.0, 1.0]]", "a = [[0.9, 0.1], [0.0, 0.0]]"),
            "SINGULAR_A",
        ),
        (with(SMALL, "c = [[1.0, 0.0]]", "c = [[1.0, 0.0, 2.0]]"), "DIM_MISMATCH"),
        (with(SMALL, "horizon = 12", "horizon = 12\ncolour = 3"), "PARSE"),
        (
            with(
                SMALL,
                "w = { lo = [-0.2], hi = [0.2] }",
                "w = { lo = [-0.2], hi = [inf] }",
            ),
            "UNBOUNDED_BOX",
        ),
        (with(SMALL, "edges = [[1, 2], [2, 1]]", "edges = [[1, 3]]"), "BAD_GRAPH"),
    ];
    for (text, code) in cases {
        let err = parse_scenario(&text).unwrap_err();
        assert_eq!(err.code, code, "{err}");
    }
}

/// The initial state is only checked once a simulation is requested.
#[test]
fn initial_state_outside_the_belief_is_an_input_error() {
    let s = parse_scenario(&with(SMALL, "true_x0 = [0.5, -0.5]", "true_x0 = [9.0, -0.5]")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let err = cmd_run(&s, dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().starts_with("X0_OUTSIDE_BELIEF"), "{err}");
}

#[test]
fn certify_reference_and_perturbed_b() {
    let s = reference_scenario();
    let rep = cmd_certify(&s).unwrap();
    assert!(rep.passes());
    assert_eq!(rep.network_verdict, Verdict::Theorem1Bounded);
    let mut covered: Vec<usize> = rep.covered_by_predecessor.iter().map(|v| v.0).collect();
    covered.sort();
    assert_eq!(covered, [10, 11, 12]);

    let mut bad = s.clone();
    bad.plant.b[(3, 0)] = 1.0;
    let rep = cmd_certify(&bad).unwrap();
    assert_eq!(rep.network_verdict, Verdict::Uncertified);
    assert!(!rep.passes());
}

#[test]
fn stable_plant_without_measurements_is_certified() {
    let text = r#"
[plant]
a = [[0.5]]
b = [[1.0]]
w = { lo = [-1.0], hi = [1.0] }

[[sensors]]
id = 1

[graph]
edges = []

[init]
true_x0 = [0.0]
default = { lo = [-1.0], hi = [1.0] }

[run]
horizon = 3
seed = 1
"#;
    let rep = cmd_certify(&parse_scenario(text).unwrap()).unwrap();
    assert_eq!(rep.network_verdict, Verdict::Detectable);
}

#[test]
fn zero_horizon_run_writes_only_the_first_step() {
    let s = parse_scenario(&with(SMALL, "horizon = 12", "horizon = 0")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let sum = cmd_run(&s, dir.path()).unwrap();
    assert_eq!((sum.truth_checks, sum.truth_violations), (2, 0));
    let csv = std::fs::read_to_string(dir.path().join("sensor_01.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.starts_with("0,")));
    // No windows to compare, so no growth entries.
    let b = std::fs::read_to_string(dir.path().join("boundedness.csv")).unwrap();
    assert_eq!(b.lines().count(), 1);
}

#[test]
fn run_artifacts_are_complete_and_sound() {
    let s = parse_scenario(SMALL).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let sum = cmd_run(&s, dir.path()).unwrap();
    assert_eq!((sum.truth_checks, sum.truth_violations), (26, 0));
    for name in [
        "trajectory.csv",
        "sensor_01.csv",
        "sensor_02.csv",
        "boundedness.csv",
        "summary.json",
        "diagnostics.json",
    ] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    for d in 1..=2 {
        let svg = std::fs::read_to_string(dir.path().join(format!("plots/sensor_02_dim_{d}.svg"))).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }
    let traj = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().next(), Some("k,x1,x2"));
    assert_eq!(traj.lines().count(), 14);
    let diag: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["status"], "ok");
    assert_eq!(diag["windows"]["tail"], serde_json::json!([9, 12]));
}

#[test]
fn verify_small_network_and_catch_faults() {
    let s = parse_scenario(SMALL).unwrap();
    let zero = cmd_verify(&s, 0, 20, false).unwrap();
    assert_eq!((zero.prop1_violations, zero.prop2_checked), (0, 0));
    let clean = cmd_verify(&s, 4, 50, false).unwrap();
    assert_eq!(clean.violations(), 0);
    assert!(clean.prop1_checked >= 2 * 5 * 50 && clean.prop2_checked > 0);
    let faulty = cmd_verify(&s, 4, 50, true).unwrap();
    assert!(faulty.prop1_violations > 0 && faulty.prop2_violations > 0);
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_tmp(dir.path(), "good.toml", SMALL);
    let bad_parse = write_tmp(dir.path(), "bad.toml", &with(SMALL, "seed = 7", "seed = 7\nbogus = 1"));
    let bad_b = write_tmp(
        dir.path(),
        "uncertified.toml",
        // x2 is unobserved, sits at 1 and is driven by noise.
        &with(
            &with(SMALL, "c = [[0.0, 1.0]]", "c = [[1.0, 0.0]]"),
            "a = [[0.9, 0.1], [0.0, 1.0]]",
            "a = [[0.9, 0.0], [0.0, 1.0]]",
        ),
    );

    let out = dsmf().arg("certify").arg(&good).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let rep: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep["network_verdict"], "DETECTABLE");

    let out = dsmf().arg("certify").arg(&bad_b).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let rep: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep["network_verdict"], "UNCERTIFIED");

    let out = dsmf().arg("certify").arg(&bad_parse).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("PARSE"));

    let out = dsmf()
        .arg("certify")
        .arg(dir.path().join("missing.toml"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("IO"));

    let out = dsmf().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = dsmf()
        .args(["verify", "--kmax", "3", "--samples", "30"])
        .arg(&good)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let out = dsmf()
        .args(["verify", "--kmax", "3", "--samples", "30", "--inject-fault"])
        .arg(&good)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    let run_dir = dir.path().join("out");
    let out = dsmf()
        .arg("run")
        .arg(&good)
        .arg("--out")
        .arg(&run_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let sum: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(sum["truth_violations"], 0);
}

#[test]
fn same_seed_same_bytes() {
    let s = parse_scenario(SMALL).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    cmd_run(&s, a.path()).unwrap();
    cmd_run(&s, b.path()).unwrap();
    for name in [
        "trajectory.csv",
        "sensor_01.csv",
        "sensor_02.csv",
        "boundedness.csv",
        "summary.json",
    ] {
        assert_eq!(
            std::fs::read(a.path().join(name)).unwrap(),
            std::fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
    let mut other = s.clone();
    other.seed = 8;
    let c = tempfile::tempdir().unwrap();
    cmd_run(&other, c.path()).unwrap();
    assert_ne!(
        std::fs::read(a.path().join("trajectory.csv")).unwrap(),
        std::fs::read(c.path().join("trajectory.csv")).unwrap()
    );
}
