use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bellforge::interferometer::{Circuit, Gate};
use bellforge::optimize::CertificationReport;

fn bellforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bellforge"))
        .args(args)
        .env("BELLFORGE_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn write_circuit(dir: &Path, name: &str, c: &Circuit) -> String {
    let path = dir.join(name);
    c.save(&path).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn verify_certifies_stored_five_mode_circuit() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let out = bellforge(&[
        "verify",
        "--circuit",
        &fixture("five_mode.json"),
        "--scheme",
        "five-mode",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let parsed: CertificationReport =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!((parsed.success_probability - 1.0 / 9.0).abs() < 1e-9);
    assert!(parsed.certified);
    assert!(stdout(&out).contains("certified true"));
}

#[test]
fn verify_accepts_two_files_for_two_stage() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(fixture("two_stage.json")).unwrap();
    let pair: Vec<Circuit> = serde_json::from_str(&text).unwrap();
    let a = write_circuit(dir.path(), "v1.json", &pair[0]);
    let b = write_circuit(dir.path(), "v2.json", &pair[1]);
    let out = bellforge(&["verify", "--circuit", &a, &b, "--scheme", "two-stage"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("stage1_probability 2.77777777"));
}

#[test]
fn verify_rejects_identity_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_circuit(dir.path(), "id.json", &Circuit::identity_mesh(5));
    let out = bellforge(&["verify", "--circuit", &c, "--scheme", "five-mode"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_reads_scheme_config_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scheme.json");
    fs::write(
        &cfg,
        r#"{"type": "five-mode", "input_occupation": "1111 0", "target": "phi+"}"#,
    )
    .unwrap();
    let out = bellforge(&[
        "verify",
        "--circuit",
        &fixture("five_mode.json"),
        "--scheme",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn missing_files_are_reported() {
    let out = bellforge(&[
        "verify",
        "--circuit",
        "/nonexistent/c.json",
        "--scheme",
        "five-mode",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/c.json"));
}

#[test]
fn evolve_shows_hong_ou_mandel_dip() {
    let dir = tempfile::tempdir().unwrap();
    let c = Circuit {
        n_modes: 2,
        gates: vec![Gate::new(0, std::f64::consts::FRAC_PI_4, 0.0)],
        output_phases: vec![0.0],
        label: None,
    };
    let path = write_circuit(dir.path(), "bs.json", &c);
    let report = dir.path().join("evolve.json");
    let out = bellforge(&[
        "evolve",
        "--circuit",
        &path,
        "--input",
        "11",
        "--aux",
        "1",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    for a in v["amplitudes"].as_array().unwrap() {
        let (re, im) = (a["re"].as_f64().unwrap(), a["im"].as_f64().unwrap());
        let p = re * re + im * im;
        match a["occupation"].as_str().unwrap() {
            "11" => assert!(p < 1e-24),
            _ => assert!((p - 0.5).abs() < 1e-12),
        }
    }
    let table = v["outcome_table"].as_array().unwrap();
    assert_eq!(table.len(), 3);
}

#[test]
fn evolve_identity_echoes_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_circuit(dir.path(), "id.json", &Circuit::identity(5));
    let out = bellforge(&[
        "evolve",
        "--circuit",
        &path,
        "--input",
        "1111 0",
        "--scheme",
        "five-mode",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(
        text.contains("11110 1.0000000000000000e0 0.0000000000000000e0"),
        "{text}"
    );
    assert!(text.contains("aux 0 1.0000000000000000e0"));
}

#[test]
fn evolve_rejects_wrong_mode_count() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_circuit(dir.path(), "id.json", &Circuit::identity(5));
    let out = bellforge(&["evolve", "--circuit", &path, "--input", "111"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn optimize_writes_circuit_trace_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let circuit = dir.path().join("c.json");
    let trace = dir.path().join("t.csv");
    let report = dir.path().join("r.json");
    let args = [
        "optimize",
        "--scheme",
        "five-mode",
        "--restarts",
        "3",
        "--seed",
        "42",
        "--out",
        circuit.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ];
    let out = bellforge(&args);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("success_probability 1.11111111"), "{text}");
    let csv = fs::read_to_string(&trace).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "restart,iteration,cost,infidelity,probability"
    );
    assert!(csv.lines().count() > 100);
    let verify = bellforge(&[
        "verify",
        "--circuit",
        circuit.to_str().unwrap(),
        "--scheme",
        "five-mode",
    ]);
    assert_eq!(verify.status.code(), Some(0));

    // Same seed, same output.
    let again = bellforge(&args);
    assert_eq!(stdout(&again), text);
    assert_eq!(fs::read_to_string(&trace).unwrap(), csv);
}

#[test]
fn optimize_flags_unconverged_runs() {
    let out = bellforge(&[
        "optimize",
        "--scheme",
        "six-mode",
        "--restarts",
        "1",
        "--max-iterations",
        "3",
        "--no-refine",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("converged false"));
}

#[test]
fn usage_errors() {
    assert_eq!(
        bellforge(&["optimize", "--scheme", "five-mode", "--restarts", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        bellforge(&["bench-permanent", "--reps", "0"]).status.code(),
        Some(2)
    );
    assert_eq!(
        bellforge(&["bench-permanent", "--sizes", "2..15"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        bellforge(&["optimize", "--scheme", "seven-mode"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn bench_cross_checks_small_sizes() {
    let out = bellforge(&["bench-permanent", "--sizes", "1..8", "--reps", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 9);
    assert!(text
        .lines()
        .any(|l| l.starts_with("4 ") && l.ends_with(" pass")));
    assert!(text
        .lines()
        .any(|l| l.starts_with("8 ") && l.ends_with(" skipped")));
}
