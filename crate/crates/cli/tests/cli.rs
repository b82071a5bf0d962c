use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;
use tempfile::TempDir;

struct Workdir(TempDir);

impl Workdir {
    fn new() -> Self {
        Self(tempfile::tempdir().unwrap())
    }

    fn write(&self, name: &str, contents: &str) -> PathBuf {
        let path = self.0.path().join(name);
        std::fs::write(&path, contents).unwrap();
        path
    }

    fn sequence(&self, name: &str, start: u64, values: impl IntoIterator<Item = f64>) -> PathBuf {
        let values: Vec<f64> = values.into_iter().collect();
        self.write(
            name,
            &serde_json::json!({ "start": start, "values": values }).to_string(),
        )
    }
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dirmoment"))
        .args(args)
        .output()
        .unwrap()
}

fn run_on(cmd: &str, path: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, path.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stdout));
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn reciprocal_sequence_is_a_member() {
    let dir = Workdir::new();
    let path = dir.sequence("w.json", 1, (1..=64).map(|n| 1.0 / n as f64));
    let out = run_on("check", &path, &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert_eq!(report["verdict"], "member");
    assert!(report["residual"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn shifted_reciprocal_is_rejected_with_evidence() {
    let dir = Workdir::new();
    let path = dir.sequence("w.json", 1, (1..=64).map(|n| 1.0 / (n as f64 + 1.0)));
    let out = run_on("check", &path, &[]);
    assert_eq!(code(&out), 1);
    let report = json(&out);
    assert_eq!(report["verdict"], "rejected");
    assert!(report["rejection_evidence"]["kind"].is_string());
}

#[test]
fn indicator_of_one_recovers_the_atom() {
    let dir = Workdir::new();
    let path = dir.sequence(
        "w.json",
        1,
        (1..=64).map(|n| if n == 1 { 1.0 } else { 0.0 }),
    );
    let out = run_on("recover", &path, &[]);
    assert_eq!(code(&out), 0);
    let rec = json(&out);
    assert!((rec["atom"].as_f64().unwrap() - 1.0).abs() < 1e-6, "{rec}");

    let out = run_on("recover", &path, &["--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("component,s,weight"));
    assert!(lines.next().unwrap().starts_with("atom,,"));
}

#[test]
fn certify_reports_witness_and_certificate() {
    let dir = Workdir::new();
    let bad = dir.write("bad.json", r#"{"coeffs":{"2":1,"3":-2}}"#);
    let out = run_on("certify", &bad, &[]);
    assert_eq!(code(&out), 1);
    let cert = json(&out);
    assert_eq!(cert["outcome"], "witness");
    assert_eq!(cert["s"].as_f64().unwrap(), 0.0);
    assert!(cert["value"].as_f64().unwrap() < 0.0);

    let square = dir.write("square.json", r#"{"coeffs":{"1":1,"2":-2,"4":1}}"#);
    let out = run_on("certify", &square, &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(json(&out)["outcome"], "certified");
}

#[test]
fn examples_round_trip_through_check() {
    let dir = Workdir::new();
    for (family, alpha) in [
        ("a", "-1"),
        ("a", "-2.5"),
        ("b", "1"),
        ("b", "0.5"),
        ("c", "0.5"),
        ("c", "1"),
    ] {
        let out = run(&["examples", family, "--alpha", alpha, "-n", "64"]);
        assert_eq!(
            code(&out),
            0,
            "{family} {alpha}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let w = json(&out);
        let expected_start = if family == "a" { 2 } else { 1 };
        assert_eq!(w["start"], expected_start);
        let path = dir.write("w.json", &w.to_string());
        let out = run_on("check", &path, &[]);
        assert_eq!(
            code(&out),
            0,
            "{family} {alpha}: {}",
            String::from_utf8_lossy(&out.stdout)
        );
    }
}

#[test]
fn example_values_follow_the_closed_forms() {
    let out = run(&[
        "examples", "b", "--alpha", "1", "-n", "8", "--format", "csv",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "n,w");
    for row in &rows[1..] {
        let (n, v) = row.split_once(',').unwrap();
        let (n, v): (f64, f64) = (n.parse().unwrap(), v.parse().unwrap());
        assert!((v - 1.0 / (n.ln() + 1.0)).abs() < 1e-14);
    }

    let closed = json(&run(&["examples", "a", "--alpha", "-1", "-n", "16"]));
    let quad = json(&run(&[
        "examples",
        "a",
        "--alpha",
        "-1",
        "-n",
        "16",
        "--quadrature",
    ]));
    for (c, q) in closed["values"]
        .as_array()
        .unwrap()
        .iter()
        .zip(quad["values"].as_array().unwrap())
    {
        let (c, q) = (c.as_f64().unwrap(), q.as_f64().unwrap());
        assert!((c - q).abs() <= 1e-6 * c, "{c} vs {q}");
    }
}

#[test]
fn bare_arrays_use_the_start_index() {
    let dir = Workdir::new();
    let values: Vec<f64> = (2..=64).map(|n| 1.0 / (n as f64).ln()).collect();
    let path = dir.write("w.json", &serde_json::to_string(&values).unwrap());
    let out = run_on("check", &path, &["--start-index", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let framed = dir.sequence("framed.json", 2, values);
    let out = run_on("check", &framed, &["--start-index", "3"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("start"));
}

#[test]
fn sequences_can_come_from_stdin() {
    let values: Vec<f64> = (1..=32).map(|n| (n as f64).powi(-2)).collect();
    let mut child = Command::new(env!("CARGO_BIN_EXE_dirmoment"))
        .args(["check", "-", "--format", "csv"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(serde_json::to_string(&values).unwrap().as_bytes())
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .starts_with("verdict,residual,evidence\nmember,"));
}

#[test]
fn decompose_separates_the_atom() {
    let dir = Workdir::new();
    // 0.3 at t = 0 plus 0.7 at t = e^{-2}.
    let path = dir.sequence(
        "w.json",
        1,
        (1..=64).map(|n| {
            if n == 1 {
                1.0
            } else {
                0.7 * (n as f64).powi(-2)
            }
        }),
    );
    let out = run_on("decompose", &path, &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let pair = json(&out);
    assert!(
        (pair["atom"].as_f64().unwrap() - 0.3).abs() < 1e-6,
        "{pair}"
    );
    let atoms = pair["rep_measure"]["atoms"].as_array().unwrap();
    let mass: f64 = atoms.iter().map(|a| a[1].as_f64().unwrap()).sum();
    assert!((mass - 0.7).abs() < 1e-6);
}

#[test]
fn decompose_fails_on_non_members() {
    let dir = Workdir::new();
    let path = dir.sequence(
        "w.json",
        1,
        (1..=32).map(|n| if n % 2 == 0 { 1.0 } else { 0.5 }),
    );
    let out = run_on("decompose", &path, &[]);
    assert_eq!(code(&out), 2);
    assert!(out.stdout.is_empty());
}

#[test]
fn helson_table_has_one_row_per_size() {
    let dir = Workdir::new();
    let path = dir.sequence("w.json", 1, (1..=256).map(|n| (n as f64).powi(-2)));
    let out = run_on("helson", &path, &["--sizes", "4,8,16"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "N,norm,size_criterion,cm_criterion");
    assert_eq!(rows.len(), 4);
    let norms: Vec<f64> = rows[1..]
        .iter()
        .map(|r| r.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(norms.windows(2).all(|p| p[1] >= p[0]));
    assert!(
        rows[1..].iter().all(|r| r.ends_with(",true,true")),
        "{text}"
    );

    let report = json(&run_on(
        "helson",
        &path,
        &["--sizes", "4,8", "--format", "json"],
    ));
    assert_eq!(report["rows"].as_array().unwrap().len(), 2);
    assert_eq!(report["cm_criterion"], true);
}

#[test]
fn bad_configuration_and_inputs_exit_with_three() {
    let dir = Workdir::new();
    let path = dir.sequence("w.json", 1, (1..=16).map(|n| 1.0 / n as f64));
    for extra in [
        &["--tol", "0"][..],
        &["--grid-size", "4"],
        &["--grid-max=-1"],
        &["--max-order", "x"],
    ] {
        let out = run_on("check", &path, extra);
        assert_eq!(code(&out), 3, "{extra:?}");
    }
    let out = run(&["check", dir.0.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    let garbage = dir.write("garbage.json", "{\"start\": 1");
    assert_eq!(code(&run_on("check", &garbage, &[])), 3);
    let negative = dir.sequence("neg.json", 1, [1.0, -1.0]);
    assert_eq!(code(&run_on("check", &negative, &[])), 3);
    let out = run(&["examples", "c", "--alpha", "2"]);
    assert_eq!(code(&out), 3);
}
