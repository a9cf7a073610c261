use std::fs;
use std::process::{Command, Output};

use onebit_expcli::persist::load;
use serde_json::Value;

fn onebit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_onebit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(args: &[&str]) -> Vec<Value> {
    let out = onebit(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn measure_reads_a_generated_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.txt");
    let p = path.to_str().unwrap();
    assert!(onebit(&["gen-matrix", "--m", "4", "--n", "3", "--ensemble", "rademacher", "--seed", "1", "--out", p])
        .status
        .success());
    let text = fs::read_to_string(&path).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split_whitespace().map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4);

    let out = stdout_json(&["measure", "--matrix", p, "--signal", "1:2,2:1"]);
    // b = sign(2 a_1 + a_2) with sign(0) = +1
    let expected: String = rows
        .iter()
        .map(|r| if 2.0 * r[0] + r[1] >= 0.0 { '+' } else { '-' })
        .collect();
    assert_eq!(out[0]["pattern"], expected);
}

#[test]
fn worked_example_matrix_is_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ex.txt");
    fs::write(&path, "3 3 rademacher none\n1 1 1\n1 -1 1\n-1 1 -1\n").unwrap();
    let out = stdout_json(&["validate", "--matrix", path.to_str().unwrap(), "--k", "2", "--r-range", "2"]);
    assert_eq!(out[0]["verdict"], "invalid");
    let out = stdout_json(&["witness", "--matrix", path.to_str().unwrap(), "--k", "2", "--r-range", "2"]);
    assert_eq!(out[0]["outcome"]["outcome"], "certificate");
}

#[test]
fn sweep_writes_records_file_and_report_reads_it() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.jsonl");
    let p = path.to_str().unwrap();
    let out = onebit(&[
        "sweep-balance", "--n", "8", "--k", "2", "--d", "0.3", "--m", "1,2,4", "--trials", "100", "--seed", "0x10",
        "--out", p,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let records = load(&path).unwrap();
    assert_eq!(records.iter().map(|r| r.params.m).collect::<Vec<_>>(), vec![1, 2, 4]);
    assert!(records.iter().all(|r| r.seed.seed == 16));

    let table = onebit(&["report", "--input", p]);
    assert!(table.status.success());
    let text = String::from_utf8(table.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);

    let csv = onebit(&["report", "--input", p, "--format", "csv"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("experiment_id,"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    for args in [
        vec!["sweep-balance", "--n", "8", "--k", "2", "--d", "0.3", "--m", "1", "--trials", "0"],
        vec!["prob", "--kernel", "failure-mc", "--k", "2", "--d", "0.3", "--trials", "100", "--trial-budget", "10"],
        vec!["thresholds", "--n", "1000", "--k", "10", "--format", "csv"],
        vec!["measure", "--m", "3", "--n", "4", "--signal", "0:1"],
        vec!["check-balanced", "--k", "2", "--d", "1"],
    ] {
        let out = onebit(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert!(err.starts_with("error: "), "{args:?}: {err}");
    }
}

#[test]
fn report_rejects_truncated_input_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    fs::write(&path, "# onebit-records version=0.1.0\n{\"experiment_id\":\"x\"").unwrap();
    let out = onebit(&["report", "--input", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains(":2:"), "{err}");
}

#[test]
fn kernels_report_known_values() {
    let v = stdout_json(&["prob", "--kernel", "single", "--k", "4", "--d", "0", "--ensemble", "rademacher"]);
    assert_eq!(v[0]["value"], 0.375);
    let v = stdout_json(&["prob", "--kernel", "joint", "--k", "4", "--d", "0", "--beta", "0.5", "--ensemble", "rademacher"]);
    assert_eq!(v[0]["value"], 0.15625);
}
