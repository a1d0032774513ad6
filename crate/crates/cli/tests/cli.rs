use std::fs;
use std::process::{Command, Output};

use psqf_cli::commands::{CompareRow, CountRow, SeriesRow};
use psqf_cli::output::{read_csv, read_json, schema_comment, write_rows};
use psqf_cli::Format;

fn psqf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psqf"))
        .args(args)
        .env_remove(psqf_cli::WINDOW_BYTES_ENV)
        .output()
        .expect("binary runs")
}

fn psqf_env(args: &[&str], window_bytes: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psqf"))
        .args(args)
        .env(psqf_cli::WINDOW_BYTES_ENV, window_bytes)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn rows_round_trip_through_both_formats() {
    let rows = vec![
        CompareRow {
            n: 1000,
            q: 3,
            a: 1,
            r_weighted: 123.456789012345,
            r_unweighted: 40,
            series: 0.3,
            tail_bound: 2e-12,
            vanished: false,
            ratio: Some(1.0 / 3.0),
        },
        CompareRow {
            n: 1000,
            q: 4,
            a: 1,
            r_weighted: 0.0,
            r_unweighted: 0,
            series: 0.0,
            tail_bound: 2e-12,
            vanished: true,
            ratio: None,
        },
    ];
    let mut csv = Vec::new();
    write_rows(&rows, "compare", Format::Csv, &mut csv).unwrap();
    let text = String::from_utf8(csv.clone()).unwrap();
    assert!(text.starts_with(&schema_comment("compare")));
    let back: Vec<CompareRow> = read_csv(csv.as_slice()).unwrap();
    assert_eq!(back, rows);

    let mut json = Vec::new();
    write_rows(&rows, "compare", Format::Json, &mut json).unwrap();
    let back: Vec<CompareRow> = read_json(json.as_slice()).unwrap();
    assert_eq!(back, rows);
}

#[test]
fn binary_outputs_agree_across_formats() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("c.csv");
    let json = dir.path().join("c.json");
    let base = [
        "compare",
        "--n",
        "20000,20001",
        "--q-max",
        "6",
        "--p-cutoff",
        "10000",
    ];
    for (path, fmt) in [(&csv, "csv"), (&json, "json")] {
        let mut args = base.to_vec();
        args.extend(["--format", fmt, "--out", path.to_str().unwrap()]);
        let o = psqf(&args);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let a: Vec<CompareRow> = read_csv(fs::File::open(&csv).unwrap()).unwrap();
    let b: Vec<CompareRow> = read_json(fs::File::open(&json).unwrap()).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().any(|r| r.vanished));
    assert!(a.iter().filter(|r| r.vanished).all(|r| r.r_unweighted == 0));
}

#[test]
fn count_is_deterministic_across_threads_and_windows() {
    let args = ["count", "--n", "2000003", "--q", "7"];
    let reference = psqf(&args);
    assert_eq!(code(&reference), 0);
    for threads in ["1", "2", "5"] {
        for window in ["4096", "65536", "10000000"] {
            let mut a = vec!["--threads", threads];
            a.extend(args);
            let o = psqf_env(&a, window);
            assert_eq!(code(&o), 0, "{}", stderr(&o));
            assert_eq!(
                o.stdout, reference.stdout,
                "threads {threads}, window {window}"
            );
        }
    }
    let rows: Vec<CountRow> = read_csv(reference.stdout.as_slice()).unwrap();
    assert_eq!(rows.len(), 6);
    let single = psqf(&[
        "count", "--n", "2000003", "--q", "7", "--a", "3", "--format", "json",
    ]);
    let one: Vec<CountRow> = read_json(single.stdout.as_slice()).unwrap();
    assert_eq!(one[0], rows[2]);
}

#[test]
fn series_forms_agree() {
    let o = psqf(&[
        "series",
        "--n",
        "123456",
        "--a",
        "5",
        "--q",
        "12",
        "--p-cutoff",
        "100000",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows: Vec<SeriesRow> = read_csv(o.stdout.as_slice()).unwrap();
    assert!(rows[0].agree && !rows[0].vanished);
    // 4 | q and 4 | N - a: no admissible residue
    let o = psqf(&[
        "series", "--n", "1001", "--a", "1", "--q", "4", "--format", "json",
    ]);
    let rows: Vec<SeriesRow> = read_json(o.stdout.as_slice()).unwrap();
    assert!(rows[0].vanished && rows[0].value == 0.0 && rows[0].eulerform_value == 0.0);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&psqf(&["count", "--n", "100", "--bogus"])), 2);
    assert_eq!(code(&psqf(&["frobnicate"])), 2);
    let o = psqf(&["count", "--n", "100", "--q", "4", "--a", "2"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("not coprime"));
    assert_eq!(code(&psqf(&["--threads", "0", "series", "--n", "10"])), 2);
    assert_eq!(code(&psqf(&["estimate", "--n", "1000", "--q1", "0"])), 2);
}

#[test]
fn capacity_errors_exit_3() {
    let o = psqf(&["estimate", "--n", "20000000"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("capacity"));
    let o = psqf(&["estimate", "--n", "5000", "--max-materialize", "1000"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn corrupted_t_fails_and_names_the_identity() {
    let o = psqf(&[
        "verify",
        "--suite",
        "local",
        "--q-max",
        "30",
        "--q-small-max",
        "12",
        "--q-average-max",
        "12",
        "--qprime-max",
        "3",
        "--n",
        "60",
        "--corrupt",
        "t-sign",
    ]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("FAIL gamma_star_closed_form"));
    assert!(stderr(&o).contains("gamma_star_closed_form"));
}

#[test]
fn clean_verify_passes_and_writes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.csv");
    let o = psqf(&[
        "verify",
        "--suite",
        "arith",
        "--r-max",
        "40",
        "--a-max",
        "60",
        "--mn-max",
        "30",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# psqf verify v1"));
    assert!(!text.contains(",false,"));
}

#[test]
fn estimate_reports_ratios_and_breakdown() {
    let o = psqf(&[
        "estimate",
        "--n",
        "20000",
        "--p-cutoff",
        "20000",
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let row = &v[0];
    assert!(row["within_tolerance"].as_bool().unwrap());
    assert!(row["defect_f"].as_f64().unwrap() >= 0.0);

    let o = psqf(&[
        "estimate",
        "--n",
        "20000",
        "--p-cutoff",
        "20000",
        "--breakdown",
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), row["moduli"].as_u64().unwrap() as usize);
    let total: f64 = rows
        .iter()
        .map(|r| r["contribution"].as_f64().unwrap())
        .sum();
    let est = row["estimate"].as_f64().unwrap();
    assert!((total - est).abs() <= 1e-9 * est);
}

#[test]
fn selftest_passes() {
    let o = psqf(&[
        "sieve-selftest",
        "--len",
        "20000",
        "--density-len",
        "200000",
        "--density-tolerance",
        "0.005",
    ]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}
