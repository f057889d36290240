use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ccvar::driver::{SolveReport, Status};
use serde_json::Value;

fn ccvar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ccvar")).args(args).output().expect("run ccvar")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn solve_fixture(dir: &Path, method: &str) -> (Output, Value) {
    let report = dir.join(format!("{method}.json"));
    let out = ccvar(&[
        "solve",
        "--scenarios",
        s(&fixture("two_asset.txt")),
        "--k",
        "1",
        "--gamma",
        "1",
        "--method",
        method,
        "--report",
        s(&report),
    ]);
    let json = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    (out, json)
}

#[test]
fn two_asset_fixture_solves_to_known_value() {
    let dir = tempfile::tempdir().unwrap();
    for method in ["bcp", "bcpc", "cp", "bigm", "oracle"] {
        let (out, json) = solve_fixture(dir.path(), method);
        assert_eq!(out.status.code(), Some(0), "{method}: {}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(json["status"], "Optimal");
        assert!((json["obj"].as_f64().unwrap() - 0.3).abs() < 1e-7, "{method}: {}", json["obj"]);
        assert_eq!(json["selection"], serde_json::json!([false, true]));
        assert_eq!(json["config"]["method"], method);

        let stdout = String::from_utf8(out.stdout).unwrap();
        let fields: Vec<&str> = stdout.trim_end().split(' ').collect();
        assert_eq!(stdout.lines().count(), 1);
        assert_eq!(fields.len(), 6, "{stdout}");
        assert_eq!(fields[0], method);
        assert_eq!(fields[1], "0.300000");
        assert!(fields[2].ends_with('%'));
    }
}

#[test]
fn report_has_stable_keys_and_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let (_, json) = solve_fixture(dir.path(), "bcp");
    for key in [
        "method",
        "status",
        "obj",
        "gap_pct",
        "time_sec",
        "iterations",
        "nodes",
        "cuts",
        "selection",
        "weights",
        "var",
        "cvar",
        "expected_return",
        "config",
    ] {
        assert!(json.get(key).is_some(), "missing key {key}");
    }
    let config = &json["config"];
    assert_eq!(config["gamma"], 1.0);
    assert_eq!(config["mu_bar"], "auto");
    assert_eq!(config["beta"], 0.9);
    assert_eq!(config["eps"], 1e-5);
    assert_eq!(config["delta"], 1e-5);
    assert_eq!(config["time_limit_sec"], 3600.0);

    let report: SolveReport = serde_json::from_value(json.clone()).unwrap();
    assert_eq!(report.status, Status::Optimal);
    assert_eq!(report.params.gamma, 1.0);
    let again = serde_json::to_value(&report).unwrap();
    for (k, v) in again.as_object().unwrap() {
        assert_eq!(&json[k], v, "field {k} changed on round trip");
    }
}

#[test]
fn time_limit_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let scen = dir.path().join("s.txt");
    let out = ccvar(&["gen", "--synthetic", "10", "--scenarios", "50", "--seed", "0", "--out", s(&scen)]);
    assert!(out.status.success());
    let report = dir.path().join("r.json");
    let out = ccvar(&[
        "solve", "--scenarios", s(&scen), "--k", "3", "--method", "bcp", "--time-limit", "0.000001", "--report", s(&report),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let json: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["status"], "TimeLimit");
    assert!(json["gap_pct"].as_f64().unwrap() > 0.0);
}

#[test]
fn unreachable_return_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let out = ccvar(&[
        "solve",
        "--scenarios",
        s(&fixture("two_asset.txt")),
        "--k",
        "1",
        "--method",
        "cp",
        "--mu-bar",
        "0.5",
        "--report",
        s(&report),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let json: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["status"], "Infeasible");
    assert!(json["obj"].is_null());
}

#[test]
fn usage_errors_exit_with_one() {
    let fx = fixture("two_asset.txt");
    for args in [
        vec!["solve", "--scenarios", s(&fx), "--k", "1", "--method", "simplex", "--report", "x.json"],
        vec!["solve", "--scenarios", s(&fx), "--k", "1", "--method", "bcp", "--gamma", "lots", "--report", "x.json"],
        vec!["solve", "--scenarios", s(&fx), "--method", "bcp", "--report", "x.json"],
        vec!["frobnicate"],
    ] {
        let out = ccvar(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn parse_errors_name_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "2 2\n0.1 0.2\n0.3 oops\n").unwrap();
    let out = ccvar(&["solve", "--scenarios", s(&bad), "--k", "1", "--method", "bcp", "--report", "x.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("bad.txt") && err.contains("line 3"), "{err}");
}

#[test]
fn gen_writes_header_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let orlib = dir.path().join("one.txt");
    fs::write(&orlib, "1\n0.5 0.2\n1 1 1.0\n").unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    for out in [&a, &b] {
        let o = ccvar(&["gen", "--orlib", s(&orlib), "--scenarios", "2", "--seed", "9", "--out", s(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert!(text.starts_with("2 1\n"), "{text}");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn gen_scale_multiplies_means() {
    let dir = tempfile::tempdir().unwrap();
    let orlib = dir.path().join("one.txt");
    fs::write(&orlib, "1\n0.5 0.2\n1 1 1.0\n").unwrap();
    let out = dir.path().join("s.txt");
    let o = ccvar(&["gen", "--orlib", s(&orlib), "--scenarios", "20000", "--seed", "1", "--scale", "100", "--out", s(&out)]);
    assert!(o.status.success());
    let text = fs::read_to_string(&out).unwrap();
    let vals: Vec<f64> = text.lines().skip(1).map(|l| l.trim().parse().unwrap()).collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    // standard error is 20/√20000 ≈ 0.14
    assert!((mean - 50.0).abs() < 0.6, "mean {mean}");
}

#[test]
fn bench_writes_one_row_per_cell_and_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.toml");
    fs::write(
        &cfg,
        r#"
[grid]
methods = ["bcp", "cp"]
scenarios = [100, 300]
k = [3]

[[instance]]
name = "syn8"
synthetic = 8
seed = 3
"#,
    )
    .unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = ccvar(&["bench", "--config", s(&cfg), "--out", s(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let mut rdr = csv::Reader::from_path(&out).unwrap();
        let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
        assert_eq!(header.join(","), "instance,method,S,k,gamma,obj,gap_pct,time_sec,nodes,cuts,status");
        let mut rows: Vec<Vec<String>> =
            rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
        rows.sort();
        rows
    };
    let first = run("a.csv");
    assert_eq!(first.len(), 4);
    assert!(first.iter().all(|r| r[10] == "Optimal"));
    let second = run("b.csv");
    let objs = |rows: &[Vec<String>]| rows.iter().map(|r| (r[1].clone(), r[2].clone(), r[5].clone())).collect::<Vec<_>>();
    assert_eq!(objs(&first), objs(&second));
}

#[test]
fn bench_records_failures_without_stopping() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.toml");
    fs::write(
        &cfg,
        format!(
            r#"
[grid]
methods = ["bcp"]
k = [1, 5]
gamma = [1.0]

[[instance]]
name = "fixture"
scenarios = "{}"
"#,
            s(&fixture("two_asset.txt"))
        ),
    )
    .unwrap();
    let out = dir.path().join("o.csv");
    let o = ccvar(&["bench", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success());
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    let mut rows: Vec<Vec<String>> = rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    rows.sort_by(|a, b| a[3].cmp(&b[3]));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][10], "Optimal");
    assert_eq!(rows[1][10], "Error");
}
