use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn conebvp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conebvp")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn corpus_toml(name: &str) -> String {
    let out = conebvp(&["corpus", "--corpus", name, "--format", "csv"]);
    assert_eq!(code(&out), 0);
    String::from_utf8(out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn corpus_listing_names_every_entry() {
    let out = conebvp(&["corpus"]);
    assert_eq!(code(&out), 0);
    let names: Vec<String> = String::from_utf8(out.stdout).unwrap().lines().map(String::from).collect();
    assert_eq!(names.len(), 10);
    assert!(names.iter().any(|n| n == "F2-thm5.8"));
}

#[test]
fn check_exit_codes() {
    let out = conebvp(&["check", "--corpus", "F1-thm5.7"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["hypotheses_pass"], Value::Bool(true));

    let dir = tempfile::tempdir().unwrap();
    let text = corpus_toml("F2-thm5.8").replace("p = \"1/2\"", "p = \"0.6\"");
    let path = write(dir.path(), "perturbed.toml", &text);
    let out = conebvp(&["check", "--config", &path]);
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("FAIL Thm6.b"), "{err}");
    assert!(!err.contains("Thm6.a") && !err.contains("Thm6.c"), "{err}");
}

#[test]
fn malformed_configs_exit_with_code_three_and_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("order.toml", corpus_toml("F1-B0").replace("n = 2", "n = 3"), "problem.n"),
        ("threshold.toml", corpus_toml("F1-B0").replace("q = \"7/2\"", "q = \"-1\""), "thresholds.q"),
        ("unknown.toml", corpus_toml("F1-B0").replace("[check]", "[check]\nfoo = 1"), "foo"),
        ("syntax.toml", "[problem\nn = 2".to_string(), "line 1"),
    ];
    for (file, text, needle) in cases {
        let path = write(dir.path(), file, &text);
        let out = conebvp(&["check", "--config", &path]);
        assert_eq!(code(&out), 3, "{file}: {}", stderr(&out));
        assert!(stderr(&out).contains(needle), "{file}: {}", stderr(&out));
    }
    assert_eq!(code(&conebvp(&["check", "--corpus", "nope"])), 3);
    assert_eq!(code(&conebvp(&["check"])), 3);
    assert_eq!(code(&conebvp(&["solve", "--bogus"])), 3);
    assert_eq!(code(&conebvp(&["--help"])), 0);
}

#[test]
fn envelope_csv_has_one_row_per_lattice_point() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("env");
    let out = conebvp(&["envelope", "--corpus", "F1-B0", "--grid", "101", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let mut reader = csv::Reader::from_path(out_dir.join("envelope.csv")).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["t", "s", "u_tilde", "k1", "k2"]);
    let rows: Vec<Vec<f64>> =
        reader.records().map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 101 * 101);
    for row in rows.iter().filter(|r| r[0] > 0.0 && r[0] < 1.0) {
        assert!(row[3] <= row[2] + 1e-12 && row[2] <= row[4] + 1e-12, "{row:?}");
    }
    assert!(out_dir.join("report.json").exists());
}

#[test]
fn constants_csv_lists_named_values() {
    let out = conebvp(&["constants", "--corpus", "F1-B0", "--format", "csv"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let int_phi: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("int_phi,"))
        .expect("int_phi row")
        .parse()
        .unwrap();
    assert!((int_phi - 1.0 / 6.0).abs() < 1e-12);
}

#[test]
fn solve_writes_report_and_solution_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("solve");
    let out = conebvp(&["solve", "--corpus", "fourth-thm6", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["exit_code"], 0);
    assert_eq!(report["certificate"]["verdict"], "pass");
    let solutions = report["solve"]["solutions"].as_array().unwrap();
    assert_eq!(solutions.len(), 3);
    for i in 0..3 {
        let mut reader = csv::Reader::from_path(out_dir.join(format!("solution_{i}.csv"))).unwrap();
        assert_eq!(reader.headers().unwrap(), vec!["t", "u"]);
        let gamma = solutions[i]["gamma"].as_f64().unwrap();
        let max = reader
            .records()
            .map(|r| r.unwrap()[1].parse::<f64>().unwrap())
            .fold(0.0, f64::max);
        assert!(max <= gamma * (1.0 + 1e-12) + 1e-300 && max >= 0.99 * gamma, "{max} vs {gamma}");
    }
}

#[test]
fn zero_nonlinearity_fails_the_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
        name = "zero"
        [problem]
        n = 2
        k = 1
        B = 0
        [[nonlinearity.branches]]
        expr = "0"
        [thresholds]
        theorem = "thm5"
        p = 0.1
        q = 1
        r = 10
        [solver]
        nodes = 64
        seeds = 4
    "#;
    let path = write(dir.path(), "zero.toml", text);
    let out = conebvp(&["solve", "--config", &path]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["certificate"]["verdict"], "fail");
    assert_eq!(report["solve"]["solutions"].as_array().unwrap().len(), 1);
}

#[test]
fn report_echoes_a_config_that_reloads_identically() {
    let dir = tempfile::tempdir().unwrap();
    let out = conebvp(&["check", "--corpus", "fourth-thm5"]);
    assert_eq!(code(&out), 0);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let path = write(dir.path(), "echo.json", &serde_json::to_string(&report["config"]).unwrap());
    let again = conebvp(&["check", "--config", &path]);
    assert_eq!(code(&again), 0, "{}", stderr(&again));
    let second: Value = serde_json::from_slice(&again.stdout).unwrap();
    assert_eq!(second["config"], report["config"]);
    assert_eq!(second["constants"], report["constants"]);
}
