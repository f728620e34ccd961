use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_conviction"));
    c.env_remove("CONVICTION_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write_data(dir: &Path, missing: bool) -> PathBuf {
    let mut text = String::from("x,y,colour\n");
    for i in 0..30 {
        let x = i as f64 * 0.37;
        let y = if missing && i % 6 == 2 {
            String::new()
        } else {
            format!("{}", 2.0 * x + ((i * 7) % 5) as f64 * 0.1)
        };
        let colour = if x < 5.0 { "red" } else { "blue" };
        text.push_str(&format!("{x},{y},{colour}\n"));
    }
    let path = dir.join(if missing { "gaps.csv" } else { "data.csv" });
    std::fs::write(&path, text).unwrap();
    path
}

fn ingest(dir: &TempDir, missing: bool) -> PathBuf {
    let data = write_data(dir.path(), missing);
    let snap = dir.path().join(if missing { "gaps.snap" } else { "model.snap" });
    let o = run(&["--seed", "1", "ingest", data.to_str().unwrap(), "-o", snap.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    snap
}

fn invocation(o: &Output) -> Vec<String> {
    let line = stderr(o)
        .lines()
        .find_map(|l| l.strip_prefix("invocation: ").map(str::to_string))
        .expect("invocation echoed");
    line.split_whitespace().skip(1).map(str::to_string).collect()
}

#[test]
fn react_with_unknown_feature_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let snap = ingest(&dir, false);
    let o = run(&["--seed", "1", "react", snap.to_str().unwrap(), "--context", "height=3", "--action", "y"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("height"));
}

#[test]
fn react_predicts_and_explains() {
    let dir = TempDir::new().unwrap();
    let snap = ingest(&dir, false);
    let s = snap.to_str().unwrap();
    let o = run(&["--seed", "1", "react", s, "--context", "x=2", "--action", "y,colour"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("colour=red"));
    let y: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("y="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((y - 4.2).abs() < 1.0, "{y}");
    let o = run(&["--seed", "1", "react", s, "--context", "x=2", "--action", "y", "--explain"]);
    assert!(o.status.success());
    for section in ["[context]", "[decision]", "[neighbors]", "[counterfactuals]", "[archetype]"] {
        assert!(stdout(&o).contains(section), "missing {section}");
    }
}

#[test]
fn compare_with_itself_is_symmetric() {
    let dir = TempDir::new().unwrap();
    let snap = ingest(&dir, false);
    let s = snap.to_str().unwrap();
    let o = run(&["--seed", "1", "compare", s, s]);
    assert!(o.status.success(), "{}", stderr(&o));
    let values: Vec<String> = stdout(&o)
        .lines()
        .map(|l| l.rsplit(": ").next().unwrap().to_string())
        .collect();
    assert_eq!(values.len(), 2);
    assert_eq!(values[0], values[1]);
}

#[test]
fn synth_defaults_and_reproducibility() {
    let dir = TempDir::new().unwrap();
    let snap = ingest(&dir, false);
    let first = run(&["synth", snap.to_str().unwrap(), "--count", "5"]);
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(stderr(&first).lines().any(|l| l.starts_with("seed: ")));
    let args = invocation(&first);
    let joined = args.join(" ");
    assert!(joined.contains("--conviction 1"), "{joined}");
    assert!(joined.contains("--order random"), "{joined}");
    let again = bin().args(&args).output().unwrap();
    assert!(again.status.success());
    assert_eq!(stdout(&first), stdout(&again));
    assert_eq!(stdout(&first).lines().count(), 6);
}

#[test]
fn threads_come_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let snap = ingest(&dir, false);
    let o = bin()
        .env("CONVICTION_THREADS", "3")
        .args(["--seed", "2", "analyze", snap.to_str().unwrap(), "--per-case"])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(invocation(&o).join(" ").contains("--threads 3"));
    assert!(stdout(&o).starts_with("expected_information,"));
}

#[test]
fn impute_fills_every_gap() {
    let dir = TempDir::new().unwrap();
    let snap = ingest(&dir, true);
    let out = dir.path().join("filled.snap");
    let o = run(&["--seed", "1", "impute", snap.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 1 + 5);
    let o = run(&["--seed", "1", "impute", out.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[test]
fn reduce_caps_cases_and_rejects_impossible_targets() {
    let dir = TempDir::new().unwrap();
    let snap = ingest(&dir, false);
    let out = dir.path().join("small.snap");
    let s = snap.to_str().unwrap();
    let o = run(&["--seed", "1", "reduce", s, "--cap", "20", "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("30 -> 20 cases"));
    let o = run(&["--seed", "1", "reduce", s, "--cap", "4", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn damaged_snapshots_are_corruption_errors() {
    let dir = TempDir::new().unwrap();
    let snap = ingest(&dir, false);
    let bytes = std::fs::read(&snap).unwrap();
    let cut = dir.path().join("cut.snap");
    std::fs::write(&cut, &bytes[..bytes.len() / 2]).unwrap();
    let o = run(&["--seed", "1", "analyze", cut.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn malformed_data_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("bad.csv");
    std::fs::write(&data, "a,b\n1,2\n3\n").unwrap();
    let out = dir.path().join("bad.snap");
    let o = run(&["--seed", "1", "ingest", data.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!out.exists());
}

#[test]
fn eval_runs_on_a_suite_directory() {
    let dir = TempDir::new().unwrap();
    for name in ["one", "two"] {
        write_data(dir.path(), false);
        std::fs::rename(dir.path().join("data.csv"), dir.path().join(format!("{name}.csv"))).unwrap();
    }
    let o = run(&[
        "--seed",
        "5",
        "eval",
        "--suite",
        dir.path().to_str().unwrap(),
        "--configs",
        "classic,p=1:mode=none",
        "--folds",
        "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("classic"));
    assert!(out.contains("dataset,task,configuration"));
    assert!(out.contains("one,classification,classic"));
}

#[test]
fn audit_bundle_matches_live_explanation() {
    let dir = TempDir::new().unwrap();
    let snap = ingest(&dir, false);
    let s = snap.to_str().unwrap();
    let live = run(&["--seed", "1", "react", s, "--context", "x=4.1", "--action", "y", "--explain"]);
    let audit = run(&["--seed", "1", "explain", "--audit", s, "--context", "x=4.1", "--action", "y"]);
    assert!(live.status.success() && audit.status.success(), "{}", stderr(&audit));
    assert_eq!(stdout(&live), stdout(&audit));
    let nearest = run(&["--seed", "1", "explain", s, "--context", "x=4.1", "--action", "y", "--cf-rank", "nearest"]);
    assert!(nearest.status.success());
    assert!(stdout(&nearest).contains("[counterfactuals]"));
}
