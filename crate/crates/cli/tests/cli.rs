//! End-to-end runs of the installed binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BRANCHY: &str = "def classify(n: Int) -> Str:\n    if n < 0:\n        return \"neg\"\n    if n == 0:\n        return \"zero\"\n    return \"pos\"\n";

fn sbgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbgen"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_module(dir: &Path, name: &str, source: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, source).unwrap();
    path
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn generate_writes_suite_and_reports() {
    let tmp = TempDir::new().unwrap();
    let module = write_module(tmp.path(), "classify.mdyn", BRANCHY);
    let out = tmp.path().join("out");
    let output = sbgen(&[
        "generate",
        "--module", module.to_str().unwrap(),
        "--algorithm", "dynamosa",
        "--seed", "3",
        "--budget-s", "1",
        "--assertions",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "stderr: {}", stderr_of(&output));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("classify: coverage"), "stdout: {stdout}");
    assert!(stdout.contains("mutation score"), "stdout: {stdout}");

    let tests = fs::read_to_string(out.join("tests.mdyn")).unwrap();
    assert!(tests.contains("def test_case_0():"));
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.starts_with("module,config,seed,coverage,callables,goals,tests,mutation_score,elapsed_s\n"));
    assert!(report.lines().nth(1).unwrap().starts_with("classify,dynamosa-hints,3,"));
    assert!(out.join("timeseries.csv").is_file());
}

#[test]
fn generate_replays_byte_identically() {
    let tmp = TempDir::new().unwrap();
    let module = write_module(tmp.path(), "classify.mdyn", BRANCHY);
    let dirs = [tmp.path().join("a"), tmp.path().join("b")];
    for out in &dirs {
        let output = sbgen(&[
            "generate",
            "--module", module.to_str().unwrap(),
            "--algorithm", "mosa",
            "--seed", "11",
            "--budget-s", "1",
            "--out", out.to_str().unwrap(),
        ]);
        assert!(output.status.success(), "stderr: {}", stderr_of(&output));
    }
    for name in ["tests.mdyn", "report.csv", "timeseries.csv"] {
        assert_eq!(
            fs::read(dirs[0].join(name)).unwrap(),
            fs::read(dirs[1].join(name)).unwrap(),
            "{name} differs between replays",
        );
    }
}

#[test]
fn compile_failure_exits_one_with_a_diagnostic() {
    let tmp = TempDir::new().unwrap();
    let module = write_module(tmp.path(), "broken.mdyn", "def f(:\n");
    let output = sbgen(&[
        "generate",
        "--module", module.to_str().unwrap(),
        "--algorithm", "random",
        "--seed", "0",
        "--budget-s", "1",
        "--out", tmp.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    let stderr = stderr_of(&output);
    assert!(stderr.contains("line"), "stderr: {stderr}");
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn unknown_algorithm_is_rejected_by_name() {
    let tmp = TempDir::new().unwrap();
    let module = write_module(tmp.path(), "classify.mdyn", BRANCHY);
    let output = sbgen(&[
        "generate",
        "--module", module.to_str().unwrap(),
        "--algorithm", "anneal",
        "--seed", "0",
        "--budget-s", "1",
        "--out", tmp.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    let stderr = stderr_of(&output);
    assert!(stderr.contains("unknown algorithm `anneal`"), "stderr: {stderr}");
    assert!(stderr.contains("dynamosa"), "stderr: {stderr}");
}

#[test]
fn missing_setting_names_the_flag_and_the_file() {
    let output = sbgen(&["generate", "--algorithm", "random"]);
    assert_eq!(output.status.code(), Some(1));
    let stderr = stderr_of(&output);
    assert!(stderr.contains("missing required setting `module`"), "stderr: {stderr}");
    assert!(stderr.contains("config file"), "stderr: {stderr}");
}

#[test]
fn config_file_fills_flags_and_the_command_line_wins() {
    let tmp = TempDir::new().unwrap();
    let module = write_module(tmp.path(), "classify.mdyn", BRANCHY);
    let config = tmp.path().join("run.conf");
    fs::write(
        &config,
        format!(
            "# run defaults\nmodule = {}\nalgorithm = random\nseed = 1\nbudget-s = 1\nout = {}\n",
            module.display(),
            tmp.path().join("from-file").display(),
        ),
    )
    .unwrap();

    let output = sbgen(&["generate", "--config", config.to_str().unwrap()]);
    assert!(output.status.success(), "stderr: {}", stderr_of(&output));
    let report = fs::read_to_string(tmp.path().join("from-file").join("report.csv")).unwrap();
    assert!(report.lines().nth(1).unwrap().starts_with("classify,random-hints,1,"));

    let out = tmp.path().join("overridden");
    let output = sbgen(&[
        "generate",
        "--config", config.to_str().unwrap(),
        "--seed", "2",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "stderr: {}", stderr_of(&output));
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.lines().nth(1).unwrap().starts_with("classify,random-hints,2,"));
}

#[test]
fn experiment_runs_the_grid_and_summarizes() {
    let tmp = TempDir::new().unwrap();
    let corpus = tmp.path().join("corpus");
    fs::create_dir_all(corpus.join("demo")).unwrap();
    write_module(&corpus.join("demo"), "classify.mdyn", BRANCHY);
    let out = tmp.path().join("out");
    let output = Command::new(env!("CARGO_BIN_EXE_sbgen"))
        .args([
            "experiment",
            "--corpus", corpus.to_str().unwrap(),
            "--algorithms", "random,dynamosa",
            "--seeds", "2",
            "--budget-s", "1",
            "--hints", "on",
            "--out", out.to_str().unwrap(),
        ])
        .env("SBGEN_WORKERS", "2")
        .output()
        .expect("binary runs");
    assert!(output.status.success(), "stderr: {}", stderr_of(&output));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("4 runs completed, 0 excluded"), "stdout: {stdout}");

    for config in ["random-hints", "dynamosa-hints"] {
        for seed in ["0", "1"] {
            let dir = out.join("demo.classify").join(config).join(seed);
            assert!(dir.join("tests.mdyn").is_file(), "missing run dir {config}/{seed}");
        }
    }
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("config,runs,excluded,"));
    assert_eq!(summary.lines().count(), 3);
    let comparisons = fs::read_to_string(out.join("comparisons.csv")).unwrap();
    assert_eq!(comparisons.lines().count(), 2);
    assert!(comparisons.lines().nth(1).unwrap().starts_with("overall,random-hints,dynamosa-hints,"));
}
