use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn wavecert(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavecert")).args(args).current_dir(dir).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn davies_gaffney_on_cycle_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = wavecert(&["check", "run", "davies_gaffney", "--model", "cycle:64", "--out", "out"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = dir.path().join("out");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("davies_gaffney.json")).unwrap()).unwrap();
    assert_eq!(report["check_name"], "davies_gaffney");
    assert_eq!(report["pass"], true);
    assert!(report["runtime_ms"].is_null());
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    assert!(summary.lines().nth(1).unwrap().starts_with("davies_gaffney,true,"));
    assert!(out.join("davies_gaffney.csv").exists());
    assert!(out.join("metadata.json").exists());
    let resolved = fs::read_to_string(out.join("config.resolved.toml")).unwrap();
    assert!(resolved.contains("constant = 2.0"));
}

#[test]
fn failing_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = wavecert(&["check", "run", "davies_gaffney", "--model", "cycle:32", "--param", "constant=1e-9", "--out", "o"], dir.path());
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("FAIL davies_gaffney"));
}

#[test]
fn configuration_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = wavecert(&["check", "run", "davies_gaffny", "--model", "cycle:8"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("valid checks are") && stderr(&o).contains("davies_gaffney"));

    fs::write(dir.path().join("empty.toml"), "version = 1\n[model]\nbuiltin = \"cycle:8\"\n").unwrap();
    let o = wavecert(&["suite", "run", "--config", "empty.toml"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("no checks selected"));

    let o = wavecert(&["check", "run", "davies_gaffney", "--model", "missing/model.toml"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("does not exist"));

    fs::write(
        dir.path().join("split.toml"),
        "version = 1\n[space]\nmeasures = [1.0, 1.0, 1.0, 1.0]\nedges = [{ a = 0, b = 1, length = 1.0 }, { a = 2, b = 3, length = 1.0 }]\n",
    )
    .unwrap();
    let o = wavecert(&["model", "validate", "split.toml"], dir.path());
    assert_eq!(code(&o), 2);
    let o = wavecert(&["check", "run", "subordination", "--model", "./split.toml"], dir.path());
    assert_eq!(code(&o), 2, "{}", stderr(&o));

    let o = wavecert(&["check", "run", "subordination", "--model", "cycle:8", "--param", "nodez=3"], dir.path());
    assert_eq!(code(&o), 2);
    fs::write(dir.path().join("bad.toml"), "version = 1\ncolour = 1\n[model]\nbuiltin = \"cycle:8\"\n[[checks]]\nname = \"subordination\"\n").unwrap();
    assert_eq!(code(&wavecert(&["suite", "run", "--config", "bad.toml"], dir.path())), 2);
    fs::write(dir.path().join("v2.toml"), "version = 2\n[model]\nbuiltin = \"cycle:8\"\n[[checks]]\nname = \"subordination\"\n").unwrap();
    assert_eq!(code(&wavecert(&["suite", "run", "--config", "v2.toml"], dir.path())), 2);
    let o = wavecert(&["check", "run", "subordination", "--model", "cycle:5000"], dir.path());
    assert_eq!(code(&o), 2);
}

const SUITE: &str = r#"version = 1
seed = 3

[model]
builtin = "magnetic_cycle:32"

[[checks]]
name = "domination"

[[checks]]
name = "subordination"

[[checks]]
name = "davies_gaffney"
[checks.params]
rho = [2.0, 4.0]

[[checks]]
name = "energy_decay"

[[checks]]
name = "cz_decomposition"
[checks.params]
trials = 10
"#;

fn suite_outputs(dir: &Path, out: &str, jobs: &str) -> Vec<(String, Vec<u8>)> {
    let o = wavecert(&["suite", "run", "--config", "suite.toml", "--out", out, "--jobs", jobs], dir);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir.join(out))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "metadata.json" && p.file_name().unwrap() != "config.resolved.toml")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn outputs_are_byte_identical_across_runs_and_jobs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("suite.toml"), SUITE).unwrap();
    let a = suite_outputs(dir.path(), "a", "1");
    let b = suite_outputs(dir.path(), "b", "1");
    let c = suite_outputs(dir.path(), "c", "4");
    assert_eq!(a.iter().filter(|(n, _)| n.ends_with(".json")).count(), 5);
    assert_eq!(a, b);
    assert_eq!(a, c);
    let summary = wavecert(&["report", "summarize", "a"], dir.path());
    assert_eq!(code(&summary), 0);
    assert_eq!(String::from_utf8_lossy(&summary.stdout).lines().count(), 5);
}

#[test]
fn seed_changes_random_trials() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, out: &str| {
        let o = wavecert(&["check", "run", "cz_decomposition", "--model", "cycle:16", "--param", "trials=5", "--seed", seed, "--out", out], dir.path());
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        fs::read_to_string(dir.path().join(out).join("cz_decomposition.json")).unwrap()
    };
    assert_eq!(run("1", "x"), run("1", "y"));
    assert_ne!(run("1", "x"), run("2", "z"));
}

#[test]
fn tolerance_scale_widens_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["check", "run", "davies_gaffney", "--model", "cycle:32", "--param", "constant=0.5"];
    assert_eq!(code(&wavecert(&[&args[..], &["--out", "a"]].concat(), dir.path())), 1);
    assert_eq!(code(&wavecert(&[&args[..], &["--out", "b", "--tolerance-scale", "10"]].concat(), dir.path())), 0);
    assert_eq!(code(&wavecert(&[&args[..], &["--out", "c", "--tolerance-scale", "0"]].concat(), dir.path())), 2);
}

#[test]
fn hodge_and_model_commands() {
    let dir = tempfile::tempdir().unwrap();
    let o = wavecert(&["check", "run", "hodge_commutation", "--model", "k3", "--out", "h"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = wavecert(&["model", "validate", "cycle:16"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("points      16"));
    let list = wavecert(&["check", "list"], dir.path());
    assert_eq!(String::from_utf8_lossy(&list.stdout).lines().count(), 19);
    assert_eq!(code(&wavecert(&["report", "summarize", "nowhere"], dir.path())), 2);
}
