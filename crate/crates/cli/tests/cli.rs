use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CASE_STUDY: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/case_study.json");

fn stochevm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stochevm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn simulate(dir: &Path, runs: &str, seed: &str, extra: &[&str]) -> Output {
    let dir = dir.to_str().unwrap();
    let mut args = vec![
        "simulate", "--project", CASE_STUDY, "--runs", runs, "--seed", seed, "--ev-levels", "0.25,0.5",
        "--out", dir,
    ];
    args.extend_from_slice(extra);
    stochevm(&args)
}

fn triad_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    files
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn single_run_gives_one_row_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(dir.path(), "1", "7", &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let files = triad_files(dir.path());
    assert_eq!(files.len(), 2);
    for f in files {
        let text = std::fs::read_to_string(&f).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "run,ev_level,t,c,final_t,final_c,over_budget,late");
        assert_eq!(lines.len(), 2, "{}", f.display());
    }
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn identical_configs_write_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(code(&simulate(a.path(), "500", "42", &[])), 0);
    assert_eq!(code(&simulate(b.path(), "500", "42", &["--sequential"])), 0);
    let (fa, fb) = (triad_files(a.path()), triad_files(b.path()));
    assert_eq!(fa.len(), fb.len());
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{}", x.display());
    }
}

#[test]
fn validation_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cyclic = write(
        dir.path(),
        "cyclic.json",
        r#"{"activities": [
            {"id": "A", "mean_duration": 1, "variance": 0, "cost_rate": 1},
            {"id": "B", "mean_duration": 1, "variance": 0, "cost_rate": 1}],
           "edges": [["A", "B"], ["B", "A"]]}"#,
    );
    let garbled = write(dir.path(), "garbled.json", "{ not json");
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    for args in [
        vec!["simulate", "--project", &cyclic, "--runs", "5", "--seed", "1", "--out", out],
        vec!["simulate", "--project", &garbled, "--runs", "5", "--seed", "1", "--out", out],
        vec!["simulate", "--project", CASE_STUDY, "--runs", "0", "--seed", "1", "--out", out],
        vec!["simulate", "--project", CASE_STUDY, "--runs", "5", "--seed", "1", "--ev-levels", "1.5", "--out", out],
        vec!["simulate", "--project", CASE_STUDY, "--runs", "5"],
        vec!["analyze", "--project", CASE_STUDY, "--at", "5", "--ac", "100", "--ev", "30000", "--out", out],
        vec!["frobnicate"],
    ] {
        let result = stochevm(&args);
        assert_eq!(code(&result), 1, "{args:?}: {}", String::from_utf8_lossy(&result.stderr));
    }
    assert_eq!(code(&stochevm(&["--help"])), 0);
}

#[test]
fn io_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.json");
    let missing = missing.to_str().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let blocker = write(dir.path(), "blocker", "a file, not a directory");
    let nested = format!("{blocker}/sub");
    for args in [
        vec!["simulate", "--project", missing, "--runs", "5", "--seed", "1", "--out", out],
        vec!["simulate", "--project", CASE_STUDY, "--runs", "5", "--seed", "1", "--out", &nested],
        vec!["chart", "--report", missing, "--out", out],
        vec!["analyze", "--project", CASE_STUDY, "--at", "5", "--ac", "12000", "--ev", "12306.5", "--data", missing],
    ] {
        let result = stochevm(&args);
        assert_eq!(code(&result), 2, "{args:?}: {}", String::from_utf8_lossy(&result.stderr));
    }
}

#[test]
fn hopeless_sampling_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let project = write(
        dir.path(),
        "hopeless.json",
        r#"{"activities": [{"id": "H", "mean_duration": 1e-12, "variance": 1e-30, "cost_rate": 1}]}"#,
    );
    let out = dir.path().join("out");
    let result = stochevm(&["simulate", "--project", &project, "--runs", "3", "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&result), 3, "{}", String::from_utf8_lossy(&result.stderr));
}

#[test]
fn simulate_analyze_chart() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_eq!(code(&simulate(&data, "400", "3", &[])), 0);
    let analysis = dir.path().join("analysis");
    let result = stochevm(&[
        "analyze",
        "--project",
        CASE_STUDY,
        "--at",
        "5.6",
        "--ac",
        "12600",
        "--ev",
        "12306.5",
        "--data",
        data.to_str().unwrap(),
        "--train-rows",
        "100",
        "--out",
        analysis.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 0, "{}", String::from_utf8_lossy(&result.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&result.stdout).unwrap();
    assert_eq!(summary["config"]["runs"], 400);
    assert!(summary.get("overlays").is_none());
    for key in ["p_anomaly", "p_overcost", "p_delay"] {
        let p = summary[key].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p), "{key} = {p}");
    }
    for f in ["report.json", "density_grid.csv", "prediction_grid.csv", "selection.json"] {
        assert!(analysis.join(f).exists(), "{f}");
    }

    let svg = dir.path().join("control.svg");
    let result = stochevm(&[
        "chart",
        "--report",
        analysis.join("report.json").to_str().unwrap(),
        "--out",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 0, "{}", String::from_utf8_lossy(&result.stderr));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg"));
    for id in ["p-anomaly-cost", "p-overcost", "expected-overcost", "p-delay", "expected-delay"] {
        assert!(text.contains(&format!("id=\"{id}\"")), "{id}");
    }
    assert!(dir.path().join("control.json").exists());
}
