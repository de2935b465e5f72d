use std::path::Path;

use stochevm::pipeline::{analyze, cmd_analyze, cmd_chart, cmd_simulate, render_charts, RunConfig};
use stochevm::project::{case_study, ProjectSpec};
use stochevm::simulation::run_ensemble;
use stochevm::{ErrorKind, Execution};

const BASELINE_T: f64 = 5.0 + 549.5 / 1002.0;
const HALF_BAC: f64 = 12306.5;

fn zero_variance() -> ProjectSpec {
    let mut file = case_study().to_file();
    for a in &mut file.activities {
        a.variance = 0.0;
    }
    ProjectSpec::from_file(file).unwrap()
}

fn small_config(runs: u64, train_rows: usize) -> RunConfig {
    let mut c = RunConfig::new("case_study.json", runs, 11, vec![0.5]);
    c.selection.train_rows = train_rows;
    c.grid_nodes = 60;
    c.chart_nodes = 21;
    c
}

#[test]
fn zero_variance_project_degenerates_cleanly() {
    let spec = zero_variance();
    let cfg = small_config(50, 50);
    let a = cmd_analyze(&cfg, &spec, BASELINE_T, HALF_BAC, HALF_BAC, None, Execution::default()).unwrap();
    let r = &a.report;
    assert!(r.trust.density_degenerate);
    assert_eq!(r.p_anomaly, 0.0);
    assert!(r.trust.over_budget_fixed && r.trust.late_fixed);
    assert_eq!((r.p_overcost, r.p_delay), (0.0, 0.0));
    // the EV marker sits on the PV curve
    assert!(r.status.sv.abs() < 1e-9 * HALF_BAC, "sv = {}", r.status.sv);
    assert_eq!(r.variability.t_hi - r.variability.t_lo, 0.0);
    assert_eq!(r.variability.c_hi - r.variability.c_lo, 0.0);
    assert_eq!(r.expected_final_cost, 24613.0);
    assert_eq!(r.expected_final_duration, 13.0);
    assert_eq!(r.expected_overcost, r.expected_final_cost - r.bac);

    let off = cmd_analyze(&cfg, &spec, BASELINE_T, HALF_BAC + 500.0, HALF_BAC, None, Execution::default()).unwrap();
    assert_eq!(off.report.p_anomaly, 1.0);

    let dir = tempfile::tempdir().unwrap();
    let twin = render_charts(r, &dir.path().join("zero.svg")).unwrap();
    assert!(Path::new(&twin.files.control).exists());
}

#[test]
fn case_study_status_scores() {
    let spec = case_study();
    let cfg = small_config(4000, 200);
    let ds = run_ensemble(&spec, cfg.runs, cfg.seed, &[0.5]).unwrap();
    let rows = ds.rows_at(0.5);

    let centre = spec.evm_status(BASELINE_T, HALF_BAC, HALF_BAC).unwrap();
    let a = analyze(&spec, &rows, centre, &cfg, None, Execution::default()).unwrap();
    let r = &a.report;
    assert!(r.p_anomaly <= 0.10, "baseline p_anomaly {}", r.p_anomaly);
    for p in [r.p_anomaly, r.p_overcost, r.p_delay] {
        assert!((0.0..=1.0).contains(&p));
    }
    assert_eq!(r.expected_overcost, r.expected_final_cost - r.bac);
    assert_eq!(r.expected_delay, r.expected_final_duration - r.pd);
    assert!(r.trust.predictions_trusted());
    assert!(r.trust.in_expected_variability);
    assert_eq!(r.overlays.contours.len(), 3);
    assert_eq!(a.prediction_grid.cost.len(), 60 * 60);

    let far = spec.evm_status(BASELINE_T, 2.0 * spec.bac(), HALF_BAC).unwrap();
    let b = analyze(&spec, &rows, far, &cfg, None, Execution::default()).unwrap();
    let r = &b.report;
    assert!(r.p_anomaly >= 0.99, "far p_anomaly {}", r.p_anomaly);
    assert!(r.trust.cost_extrapolated && r.trust.duration_extrapolated);
    assert!(!r.trust.in_training_hull && !r.trust.predictions_trusted());
}

#[test]
fn reports_are_reproducible_and_cached() {
    let spec = case_study();
    let cfg = small_config(600, 100);
    let ds = run_ensemble(&spec, cfg.runs, cfg.seed, &[0.5]).unwrap();
    let rows = ds.rows_at(0.5);
    let status = spec.evm_status(5.2, 11800.0, HALF_BAC).unwrap();
    let json = |exec, cache: Option<&Path>| {
        let a = analyze(&spec, &rows, status, &cfg, cache, exec).unwrap();
        serde_json::to_string(&a.report).unwrap()
    };
    let first = json(Execution::default(), None);
    assert_eq!(first, json(Execution::Sequential, None));

    let dir = tempfile::tempdir().unwrap();
    assert_eq!(first, json(Execution::default(), Some(dir.path())));
    let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(files.len(), 1);
    assert_eq!(first, json(Execution::default(), Some(dir.path())));
}

#[test]
fn simulate_analyze_chart_round_trip() {
    let spec = case_study();
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let mut cfg = small_config(300, 60);
    cfg.ev_levels = vec![0.25, 0.5];
    cmd_simulate(&cfg, &spec, &data, Execution::default()).unwrap();
    assert!(data.join("run_config.json").exists());

    let out = dir.path().join("analysis");
    cfg.output_dir = Some(out.display().to_string());
    // the stored run count and seed win over the config's
    cfg.runs = 1;
    cfg.seed = 999;
    let a = cmd_analyze(&cfg, &spec, 5.4, 12500.0, HALF_BAC, Some(&data), Execution::default()).unwrap();
    assert_eq!((a.report.config.runs, a.report.config.seed), (300, 11));
    for f in ["report.json", "density_grid.csv", "prediction_grid.csv", "selection.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let header = std::fs::read_to_string(out.join("prediction_grid.csv")).unwrap();
    assert!(header.starts_with("t,c,expected_final_cost,expected_final_duration,extrapolated\n"));
    assert!(data.join("cache").read_dir().unwrap().count() == 1);

    let svg = dir.path().join("charts").join("control.svg");
    let twin = cmd_chart(&out.join("report.json"), &svg).unwrap();
    assert_eq!(twin.report, a.report);
    let text = std::fs::read_to_string(&svg).unwrap();
    for ann in &twin.annotations {
        assert!(text.contains(&format!("id=\"{}\"", ann.id)), "{} missing", ann.id);
    }

    // a level the directory lacks is simulated on demand
    let b = cmd_analyze(&cfg, &spec, 7.0, 17000.0, 0.6 * spec.bac(), Some(&data), Execution::default()).unwrap();
    assert!((b.report.ev_level - 0.6).abs() < 1e-12);
}

#[test]
fn analyze_rejects_bad_inputs() {
    let spec = case_study();
    let cfg = small_config(100, 50);
    for ev in [0.0, spec.bac(), -1.0, f64::NAN] {
        let e = cmd_analyze(&cfg, &spec, 5.0, 12000.0, ev, None, Execution::default()).unwrap_err();
        assert_eq!(e.kind(), ErrorKind::Validation);
    }
    let e = cmd_analyze(&cfg, &spec, -1.0, 12000.0, HALF_BAC, None, Execution::default()).unwrap_err();
    assert_eq!(e.kind(), ErrorKind::Validation);
    let missing = Path::new("/nonexistent/stochevm-data");
    let e = cmd_analyze(&cfg, &spec, 5.0, 12000.0, HALF_BAC, Some(missing), Execution::default()).unwrap_err();
    assert_eq!(e.kind(), ErrorKind::Io);

    let dir = tempfile::tempdir().unwrap();
    let mut other = case_study().to_file();
    other.activities[0].cost_rate += 1.0;
    let other = ProjectSpec::from_file(other).unwrap();
    cmd_simulate(&small_config(20, 50), &other, dir.path(), Execution::default()).unwrap();
    let e = cmd_analyze(&cfg, &spec, 5.0, 12000.0, HALF_BAC, Some(dir.path()), Execution::default()).unwrap_err();
    assert_eq!(e.kind(), ErrorKind::Validation);
}

#[test]
fn chart_rejects_non_reports() {
    let dir = tempfile::tempdir().unwrap();
    let bogus = dir.path().join("r.json");
    std::fs::write(&bogus, "{\"hello\": 1}").unwrap();
    let e = cmd_chart(&bogus, &dir.path().join("c.svg")).unwrap_err();
    assert_eq!(e.kind(), ErrorKind::Validation);
    let e = cmd_chart(&dir.path().join("absent.json"), &dir.path().join("c.svg")).unwrap_err();
    assert_eq!(e.kind(), ErrorKind::Io);
}
