use std::io::Write;
use std::path::Path;

use crate::classify::{
    decision_boundary, fit_classifier, ClassifierFamily, ClassifierKind, ClassifierModel,
    ClassifierParams, DecisionBoundary, LabeledSet, ProbabilityModel, Target,
};
use crate::dataset::fmt_sig9;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gam::{anova_compare, backfit_gam, GamFamily, GamKind, GamModel, GamParams, GamPrediction};
use crate::geometry::{hull_contains, GridSpec, GridValues};
use crate::kde::{
    percentile_rectangle, write_density_grid, DensityConfig, DensityModel,
    CONTOUR_LEVELS, DENSITY_GRID_HEADER,
};
use crate::linalg::{covariance2, Point};
use crate::project::{EvmStatus, ProjectSpec};
use crate::selection::{nested_cv, Family, SelectionReport};
use crate::simulation::{derive_seed, TriadRow};
use crate::stats;

use super::cache::{self, CacheKey, CachedModels};
use super::config::RunConfig;
use super::report::*;

pub const PREDICTION_GRID_HEADER: [&str; 5] = [
    "t",
    "c",
    "expected_final_cost",
    "expected_final_duration",
    "extrapolated",
];

const PIPELINE_SALT: u64 = 0xC0A7_7A5C_5EED_0001;
/// Points of the training sample embedded in reports for scatter plots.
const SAMPLE_POINTS: usize = 1500;
/// Level of the variability band and of the trust cut on `p_anomaly`.
const VARIABILITY_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy)]
enum Task {
    OverBudget = 1,
    Late = 2,
    FinalCost = 3,
    FinalDuration = 4,
}

fn task_seed(seed: u64, task: Task) -> u64 {
    derive_seed(seed ^ PIPELINE_SALT, task as u64)
}

/// Deployment seed, distinct from every seed used during selection.
fn deploy_seed(seed: u64, task: Task) -> u64 {
    derive_seed(task_seed(seed, task), u64::MAX)
}

/// Output of [`analyze`]: the report plus the full-resolution grids and the
/// selection tables behind it.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub report: ControlReport,
    pub density: Option<DensityModel>,
    pub density_grid: GridValues,
    pub prediction_grid: PredictionGrid,
    pub selections: Vec<SelectionReport>,
}

#[derive(Debug, Clone)]
pub struct PredictionGrid {
    pub spec: GridSpec,
    pub cost: Vec<GamPrediction>,
    pub duration: Vec<GamPrediction>,
}

impl PredictionGrid {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(PREDICTION_GRID_HEADER)?;
        let s = &self.spec;
        for j in 0..s.ny {
            for i in 0..s.nx {
                let k = j * s.nx + i;
                let (c, d) = (self.cost[k], self.duration[k]);
                w.write_record([
                    fmt_sig9(s.x(i)),
                    fmt_sig9(s.y(j)),
                    fmt_sig9(c.value),
                    fmt_sig9(d.value),
                    ((c.extrapolated || d.extrapolated) as u8).to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<prediction grid>", e))?;
        Ok(())
    }
}

impl Analysis {
    /// Writes `report.json`, the density and prediction grids and the
    /// selection tables into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("report.json");
        let text = serde_json::to_string_pretty(&self.report)?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;

        let path = dir.join("density_grid.csv");
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let file = std::io::BufWriter::new(file);
        match &self.density {
            Some(model) => write_density_grid(model, &self.density_grid, file)?,
            None => {
                let mut w = csv::Writer::from_writer(file);
                w.write_record(DENSITY_GRID_HEADER)?;
                w.flush().map_err(|e| Error::io(&path, e))?;
            }
        }

        let path = dir.join("prediction_grid.csv");
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        self.prediction_grid.write_csv(std::io::BufWriter::new(file))?;

        let path = dir.join("selection.json");
        let doc = serde_json::json!({
            "config": self.report.config,
            "reports": self.selections,
        });
        std::fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")
            .map_err(|e| Error::io(&path, e))?;
        for sel in &self.selections {
            let name = format!("selection_{}.csv", sel.family.replace(':', "_"));
            let path = dir.join(name);
            let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            sel.write_csv(std::io::BufWriter::new(file))?;
        }
        Ok(())
    }
}

/// Fills a [`ControlReport`] for `status` from the triads of one EV level.
///
/// `rows` must all belong to that level and be in run order; the first
/// `config.selection.train_rows` of them train the classifiers and
/// regressors. With `cache_dir`, the bandwidth and model selections are
/// read from or written to a content-addressed file there.
pub fn analyze(
    spec: &ProjectSpec,
    rows: &[TriadRow],
    status: EvmStatus,
    config: &RunConfig,
    cache_dir: Option<&Path>,
    exec: Execution,
) -> Result<Analysis> {
    config.validate()?;
    if rows.len() < 2 * config.selection.k_outer {
        return Err(Error::Validation(format!(
            "analysis needs at least {} simulated runs, got {}",
            2 * config.selection.k_outer,
            rows.len()
        )));
    }
    let ev_level = rows[0].ev_level;
    let points: Vec<Point> = rows.iter().map(TriadRow::point).collect();
    let x = [status.at, status.ac];
    let key = CacheKey::new(
        &spec.fingerprint(),
        config.seed,
        config.runs,
        ev_level,
        config.selection,
        &config.model_grids,
    );
    let cached = cache_dir.and_then(|d| cache::load(d, &key));
    if cached.is_some() {
        log::info!("reusing cached model selection {}", key.digest());
    }

    // anomaly score
    let density_cfg = DensityConfig {
        grid_nodes: config.grid_nodes,
        ..DensityConfig::default()
    };
    let degenerate = degenerate_cloud(&points);
    let (density, grid) = if degenerate {
        (None, degenerate_grid(&points, config.grid_nodes))
    } else {
        let model = match cached.as_ref().and_then(|c| c.bandwidth.clone()) {
            Some(sel) => DensityModel::fit_with_selection(&points, &density_cfg, sel, exec)?,
            None => DensityModel::fit(&points, &density_cfg, exec)?,
        };
        let grid = model.chart_grid(&density_cfg);
        (Some(model), grid)
    };
    let (p_anomaly, density_grid, contours, variability) = match &density {
        Some(model) => {
            let values = model.density_grid(&grid, exec);
            let contours = model.contours(&values, &CONTOUR_LEVELS);
            let band = hdr_band(&values, model.density_threshold(VARIABILITY_LEVEL))
                .map_or_else(|| rectangle_band(&points), Ok)?;
            (model.anomaly_probability(x), values, contours, band)
        }
        None => {
            let values = GridValues {
                spec: grid,
                values: vec![0.0; grid.len()],
            };
            (point_mass_anomaly(&points, x), values, Vec::new(), bounding_band(&points))
        }
    };

    // classifiers and regressors
    let n_train = rows.len().min(config.selection.train_rows);
    let train = &rows[..n_train];
    let train_x: Vec<Point> = train.iter().map(TriadRow::point).collect();
    let (over_choice, late_choice, cost_choice, dur_choice, selections) = match cached {
        Some(c) => (c.over_budget, c.late, c.final_cost, c.final_duration, Vec::new()),
        None => {
            let mut selections = Vec::new();
            let over = select_classifier(train, Target::OverBudget, config, Task::OverBudget, exec, &mut selections)?;
            let late = select_classifier(train, Target::Late, config, Task::Late, exec, &mut selections)?;
            let cost_y: Vec<f64> = train.iter().map(|r| r.final_c).collect();
            let dur_y: Vec<f64> = train.iter().map(|r| r.final_t).collect();
            let cost = select_regressor(&train_x, &cost_y, "final_cost", config, Task::FinalCost, exec, &mut selections)?;
            let dur = select_regressor(&train_x, &dur_y, "final_duration", config, Task::FinalDuration, exec, &mut selections)?;
            if let Some(dir) = cache_dir {
                let entry = CachedModels {
                    key: key.clone(),
                    bandwidth: density.as_ref().and_then(|m| m.selection().cloned()),
                    over_budget: over.clone(),
                    late: late.clone(),
                    final_cost: cost.clone(),
                    final_duration: dur.clone(),
                };
                cache::store(dir, &entry)?;
            }
            (over, late, cost, dur, selections)
        }
    };

    let over_model = deploy_classifier(&over_choice, train, config, Task::OverBudget, exec)?;
    let late_model = deploy_classifier(&late_choice, train, config, Task::Late, exec)?;
    let cost_y: Vec<f64> = train.iter().map(|r| r.final_c).collect();
    let dur_y: Vec<f64> = train.iter().map(|r| r.final_t).collect();
    let cost_model = deploy_regressor(&cost_choice, &train_x, &cost_y)?;
    let dur_model = deploy_regressor(&dur_choice, &train_x, &dur_y)?;

    let p_overcost = over_model.probability(x);
    let p_delay = late_model.probability(x);
    let cost_at = cost_model.predict(x);
    let dur_at = dur_model.predict(x);

    let over_boundary = decision_boundary(&over_model, &grid, &train_x, exec);
    let late_boundary = decision_boundary(&late_model, &grid, &train_x, exec);
    let hull = over_boundary.hull.clone();

    let prediction_grid = PredictionGrid {
        spec: grid,
        cost: exec.map(grid.len(), |k| cost_model.predict(node(&grid, k))),
        duration: exec.map(grid.len(), |k| dur_model.predict(node(&grid, k))),
    };

    let anova = AnovaSummary::compare(&cost_choice, &dur_choice, &train_x, &cost_y, &dur_y);

    let heat = GridSpec::new(
        (grid.x_min, grid.x_max),
        (grid.y_min, grid.y_max),
        config.chart_nodes,
        config.chart_nodes,
    );
    let heat_nodes = heat.nodes();
    let overlays = ChartOverlays {
        pv_curve: spec.baseline_pv().breakpoints(),
        sample: train
            .iter()
            .take(SAMPLE_POINTS)
            .map(|r| SamplePoint {
                t: r.t,
                c: r.c,
                final_t: r.final_t,
                final_c: r.final_c,
                over_budget: r.over_budget,
                late: r.late,
            })
            .collect(),
        contours,
        rectangles: [0.75, 0.95]
            .iter()
            .map(|&l| percentile_rectangle(&points, l))
            .collect::<Result<_>>()?,
        trusted_nodes: heat_nodes.iter().map(|&p| hull_contains(&hull, p)).collect(),
        p_overcost: exec.map(heat_nodes.len(), |k| over_model.probability(heat_nodes[k])),
        p_delay: exec.map(heat_nodes.len(), |k| late_model.probability(heat_nodes[k])),
        expected_final_cost: exec.map(heat_nodes.len(), |k| cost_model.predict(heat_nodes[k]).value),
        expected_final_duration: exec.map(heat_nodes.len(), |k| dur_model.predict(heat_nodes[k]).value),
        heat_grid: heat,
        boundary_overcost: boundary_lines(&over_boundary),
        boundary_delay: boundary_lines(&late_boundary),
        hull,
    };

    let trust = TrustFlags {
        in_training_hull: hull_contains(&overlays.hull, x),
        in_expected_variability: p_anomaly <= VARIABILITY_LEVEL,
        in_chart_grid: x[0] >= grid.x_min && x[0] <= grid.x_max && x[1] >= grid.y_min && x[1] <= grid.y_max,
        cost_extrapolated: cost_at.extrapolated,
        duration_extrapolated: dur_at.extrapolated,
        over_budget_fixed: over_choice.fixed_probability.is_some(),
        late_fixed: late_choice.fixed_probability.is_some(),
        density_degenerate: degenerate,
    };
    if !trust.predictions_trusted() {
        log::warn!("status lies outside the region covered by the simulated runs; predictions are extrapolated");
    }

    let report = ControlReport {
        config: config.clone(),
        fingerprint: spec.fingerprint(),
        ev_level,
        bac: spec.bac(),
        pd: spec.pd(),
        status,
        p_anomaly,
        p_overcost,
        p_delay,
        expected_final_cost: cost_at.value,
        expected_overcost: cost_at.value - spec.bac(),
        expected_final_duration: dur_at.value,
        expected_delay: dur_at.value - spec.pd(),
        variability,
        models: ModelSummary {
            density: DensitySummary {
                bandwidth: density.as_ref().map(|m| m.bandwidth().matrix()),
                method: density.as_ref().and_then(|m| m.selection()).map(|s| s.method),
                warning: density.as_ref().and_then(|m| m.selection()).and_then(|s| s.warning.clone()),
                n_points: points.len(),
            },
            over_budget: over_choice,
            late: late_choice,
            final_cost: cost_choice,
            final_duration: dur_choice,
        },
        boundaries: BoundarySummaries {
            over_budget: boundary_summary(&over_boundary),
            late: boundary_summary(&late_boundary),
        },
        anova,
        trust,
        overlays,
    };
    Ok(Analysis {
        report,
        density,
        density_grid,
        prediction_grid,
        selections,
    })
}

fn node(grid: &GridSpec, k: usize) -> Point {
    [grid.x(k % grid.nx), grid.y(k / grid.nx)]
}

/// No spread along some direction: a kernel density with a full bandwidth
/// matrix does not exist.
fn degenerate_cloud(points: &[Point]) -> bool {
    let s = covariance2(points);
    !(s.a > 0.0 && s.d > 0.0 && s.det() > 1e-12 * s.a * s.d)
}

fn degenerate_grid(points: &[Point], nodes: usize) -> GridSpec {
    let pad = |k: usize| {
        let m = points.iter().map(|p| p[k].abs()).fold(0.0, f64::max);
        if m > 0.0 {
            0.05 * m
        } else {
            1.0
        }
    };
    GridSpec::around(points, pad(0), pad(1), nodes, nodes)
}

/// Score for a cloud without spread: 0 inside its bounding box (with a
/// relative tolerance), 1 elsewhere.
fn point_mass_anomaly(points: &[Point], x: Point) -> f64 {
    let b = bounding_band(points);
    let tol = |v: f64| 1e-9 * v.abs().max(1.0);
    let inside = x[0] >= b.t_lo - tol(b.t_lo)
        && x[0] <= b.t_hi + tol(b.t_hi)
        && x[1] >= b.c_lo - tol(b.c_lo)
        && x[1] <= b.c_hi + tol(b.c_hi);
    if inside {
        0.0
    } else {
        1.0
    }
}

fn bounding_band(points: &[Point]) -> VariabilityBand {
    let mut b = VariabilityBand {
        level: VARIABILITY_LEVEL,
        t_lo: f64::INFINITY,
        t_hi: f64::NEG_INFINITY,
        c_lo: f64::INFINITY,
        c_hi: f64::NEG_INFINITY,
    };
    for p in points {
        b.t_lo = b.t_lo.min(p[0]);
        b.t_hi = b.t_hi.max(p[0]);
        b.c_lo = b.c_lo.min(p[1]);
        b.c_hi = b.c_hi.max(p[1]);
    }
    b
}

/// Extent of the grid nodes whose density reaches `threshold`.
fn hdr_band(values: &GridValues, threshold: f64) -> Option<VariabilityBand> {
    let s = &values.spec;
    let inside: Vec<Point> = (0..s.len())
        .filter(|&k| values.values[k] >= threshold)
        .map(|k| node(s, k))
        .collect();
    if inside.is_empty() {
        return None;
    }
    Some(bounding_band(&inside))
}

fn rectangle_band(points: &[Point]) -> Result<VariabilityBand> {
    let r = percentile_rectangle(points, VARIABILITY_LEVEL)?;
    Ok(VariabilityBand {
        level: VARIABILITY_LEVEL,
        t_lo: r.t_lo,
        t_hi: r.t_hi,
        c_lo: r.c_lo,
        c_hi: r.c_hi,
    })
}

fn boundary_lines(b: &DecisionBoundary) -> BoundaryLines {
    BoundaryLines {
        trusted: b.trusted_lines(),
        all: b.lines.clone(),
    }
}

fn boundary_summary(b: &DecisionBoundary) -> BoundarySummary {
    let range = b.trusted_range();
    BoundarySummary {
        trusted_segments: b.trusted_lines().len(),
        segments: b.lines.len(),
        trusted_min: range.map(|r| r.0),
        trusted_max: range.map(|r| r.1),
    }
}

fn candidate(report: &SelectionReport) -> Candidate {
    Candidate {
        family: report.family.clone(),
        outer_error_mean: report.outer_error_mean,
        outer_error_sd: report.outer_error_sd,
        inner_selected_mean: report.inner_selected_mean,
        final_params: report.final_params().clone(),
    }
}

/// Index of the lowest outer error; ties keep the earlier family.
fn best(candidates: &[Candidate]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        if best.is_none_or(|b| c.outer_error_mean < candidates[b].outer_error_mean) {
            best = Some(i);
        }
    }
    best
}

fn select_classifier(
    train: &[TriadRow],
    target: Target,
    config: &RunConfig,
    task: Task,
    exec: Execution,
    selections: &mut Vec<SelectionReport>,
) -> Result<ClassifierChoice> {
    let x: Vec<Point> = train.iter().map(TriadRow::point).collect();
    let y: Vec<bool> = train.iter().map(|r| target.label(r)).collect();
    let set = LabeledSet::new(target, x, y)?;
    let mut choice = ClassifierChoice {
        target,
        n_train: set.len(),
        positive_fraction: set.positive_fraction(),
        fixed_probability: None,
        family: None,
        params: None,
        outer_error: None,
        candidates: Vec::new(),
        failures: Vec::new(),
    };
    if set.single_class() {
        choice.fixed_probability = Some(choice.positive_fraction);
        return Ok(choice);
    }
    let s = &config.selection;
    let mut kinds = Vec::new();
    for kind in ClassifierKind::ALL {
        let family = ClassifierFamily {
            set: &set,
            kind,
            exec,
        };
        let grid = config.model_grids.classifier(kind);
        match nested_cv(&family, &grid, s.k_outer, s.k_inner, task_seed(config.seed, task), exec) {
            Ok(report) => {
                log::info!("{}: outer error {:.4}", report.family, report.outer_error_mean);
                choice.candidates.push(candidate(&report));
                kinds.push((kind, grid[report.final_choice]));
                selections.push(report);
            }
            Err(e) => {
                log::warn!("{} failed: {e}", family.id());
                choice.failures.push(CandidateFailure {
                    family: family.id(),
                    error: e.to_string(),
                });
            }
        }
    }
    match best(&choice.candidates) {
        Some(i) => {
            choice.family = Some(kinds[i].0);
            choice.params = Some(kinds[i].1);
            choice.outer_error = Some(choice.candidates[i].outer_error_mean);
        }
        None => choice.fixed_probability = Some(choice.positive_fraction),
    }
    Ok(choice)
}

/// Classifier in use for a target: a fitted model or a constant.
enum Deployed {
    Fixed(f64),
    Model(ClassifierModel),
}

impl ProbabilityModel for Deployed {
    fn probability(&self, p: Point) -> f64 {
        match self {
            Deployed::Fixed(v) => *v,
            Deployed::Model(m) => m.probability(p),
        }
    }
}

fn deploy_classifier(
    choice: &ClassifierChoice,
    train: &[TriadRow],
    config: &RunConfig,
    task: Task,
    exec: Execution,
) -> Result<Deployed> {
    if let Some(v) = choice.fixed_probability {
        return Ok(Deployed::Fixed(v));
    }
    let params = match choice.params {
        Some(ClassifierParams::Forest(mut p)) => {
            p.ntree = config.selection.forest_trees_final;
            ClassifierParams::Forest(p)
        }
        Some(p) => p,
        None => return Err(Error::Numerical("classifier choice has no parameters".into())),
    };
    let x: Vec<Point> = train.iter().map(TriadRow::point).collect();
    let y: Vec<bool> = train.iter().map(|r| choice.target.label(r)).collect();
    let set = LabeledSet::new(choice.target, x, y)?;
    let rows: Vec<usize> = (0..set.len()).collect();
    let model = fit_classifier(&set, &rows, &params, deploy_seed(config.seed, task), exec)?;
    Ok(Deployed::Model(model))
}

fn select_regressor(
    x: &[Point],
    y: &[f64],
    response: &str,
    config: &RunConfig,
    task: Task,
    exec: Execution,
    selections: &mut Vec<SelectionReport>,
) -> Result<RegressorChoice> {
    let mut choice = RegressorChoice {
        response: response.to_string(),
        n_train: y.len(),
        constant: None,
        family: None,
        params: None,
        outer_mse: None,
        candidates: Vec::new(),
        failures: Vec::new(),
    };
    let spread = |k: usize| {
        let v: Vec<f64> = x.iter().map(|p| p[k]).collect();
        stats::variance(&v) > 0.0
    };
    if !(spread(0) && spread(1)) {
        choice.constant = Some(stats::mean(y));
        return Ok(choice);
    }
    let s = &config.selection;
    let mut chosen = Vec::new();
    for kind in GamKind::ALL {
        let family = GamFamily::new(x, y, kind, response);
        let grid = config.model_grids.regression(kind);
        match nested_cv(&family, grid, s.k_outer, s.k_inner, task_seed(config.seed, task), exec) {
            Ok(report) => {
                log::info!("{}: outer MSE {:.6e}", report.family, report.outer_error_mean);
                choice.candidates.push(candidate(&report));
                chosen.push((kind, grid[report.final_choice]));
                selections.push(report);
            }
            Err(e) => {
                log::warn!("{} failed: {e}", family.id());
                choice.failures.push(CandidateFailure {
                    family: family.id(),
                    error: e.to_string(),
                });
            }
        }
    }
    match best(&choice.candidates) {
        Some(i) => {
            choice.family = Some(chosen[i].0);
            choice.params = Some(chosen[i].1);
            choice.outer_mse = Some(choice.candidates[i].outer_error_mean);
        }
        None => choice.constant = Some(stats::mean(y)),
    }
    Ok(choice)
}

enum Regressor {
    Constant { value: f64, ranges: [(f64, f64); 2] },
    Gam(GamModel),
}

impl Regressor {
    fn predict(&self, p: Point) -> GamPrediction {
        match self {
            Regressor::Gam(m) => m.predict(p),
            Regressor::Constant { value, ranges } => GamPrediction {
                value: *value,
                extrapolated: (0..2).any(|k| {
                    let tol = 1e-9 * ranges[k].1.abs().max(1.0);
                    p[k] < ranges[k].0 - tol || p[k] > ranges[k].1 + tol
                }),
            },
        }
    }
}

fn deploy_regressor(choice: &RegressorChoice, x: &[Point], y: &[f64]) -> Result<Regressor> {
    if let Some(value) = choice.constant {
        let b = bounding_band(x);
        return Ok(Regressor::Constant {
            value,
            ranges: [(b.t_lo, b.t_hi), (b.c_lo, b.c_hi)],
        });
    }
    let params = choice
        .params
        .ok_or_else(|| Error::Numerical("regressor choice has no parameters".into()))?;
    Ok(Regressor::Gam(backfit_gam(x, y, params.specs())?))
}

impl AnovaSummary {
    fn compare(
        cost: &RegressorChoice,
        duration: &RegressorChoice,
        x: &[Point],
        cost_y: &[f64],
        dur_y: &[f64],
    ) -> Self {
        let mut notes = Vec::new();
        let mut one = |choice: &RegressorChoice, y: &[f64]| match spline_vs_loess(choice, x, y) {
            Ok(r) => Some(r),
            Err(e) => {
                notes.push(format!("{}: {e}", choice.response));
                None
            }
        };
        let final_cost = one(cost, cost_y);
        let final_duration = one(duration, dur_y);
        AnovaSummary {
            final_cost,
            final_duration,
            notes,
        }
    }
}

/// Fits the selected spline and loess settings on the training rows and
/// compares them, smaller model first.
fn spline_vs_loess(choice: &RegressorChoice, x: &[Point], y: &[f64]) -> Result<crate::gam::AnovaResult> {
    let params_of = |family: &str| -> Result<GamParams> {
        let c = choice
            .candidates
            .iter()
            .find(|c| c.family.starts_with(family))
            .ok_or_else(|| Error::InvalidInput(format!("no {family} candidate")))?;
        Ok(serde_json::from_value(c.final_params.clone())?)
    };
    let ns = backfit_gam(x, y, params_of(GamKind::NaturalSpline.name())?.specs())?;
    let lo = backfit_gam(x, y, params_of(GamKind::Loess.name())?.specs())?;
    if ns.df() <= lo.df() {
        anova_compare(&ns, &lo)
    } else {
        anova_compare(&lo, &ns)
    }
}
