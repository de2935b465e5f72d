use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{GridSpec, GridValues};
use crate::linalg::Point;
use crate::stats;

use super::loess::{Loess, LoessSmoother};
use super::spline::{spline_value, SplineBasis, SplineSmoother};

/// Smoother applied to one predictor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "smoother", rename_all = "snake_case")]
pub enum SmootherSpec {
    /// Natural cubic spline with this many interior knots (0 is a line).
    NaturalSpline { knots: usize },
    Loess { span: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct BackfitOptions {
    /// Converged once the largest change of a fitted value over one cycle is
    /// below `tolerance` times the largest absolute fitted value.
    pub tolerance: f64,
    pub max_cycles: usize,
}

impl Default for BackfitOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_cycles: 100,
        }
    }
}

pub(crate) enum Operator {
    Spline(SplineSmoother),
    Loess(LoessSmoother),
}

impl Operator {
    pub(crate) fn new(x: &[f64], spec: SmootherSpec) -> Result<Self> {
        Ok(match spec {
            SmootherSpec::NaturalSpline { knots } => Operator::Spline(SplineSmoother::new(x, knots)?),
            SmootherSpec::Loess { span } => Operator::Loess(LoessSmoother::new(x, span)?),
        })
    }

    fn smooth(&self, r: &[f64]) -> Vec<f64> {
        match self {
            Operator::Spline(s) => s.smooth(r),
            Operator::Loess(s) => s.smooth(r),
        }
    }

    fn trace(&self) -> f64 {
        match self {
            Operator::Spline(s) => s.trace(),
            Operator::Loess(s) => s.trace(),
        }
    }

    fn freeze(&self, r: &[f64], shift: f64) -> Smooth {
        match self {
            Operator::Spline(s) => Smooth::Spline {
                basis: s.basis.clone(),
                coef: s.coefficients(r),
                shift,
            },
            Operator::Loess(s) => Smooth::Loess {
                fit: s.freeze(r),
                shift,
            },
        }
    }
}

/// A fitted, centred component function `f_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "smoother", rename_all = "snake_case")]
pub enum Smooth {
    Spline {
        basis: SplineBasis,
        /// Coefficients on `[1, basis]`.
        coef: Vec<f64>,
        shift: f64,
    },
    Loess {
        fit: Loess,
        shift: f64,
    },
}

impl Smooth {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Smooth::Spline { basis, coef, shift } => spline_value(basis, coef, x) - shift,
            Smooth::Loess { fit, shift } => fit.predict(x) - shift,
        }
    }
}

/// Additive model `ŷ = β₀ + f_t(t) + f_c(c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamModel {
    pub specs: [SmootherSpec; 2],
    pub intercept: f64,
    pub smooths: Vec<Smooth>,
    /// `trace(S_j) − 1` per smoother.
    pub edf: [f64; 2],
    /// Training range of each predictor.
    pub ranges: [(f64, f64); 2],
    pub n: usize,
    pub rss: f64,
    /// Training RSS after each backfitting cycle.
    pub rss_trace: Vec<f64>,
    pub cycles: usize,
    pub fitted: Vec<f64>,
    /// Hash of the training data, used to check that compared models share it.
    pub data_hash: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GamPrediction {
    pub value: f64,
    /// Query lies outside the training range of some predictor.
    pub extrapolated: bool,
}

pub(crate) fn data_hash(x: &[Point], y: &[f64]) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    for (p, v) in x.iter().zip(y) {
        p[0].to_bits().hash(&mut h);
        p[1].to_bits().hash(&mut h);
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

pub fn backfit_gam(x: &[Point], y: &[f64], specs: [SmootherSpec; 2]) -> Result<GamModel> {
    backfit_gam_with(x, y, specs, &BackfitOptions::default())
}

/// Gauss–Seidel backfitting: each cycle replaces `f_j` by the smooth of the
/// partial residual `y − β₀ − Σ_{l≠j} f_l`, recentred to mean zero.
pub fn backfit_gam_with(
    x: &[Point],
    y: &[f64],
    specs: [SmootherSpec; 2],
    opts: &BackfitOptions,
) -> Result<GamModel> {
    check_rows(x, y)?;
    let ops = [
        Operator::new(&column(x, 0), specs[0])?,
        Operator::new(&column(x, 1), specs[1])?,
    ];
    backfit_operators(x, y, specs, [&ops[0], &ops[1]], opts)
}

pub(crate) fn column(x: &[Point], k: usize) -> Vec<f64> {
    x.iter().map(|p| p[k]).collect()
}

pub(crate) fn check_rows(x: &[Point], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "{} rows but {} responses",
            x.len(),
            y.len()
        )));
    }
    if y.len() < 10 {
        return Err(Error::InvalidInput(format!(
            "GAM needs at least 10 rows, got {}",
            y.len()
        )));
    }
    Ok(())
}

/// Backfitting with smoother operators already built on the columns of `x`.
pub(crate) fn backfit_operators(
    x: &[Point],
    y: &[f64],
    specs: [SmootherSpec; 2],
    ops: [&Operator; 2],
    opts: &BackfitOptions,
) -> Result<GamModel> {
    let n = y.len();
    let cols = [column(x, 0), column(x, 1)];
    let intercept = stats::mean(y);
    let mut f = [vec![0.0; n], vec![0.0; n]];
    let mut partial = [vec![0.0; n], vec![0.0; n]];
    let mut shifts = [0.0; 2];
    let mut rss_trace = Vec::new();
    let mut cycles = 0;
    let mut delta = f64::INFINITY;
    let mut fitted = vec![intercept; n];
    while cycles < opts.max_cycles {
        cycles += 1;
        for j in 0..2 {
            let other = &f[1 - j];
            let r: Vec<f64> = (0..n).map(|i| y[i] - intercept - other[i]).collect();
            let mut s = ops[j].smooth(&r);
            let shift = stats::mean(&s);
            s.iter_mut().for_each(|v| *v -= shift);
            f[j] = s;
            partial[j] = r;
            shifts[j] = shift;
        }
        let next: Vec<f64> = (0..n).map(|i| intercept + f[0][i] + f[1][i]).collect();
        rss_trace.push(rss(y, &next));
        let change = next.iter().zip(&fitted).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let scale = next.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        delta = change / scale;
        fitted = next;
        if delta < opts.tolerance {
            break;
        }
    }
    if !(delta < opts.tolerance) {
        return Err(Error::BackfitNotConverged { cycles, delta });
    }
    let range = |c: &[f64]| {
        c.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    };
    Ok(GamModel {
        specs,
        intercept,
        smooths: vec![
            ops[0].freeze(&partial[0], shifts[0]),
            ops[1].freeze(&partial[1], shifts[1]),
        ],
        edf: [ops[0].trace() - 1.0, ops[1].trace() - 1.0],
        ranges: [range(&cols[0]), range(&cols[1])],
        n,
        rss: rss(y, &fitted),
        rss_trace,
        cycles,
        fitted,
        data_hash: data_hash(x, y),
    })
}

fn rss(y: &[f64], fitted: &[f64]) -> f64 {
    y.iter().zip(fitted).map(|(a, b)| (a - b).powi(2)).sum()
}

impl GamModel {
    /// `1 + Σ edf_j`.
    pub fn df(&self) -> f64 {
        1.0 + self.edf.iter().sum::<f64>()
    }

    pub fn predict(&self, p: Point) -> GamPrediction {
        let value = self.intercept + self.smooths[0].eval(p[0]) + self.smooths[1].eval(p[1]);
        let outside = |k: usize| p[k] < self.ranges[k].0 || p[k] > self.ranges[k].1;
        GamPrediction {
            value,
            extrapolated: outside(0) || outside(1),
        }
    }

    pub fn predict_grid(&self, grid: &GridSpec, exec: Execution) -> GridValues {
        grid.evaluate(exec, |p| self.predict(p).value)
    }
}

pub fn gam_predict(model: &GamModel, t: f64, c: f64) -> GamPrediction {
    model.predict([t, c])
}
