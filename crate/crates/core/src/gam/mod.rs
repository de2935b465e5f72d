//! Additive regression of final cost and duration on `(t, c)`:
//! natural cubic splines and loess smoothers combined by backfitting, with
//! an approximate F comparison between fitted models.

mod anova;
mod backfit;
mod loess;
mod spline;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::Point;
use crate::selection::Family;

use backfit::{backfit_operators, check_rows, column, Operator};

pub use anova::{anova_compare, AnovaResult};
pub use backfit::{
    backfit_gam, backfit_gam_with, gam_predict, BackfitOptions, GamModel, GamPrediction, Smooth,
    SmootherSpec,
};
pub use loess::{loess_smooth, Loess};
pub use spline::SplineBasis;

/// Smoother family shared by both predictors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GamKind {
    NaturalSpline,
    Loess,
}

impl GamKind {
    pub const ALL: [GamKind; 2] = [GamKind::NaturalSpline, GamKind::Loess];

    pub fn name(self) -> &'static str {
        match self {
            GamKind::NaturalSpline => "ns",
            GamKind::Loess => "lo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GamParams {
    pub t: SmootherSpec,
    pub c: SmootherSpec,
}

impl GamParams {
    pub fn specs(&self) -> [SmootherSpec; 2] {
        [self.t, self.c]
    }
}

/// Joint grids over both predictors, ordered from the least to the most
/// flexible: fewer total knots first (and fewer on `t` among equal totals);
/// for loess, larger total span first (and larger span on `t` among ties).
pub fn gam_grid(kind: GamKind) -> Vec<GamParams> {
    match kind {
        GamKind::NaturalSpline => {
            let mut g: Vec<(usize, usize)> = (2..=8).flat_map(|a| (2..=8).map(move |b| (a, b))).collect();
            g.sort_by_key(|&(a, b)| (a + b, a));
            g.into_iter()
                .map(|(a, b)| GamParams {
                    t: SmootherSpec::NaturalSpline { knots: a },
                    c: SmootherSpec::NaturalSpline { knots: b },
                })
                .collect()
        }
        GamKind::Loess => {
            let mut g: Vec<(u32, u32)> = (1..=10).flat_map(|a| (1..=10).map(move |b| (a, b))).collect();
            g.sort_by_key(|&(a, b)| (std::cmp::Reverse(a + b), std::cmp::Reverse(a)));
            g.into_iter()
                .map(|(a, b)| GamParams {
                    t: SmootherSpec::Loess { span: a as f64 / 10.0 },
                    c: SmootherSpec::Loess { span: b as f64 / 10.0 },
                })
                .collect()
        }
    }
}

/// Regression family over `(t, c)` rows; loss is the mean squared error.
///
/// Smoother operators depend only on the training rows and the per-predictor
/// spec, so those built for the most recent row set are kept and reused by
/// the other grid entries of the same fold.
pub struct GamFamily<'a> {
    x: &'a [Point],
    y: &'a [f64],
    kind: GamKind,
    name: String,
    operators: Mutex<OperatorCache>,
}

type OperatorKey = (usize, u8, u64);

#[derive(Default)]
struct OperatorCache {
    rows: Vec<usize>,
    built: HashMap<OperatorKey, Arc<Operator>>,
}

fn operator_key(j: usize, spec: SmootherSpec) -> OperatorKey {
    match spec {
        SmootherSpec::NaturalSpline { knots } => (j, 0, knots as u64),
        SmootherSpec::Loess { span } => (j, 1, span.to_bits()),
    }
}

impl<'a> GamFamily<'a> {
    pub fn new(x: &'a [Point], y: &'a [f64], kind: GamKind, name: impl Into<String>) -> Self {
        Self {
            x,
            y,
            kind,
            name: name.into(),
            operators: Mutex::new(OperatorCache::default()),
        }
    }

    fn operator(&self, rows: &[usize], cols: &[Vec<f64>; 2], j: usize, spec: SmootherSpec) -> Result<Arc<Operator>> {
        let key = operator_key(j, spec);
        {
            let mut cache = self.operators.lock().expect("operator cache lock");
            if cache.rows != rows {
                cache.rows = rows.to_vec();
                cache.built.clear();
            }
            if let Some(op) = cache.built.get(&key) {
                return Ok(Arc::clone(op));
            }
        }
        let op = Arc::new(Operator::new(&cols[j], spec)?);
        let mut cache = self.operators.lock().expect("operator cache lock");
        if cache.rows == rows {
            cache.built.insert(key, Arc::clone(&op));
        }
        Ok(op)
    }
}

impl Family for GamFamily<'_> {
    type Params = GamParams;
    type Model = GamModel;

    fn id(&self) -> String {
        format!("{}:{}", self.kind.name(), self.name)
    }

    fn len(&self) -> usize {
        self.y.len()
    }

    fn fit(&self, rows: &[usize], params: &GamParams, _seed: u64) -> Result<GamModel> {
        let x: Vec<Point> = rows.iter().map(|&i| self.x[i]).collect();
        let y: Vec<f64> = rows.iter().map(|&i| self.y[i]).collect();
        check_rows(&x, &y)?;
        let cols = [column(&x, 0), column(&x, 1)];
        let specs = params.specs();
        let a = self.operator(rows, &cols, 0, specs[0])?;
        let b = self.operator(rows, &cols, 1, specs[1])?;
        backfit_operators(&x, &y, specs, [&a, &b], &BackfitOptions::default())
    }

    fn loss(&self, model: &GamModel, rows: &[usize]) -> f64 {
        rows.iter()
            .map(|&i| (model.predict(self.x[i]).value - self.y[i]).powi(2))
            .sum::<f64>()
            / rows.len() as f64
    }
}
