//! Binary over-run classifiers on `(t, c)` statuses: quadratic discriminant
//! analysis, random forests and RBF support vector machines, plus the
//! `p = 0.5` decision boundary with its convex-hull trust mask.

mod boundary;
mod family;
mod forest;
mod qda;
mod svm;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Point;
use crate::simulation::{TriadRow, LEVEL_MATCH_TOL};

pub use boundary::{decision_boundary, DecisionBoundary};
pub use family::{
    classifier_grid, fit_classifier, ClassifierFamily, ClassifierKind, ClassifierModel,
    ClassifierParams,
};
pub use forest::{forest_fit, ForestModel, ForestParams};
pub use qda::{qda_fit, QdaClass, QdaModel};
pub use svm::{svm_fit, svm_fit_with, SvmModel, SvmOptions, SvmParams};

/// Which over-run a label encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// `final_c > BAC`
    OverBudget,
    /// `final_t > PD`
    Late,
}

impl Target {
    pub fn label(self, row: &TriadRow) -> bool {
        match self {
            Target::OverBudget => row.over_budget,
            Target::Late => row.late,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Target::OverBudget => "over_budget",
            Target::Late => "late",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub t: f64,
    pub c: f64,
    pub label: bool,
}

impl LabeledPoint {
    pub fn point(&self) -> Point {
        [self.t, self.c]
    }
}

/// Labeled statuses of one EV level, stored column-wise for the learners.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub target: Target,
    pub x: Vec<Point>,
    pub y: Vec<bool>,
}

impl LabeledSet {
    pub fn new(target: Target, x: Vec<Point>, y: Vec<bool>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidInput(format!(
                "{} points but {} labels",
                x.len(),
                y.len()
            )));
        }
        Ok(Self { target, x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.y.iter().filter(|&&b| b).count()
    }

    pub fn positive_fraction(&self) -> f64 {
        self.positives() as f64 / self.len() as f64
    }

    /// True when every label is the same; QDA and SVM refuse such data.
    pub fn single_class(&self) -> bool {
        let p = self.positives();
        p == 0 || p == self.len()
    }

    pub fn points(&self) -> Vec<LabeledPoint> {
        self.x
            .iter()
            .zip(&self.y)
            .map(|(p, &label)| LabeledPoint {
                t: p[0],
                c: p[1],
                label,
            })
            .collect()
    }

    /// Rows `idx` as a new set.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            target: self.target,
            x: idx.iter().map(|&i| self.x[i]).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
        }
    }
}

/// Labels the rows of a single EV level.
pub fn label_dataset(rows: &[TriadRow], target: Target) -> Result<LabeledSet> {
    let first = rows
        .first()
        .ok_or_else(|| Error::InvalidInput("no rows to label".into()))?;
    if rows
        .iter()
        .any(|r| (r.ev_level - first.ev_level).abs() > LEVEL_MATCH_TOL)
    {
        return Err(Error::InvalidInput(
            "rows span more than one EV level".into(),
        ));
    }
    let set = LabeledSet {
        target,
        x: rows.iter().map(TriadRow::point).collect(),
        y: rows.iter().map(|r| target.label(r)).collect(),
    };
    if set.single_class() {
        log::warn!(
            "all {} rows share one {} label",
            set.len(),
            target.name()
        );
    }
    Ok(set)
}

/// Anything that yields the probability of the positive class.
pub trait ProbabilityModel: Send + Sync {
    fn probability(&self, p: Point) -> f64;

    fn predict(&self, p: Point) -> bool {
        self.probability(p) > 0.5
    }
}

impl<F: Fn(Point) -> f64 + Send + Sync> ProbabilityModel for F {
    fn probability(&self, p: Point) -> f64 {
        self(p)
    }
}

pub(crate) fn require_two_classes(y: &[bool], what: &str) -> Result<()> {
    let p = y.iter().filter(|&&b| b).count();
    if p == 0 || p == y.len() {
        return Err(Error::InvalidInput(format!(
            "{what} needs both classes in the training data"
        )));
    }
    Ok(())
}

/// Fraction of `idx` rows misclassified by `model`.
pub fn error_rate(model: &dyn ProbabilityModel, set: &LabeledSet, idx: &[usize]) -> f64 {
    let wrong = idx
        .iter()
        .filter(|&&i| model.predict(set.x[i]) != set.y[i])
        .count();
    wrong as f64 / idx.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::project::case_study;
    use crate::simulation::run_ensemble;

    #[test]
    fn case_study_class_balance() {
        let spec = case_study();
        let ds = run_ensemble(&spec, 40_000, 5, &[0.5]).unwrap();
        let rows = ds.rows_at(0.5);
        let cost = label_dataset(&rows, Target::OverBudget).unwrap();
        let time = label_dataset(&rows, Target::Late).unwrap();
        assert!((cost.positive_fraction() - 0.5).abs() < 0.008);
        assert!((time.positive_fraction() - 0.7575).abs() < 0.01);
    }

    #[test]
    fn zero_variance_project_is_single_class() {
        let mut file = case_study().to_file();
        for a in &mut file.activities {
            a.variance = 0.0;
        }
        let spec = crate::project::ProjectSpec::from_file(file).unwrap();
        let ds = run_ensemble(&spec, 20, 1, &[0.5]).unwrap();
        let set = label_dataset(&ds.rows_at(0.5), Target::Late).unwrap();
        assert!(set.single_class());
        assert!(qda_fit(&set.x, &set.y).is_err());
    }

    #[test]
    fn mixed_levels_are_rejected() {
        let ds = run_ensemble(&case_study(), 3, 1, &[0.25, 0.5]).unwrap();
        assert!(label_dataset(&ds.rows, Target::Late).is_err());
        assert!(label_dataset(&[], Target::Late).is_err());
    }
}
