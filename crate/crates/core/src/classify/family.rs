use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::Point;
use crate::selection::Family;

use super::{
    error_rate, forest_fit, qda_fit, svm_fit, ForestModel, ForestParams, LabeledSet,
    ProbabilityModel, QdaModel, SvmModel, SvmParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Qda,
    Forest,
    Svm,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] = [Self::Qda, Self::Forest, Self::Svm];

    pub fn name(self) -> &'static str {
        match self {
            Self::Qda => "qda",
            Self::Forest => "forest",
            Self::Svm => "svm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ClassifierParams {
    Qda,
    Forest(ForestParams),
    Svm(SvmParams),
}

impl ClassifierParams {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            Self::Qda => ClassifierKind::Qda,
            Self::Forest(_) => ClassifierKind::Forest,
            Self::Svm(_) => ClassifierKind::Svm,
        }
    }
}

/// A fitted classifier of any family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ClassifierModel {
    Qda(QdaModel),
    Forest(ForestModel),
    Svm(SvmModel),
}

impl ProbabilityModel for ClassifierModel {
    fn probability(&self, p: Point) -> f64 {
        match self {
            Self::Qda(m) => m.probability(p),
            Self::Forest(m) => m.probability(p),
            Self::Svm(m) => m.probability(p),
        }
    }
}

pub fn fit_classifier(
    set: &LabeledSet,
    rows: &[usize],
    params: &ClassifierParams,
    seed: u64,
    exec: Execution,
) -> Result<ClassifierModel> {
    let sub = set.subset(rows);
    Ok(match params {
        ClassifierParams::Qda => ClassifierModel::Qda(qda_fit(&sub.x, &sub.y)?),
        ClassifierParams::Forest(p) => {
            if sub.is_empty() || p.ntree == 0 {
                return Err(Error::InvalidInput("forest needs rows and at least one tree".into()));
            }
            ClassifierModel::Forest(forest_fit(&sub.x, &sub.y, *p, seed, exec))
        }
        ClassifierParams::Svm(p) => ClassifierModel::Svm(svm_fit(&sub.x, &sub.y, *p)?),
    })
}

/// Default hyperparameter grids, each ordered from the least to the most
/// flexible setting.
pub fn classifier_grid(kind: ClassifierKind, forest_trees: usize) -> Vec<ClassifierParams> {
    match kind {
        ClassifierKind::Qda => vec![ClassifierParams::Qda],
        ClassifierKind::Forest => [(1, 40), (1, 20), (1, 5), (2, 5)]
            .into_iter()
            .map(|(mtry, min_node)| {
                ClassifierParams::Forest(ForestParams {
                    ntree: forest_trees,
                    mtry,
                    min_node,
                })
            })
            .collect(),
        ClassifierKind::Svm => {
            let mut grid = Vec::new();
            for gamma in [0.25, 1.0, 4.0] {
                for c in [0.5, 2.0, 8.0] {
                    grid.push(ClassifierParams::Svm(SvmParams { c, gamma }));
                }
            }
            grid
        }
    }
}

/// Classification family over a labeled set; loss is the error rate and
/// folds are stratified on the label.
pub struct ClassifierFamily<'a> {
    pub set: &'a LabeledSet,
    pub kind: ClassifierKind,
    pub exec: Execution,
}

impl Family for ClassifierFamily<'_> {
    type Params = ClassifierParams;
    type Model = ClassifierModel;

    fn id(&self) -> String {
        format!("{}:{}", self.kind.name(), self.set.target.name())
    }

    fn len(&self) -> usize {
        self.set.len()
    }

    fn fit(&self, rows: &[usize], params: &ClassifierParams, seed: u64) -> Result<ClassifierModel> {
        if params.kind() != self.kind {
            return Err(Error::InvalidInput(format!(
                "{} family given {} parameters",
                self.kind.name(),
                params.kind().name()
            )));
        }
        fit_classifier(self.set, rows, params, seed, self.exec)
    }

    fn loss(&self, model: &ClassifierModel, rows: &[usize]) -> f64 {
        error_rate(model, self.set, rows)
    }

    fn strata(&self) -> Option<&[bool]> {
        Some(&self.set.y)
    }
}
