use serde::{Deserialize, Serialize};

use crate::classify::{classifier_grid, ClassifierKind, ClassifierParams};
use crate::error::{Error, Result};
use crate::gam::{gam_grid, GamKind, GamParams};
use crate::selection::DEFAULT_FOLDS;

/// Default EV pivots offered by `simulate`.
pub const DEFAULT_EV_LEVELS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Settings of one end-to-end run, copied into every report and manifest
/// this run writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub project: String,
    pub runs: u64,
    pub seed: u64,
    pub ev_levels: Vec<f64>,
    /// Nodes per axis of the exported density and prediction grids.
    pub grid_nodes: usize,
    /// Nodes per axis of the heat maps embedded in reports for charting.
    pub chart_nodes: usize,
    pub selection: SelectionConfig,
    pub model_grids: ModelGrids,
    pub output_dir: Option<String>,
}

impl RunConfig {
    pub fn new(project: impl Into<String>, runs: u64, seed: u64, ev_levels: Vec<f64>) -> Self {
        let selection = SelectionConfig::default();
        Self {
            project: project.into(),
            runs,
            seed,
            ev_levels,
            grid_nodes: 200,
            chart_nodes: 41,
            model_grids: ModelGrids::new(selection.forest_trees_search),
            selection,
            output_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Validation("runs must be at least 1".into()));
        }
        if self.ev_levels.is_empty() {
            return Err(Error::Validation("at least one EV level is required".into()));
        }
        if let Some(l) = self.ev_levels.iter().find(|l| !(**l > 0.0 && **l <= 1.0)) {
            return Err(Error::Validation(format!("EV level {l} is outside (0, 1]")));
        }
        if self.grid_nodes < 2 || self.chart_nodes < 2 {
            return Err(Error::Validation("grids need at least 2 nodes per axis".into()));
        }
        let s = &self.selection;
        if s.k_outer < 2 || s.k_inner < 2 {
            return Err(Error::Validation("fold counts must be at least 2".into()));
        }
        if s.train_rows < 2 * s.k_outer * s.k_inner {
            return Err(Error::Validation(format!(
                "train_rows must be at least {}",
                2 * s.k_outer * s.k_inner
            )));
        }
        if s.forest_trees_final == 0 {
            return Err(Error::Validation("forest_trees_final must be positive".into()));
        }
        let g = &self.model_grids;
        if g.forest.is_empty() || g.svm.is_empty() || g.spline.is_empty() || g.loess.is_empty() {
            return Err(Error::Validation("model grids must not be empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Rows of the level (in run order) used to train and select the
    /// classifiers and regressors.
    pub train_rows: usize,
    pub k_outer: usize,
    pub k_inner: usize,
    /// Trees per forest while searching the grid.
    pub forest_trees_search: usize,
    /// Trees in the deployed forest.
    pub forest_trees_final: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            train_rows: 1000,
            k_outer: DEFAULT_FOLDS,
            k_inner: DEFAULT_FOLDS,
            forest_trees_search: 100,
            forest_trees_final: 500,
        }
    }
}

/// Hyperparameter grids searched by nested cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelGrids {
    pub forest: Vec<ClassifierParams>,
    pub svm: Vec<ClassifierParams>,
    pub spline: Vec<GamParams>,
    pub loess: Vec<GamParams>,
}

impl ModelGrids {
    pub fn new(forest_trees: usize) -> Self {
        Self {
            forest: classifier_grid(ClassifierKind::Forest, forest_trees),
            svm: classifier_grid(ClassifierKind::Svm, forest_trees),
            spline: gam_grid(GamKind::NaturalSpline),
            loess: gam_grid(GamKind::Loess),
        }
    }

    pub fn classifier(&self, kind: ClassifierKind) -> Vec<ClassifierParams> {
        match kind {
            ClassifierKind::Qda => vec![ClassifierParams::Qda],
            ClassifierKind::Forest => self.forest.clone(),
            ClassifierKind::Svm => self.svm.clone(),
        }
    }

    pub fn regression(&self, kind: GamKind) -> &[GamParams] {
        match kind {
            GamKind::NaturalSpline => &self.spline,
            GamKind::Loess => &self.loess,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let c = RunConfig::new("p.json", 100, 1, vec![0.5]);
        c.validate().unwrap();
        assert_eq!(c.model_grids.spline.len(), 49);
    }

    #[test]
    fn rejects_bad_levels_and_runs() {
        let mut c = RunConfig::new("p.json", 0, 1, vec![0.5]);
        assert!(c.validate().is_err());
        c.runs = 5;
        c.ev_levels = vec![1.5];
        assert!(c.validate().is_err());
        c.ev_levels = vec![];
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let c = RunConfig::new("p.json", 10, 3, vec![0.25, 0.5]);
        let text = serde_json::to_string(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }
}
