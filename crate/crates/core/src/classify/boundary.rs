use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::geometry::{convex_hull, hull_contains, level_set, GridSpec, GridValues, Polyline};
use crate::linalg::Point;

use super::ProbabilityModel;

/// The `p = 0.5` level set of a classifier over a grid, with a mask of the
/// cells whose centre lies inside the convex hull of the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionBoundary {
    pub probabilities: GridValues,
    pub lines: Vec<Polyline>,
    pub hull: Vec<Point>,
    /// Row-major over the `(nx − 1) × (ny − 1)` cells.
    pub trusted: Vec<bool>,
}

pub fn decision_boundary(
    model: &dyn ProbabilityModel,
    grid: &GridSpec,
    training: &[Point],
    exec: Execution,
) -> DecisionBoundary {
    let probabilities = grid.evaluate(exec, |p| model.probability(p));
    let lines = level_set(&probabilities, 0.5);
    let hull = convex_hull(training);
    let (dx, dy) = (grid.dx(), grid.dy());
    let mut trusted = Vec::with_capacity((grid.nx - 1) * (grid.ny - 1));
    for j in 0..grid.ny - 1 {
        for i in 0..grid.nx - 1 {
            trusted.push(hull_contains(
                &hull,
                [grid.x(i) + dx / 2.0, grid.y(j) + dy / 2.0],
            ));
        }
    }
    DecisionBoundary {
        probabilities,
        lines,
        hull,
        trusted,
    }
}

impl DecisionBoundary {
    pub fn is_trusted(&self, point: Point) -> bool {
        hull_contains(&self.hull, point)
    }

    pub fn trusted_cell(&self, i: usize, j: usize) -> bool {
        self.trusted[j * (self.probabilities.spec.nx - 1) + i]
    }

    /// Pieces of the boundary whose vertices fall inside the training hull.
    pub fn trusted_lines(&self) -> Vec<Polyline> {
        let mut out = Vec::new();
        for line in &self.lines {
            let mut current: Polyline = Vec::new();
            for &p in line {
                if self.is_trusted(p) {
                    current.push(p);
                } else if !current.is_empty() {
                    out.push(std::mem::take(&mut current));
                }
            }
            if !current.is_empty() {
                out.push(current);
            }
        }
        out
    }

    /// Smallest and largest probability over trusted cell corners.
    pub fn trusted_range(&self) -> Option<(f64, f64)> {
        let spec = self.probabilities.spec;
        let mut range: Option<(f64, f64)> = None;
        for j in 0..spec.ny - 1 {
            for i in 0..spec.nx - 1 {
                if !self.trusted_cell(i, j) {
                    continue;
                }
                for (a, b) in [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)] {
                    let v = self.probabilities.at(a, b);
                    range = Some(match range {
                        None => (v, v),
                        Some((lo, hi)) => (lo.min(v), hi.max(v)),
                    });
                }
            }
        }
        range
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Vec<Point> {
        vec![[0.0, 0.0], [10.0, 0.0], [10.0, 100.0], [0.0, 100.0]]
    }

    #[test]
    fn constant_predictor_has_no_boundary() {
        let grid = GridSpec::new((0.0, 10.0), (0.0, 100.0), 30, 30);
        let b = decision_boundary(&|_: Point| 0.8, &grid, &square(), Execution::Sequential);
        assert!(b.lines.is_empty());
        assert_eq!(b.trusted_range(), Some((0.8, 0.8)));
    }

    #[test]
    fn logistic_in_cost_gives_horizontal_line() {
        let grid = GridSpec::new((0.0, 10.0), (0.0, 100.0), 25, 41);
        let c0 = 37.0;
        let model = move |p: Point| 1.0 / (1.0 + (-(p[1] - c0)).exp());
        let b = decision_boundary(&model, &grid, &square(), Execution::default());
        assert_eq!(b.lines.len(), 1);
        for p in &b.lines[0] {
            assert!((p[1] - c0).abs() < grid.dy());
        }
        assert_eq!(b.trusted_lines().len(), 1);
    }

    #[test]
    fn cells_outside_the_hull_are_untrusted() {
        let grid = GridSpec::new((-5.0, 15.0), (0.0, 100.0), 21, 11);
        let b = decision_boundary(&|_: Point| 0.3, &grid, &square(), Execution::Sequential);
        assert!(!b.trusted_cell(0, 5));
        assert!(b.trusted_cell(10, 5));
    }
}
