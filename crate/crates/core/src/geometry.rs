//! Rectangular evaluation grids, marching-squares level sets and convex
//! hulls over the (t, c) plane.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::linalg::Point;

/// Regular grid of `nx × ny` nodes spanning `[x_min, x_max] × [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> Self {
        assert!(nx >= 2 && ny >= 2, "grid needs at least 2 nodes per axis");
        Self {
            x_min: x.0,
            x_max: x.1,
            y_min: y.0,
            y_max: y.1,
            nx,
            ny,
        }
    }

    /// Bounding box of `points` expanded by `pad_x`, `pad_y`.
    pub fn around(points: &[Point], pad_x: f64, pad_y: f64, nx: usize, ny: usize) -> Self {
        let (mut x0, mut x1, mut y0, mut y1) = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for p in points {
            x0 = x0.min(p[0]);
            x1 = x1.max(p[0]);
            y0 = y0.min(p[1]);
            y1 = y1.max(p[1]);
        }
        Self::new((x0 - pad_x, x1 + pad_x), (y0 - pad_y, y1 + pad_y), nx, ny)
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + (self.x_max - self.x_min) * i as f64 / (self.nx - 1) as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_min + (self.y_max - self.y_min) * j as f64 / (self.ny - 1) as f64
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / (self.ny - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node coordinates in row-major order (`y` outer, `x` inner).
    pub fn nodes(&self) -> Vec<Point> {
        (0..self.ny)
            .flat_map(|j| (0..self.nx).map(move |i| (i, j)))
            .map(|(i, j)| [self.x(i), self.y(j)])
            .collect()
    }

    pub fn evaluate<F>(&self, exec: Execution, f: F) -> GridValues
    where
        F: Fn(Point) -> f64 + Sync + Send,
    {
        let values = exec
            .map(self.ny, |j| {
                (0..self.nx)
                    .map(|i| f([self.x(i), self.y(j)]))
                    .collect::<Vec<_>>()
            })
            .into_iter()
            .flatten()
            .collect();
        GridValues { spec: *self, values }
    }
}

/// Scalar field sampled on a [`GridSpec`], row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridValues {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl GridValues {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.spec.nx + i]
    }
}

pub type Polyline = Vec<Point>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum EdgeKey {
    /// Edge between nodes (i, j) and (i + 1, j).
    H(usize, usize),
    /// Edge between nodes (i, j) and (i, j + 1).
    V(usize, usize),
}

/// Marching-squares extraction of `{ f = level }` with linear interpolation
/// along cell edges. Segments are chained into polylines; closed contours
/// repeat their first vertex at the end.
pub fn level_set(grid: &GridValues, level: f64) -> Vec<Polyline> {
    let spec = &grid.spec;
    let inside = |i: usize, j: usize| grid.at(i, j) >= level;
    let vertex = |e: EdgeKey| -> Point {
        let ((i0, j0), (i1, j1)) = match e {
            EdgeKey::H(i, j) => ((i, j), (i + 1, j)),
            EdgeKey::V(i, j) => ((i, j), (i, j + 1)),
        };
        let (a, b) = (grid.at(i0, j0), grid.at(i1, j1));
        let w = (level - a) / (b - a);
        let (x0, y0) = (spec.x(i0), spec.y(j0));
        let (x1, y1) = (spec.x(i1), spec.y(j1));
        [x0 + w * (x1 - x0), y0 + w * (y1 - y0)]
    };

    let mut segments: Vec<(EdgeKey, EdgeKey)> = Vec::new();
    for j in 0..spec.ny - 1 {
        for i in 0..spec.nx - 1 {
            let b = EdgeKey::H(i, j);
            let t = EdgeKey::H(i, j + 1);
            let l = EdgeKey::V(i, j);
            let r = EdgeKey::V(i + 1, j);
            let case = (inside(i, j) as u8)
                | (inside(i + 1, j) as u8) << 1
                | (inside(i + 1, j + 1) as u8) << 2
                | (inside(i, j + 1) as u8) << 3;
            let center_inside = || {
                0.25 * (grid.at(i, j) + grid.at(i + 1, j) + grid.at(i + 1, j + 1) + grid.at(i, j + 1))
                    >= level
            };
            match case {
                0 | 15 => {}
                1 | 14 => segments.push((l, b)),
                2 | 13 => segments.push((b, r)),
                3 | 12 => segments.push((l, r)),
                4 | 11 => segments.push((r, t)),
                6 | 9 => segments.push((b, t)),
                7 | 8 => segments.push((l, t)),
                5 => {
                    if center_inside() {
                        segments.push((b, r));
                        segments.push((t, l));
                    } else {
                        segments.push((l, b));
                        segments.push((r, t));
                    }
                }
                10 => {
                    if center_inside() {
                        segments.push((l, b));
                        segments.push((r, t));
                    } else {
                        segments.push((b, r));
                        segments.push((t, l));
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    chain(&segments)
        .into_iter()
        .map(|keys| keys.into_iter().map(vertex).collect())
        .collect()
}

fn chain(segments: &[(EdgeKey, EdgeKey)]) -> Vec<Vec<EdgeKey>> {
    let mut adjacency: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (k, (a, b)) in segments.iter().enumerate() {
        adjacency.entry(*a).or_default().push(k);
        adjacency.entry(*b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();

    let walk = |start_seg: usize, from: EdgeKey, used: &mut Vec<bool>| -> Vec<EdgeKey> {
        let mut line = vec![from];
        let mut seg = start_seg;
        let mut at = from;
        loop {
            used[seg] = true;
            let (a, b) = segments[seg];
            let next = if a == at { b } else { a };
            line.push(next);
            at = next;
            match adjacency[&at].iter().find(|&&s| !used[s]) {
                Some(&s) => seg = s,
                None => break,
            }
        }
        line
    };

    // Open chains start at an edge touched by a single segment.
    let mut starts: Vec<(usize, EdgeKey)> = Vec::new();
    for (k, (a, b)) in segments.iter().enumerate() {
        for e in [a, b] {
            if adjacency[e].len() == 1 {
                starts.push((k, *e));
            }
        }
    }
    for (k, e) in starts {
        if !used[k] {
            lines.push(walk(k, e, &mut used));
        }
    }
    for k in 0..segments.len() {
        if !used[k] {
            lines.push(walk(k, segments[k].0, &mut used));
        }
    }
    lines
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise convex hull (Andrew's monotone chain), without the
/// repeated closing vertex.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Inclusive point-in-convex-polygon test for a counter-clockwise hull.
pub fn hull_contains(hull: &[Point], p: Point) -> bool {
    match hull.len() {
        0 => false,
        1 => hull[0] == p,
        2 => {
            let (a, b) = (hull[0], hull[1]);
            cross(a, b, p).abs() <= 1e-12 * (1.0 + p[0].abs() + p[1].abs())
                && p[0] >= a[0].min(b[0])
                && p[0] <= a[0].max(b[0])
                && p[1] >= a[1].min(b[1])
                && p[1] <= a[1].max(b[1])
        }
        n => (0..n).all(|k| cross(hull[k], hull[(k + 1) % n], p) >= 0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizontal_level_set_is_one_polyline() {
        let spec = GridSpec::new((0.0, 10.0), (0.0, 10.0), 21, 21);
        let g = spec.evaluate(Execution::Sequential, |p| p[1]);
        let lines = level_set(&g, 3.3);
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].len(), 21);
        for p in &lines[0] {
            assert!((p[1] - 3.3).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_level_set_is_closed() {
        let spec = GridSpec::new((-2.0, 2.0), (-2.0, 2.0), 81, 81);
        let g = spec.evaluate(Execution::Sequential, |p| p[0] * p[0] + p[1] * p[1]);
        let lines = level_set(&g, 1.0);
        assert_eq!(lines.len(), 1);
        let l = &lines[0];
        assert_eq!(l.first(), l.last());
        for p in l {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!((r - 1.0).abs() < 0.01, "r = {r}");
        }
    }

    #[test]
    fn constant_field_has_no_level_set() {
        let spec = GridSpec::new((0.0, 1.0), (0.0, 1.0), 5, 5);
        let g = spec.evaluate(Execution::Sequential, |_| 0.8);
        assert!(level_set(&g, 0.5).is_empty());
    }

    #[test]
    fn hull_of_square_with_interior_points() {
        let pts = vec![
            [0.0, 0.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [0.0, 1.0],
            [0.5, 0.5],
            [0.2, 0.7],
        ];
        let h = convex_hull(&pts);
        assert_eq!(h.len(), 4);
        assert!(hull_contains(&h, [0.5, 0.5]));
        assert!(hull_contains(&h, [1.0, 0.5]));
        assert!(!hull_contains(&h, [1.1, 0.5]));
    }
}
