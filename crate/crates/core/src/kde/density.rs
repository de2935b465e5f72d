use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{GridSpec, GridValues};
use crate::linalg::Point;

use super::bandwidth::BandwidthMatrix;

/// Kernel contributions beyond this whitened radius are below `1e-16` of the
/// kernel peak and are skipped.
const CUTOFF_RADIUS: f64 = 8.6;
/// Cells per cutoff radius along each whitened axis.
const CELLS_PER_RADIUS: f64 = 2.0;

/// Gaussian kernel density estimate `f̂(x) = n⁻¹ Σᵢ φ_H(x − Xᵢ)`.
///
/// Points are stored in whitened coordinates `z = L⁻¹x` (`H = L Lᵀ`), where
/// the kernel is isotropic, and bucketed into a uniform cell grid so each
/// evaluation only visits cells within [`CUTOFF_RADIUS`].
#[derive(Debug, Clone)]
pub struct KernelDensity {
    points: Vec<Point>,
    h: BandwidthMatrix,
    chol: (f64, f64, f64),
    norm: f64,
    index: CellIndex,
}

#[derive(Debug, Clone)]
enum CellIndex {
    Grid {
        origin: Point,
        cell: f64,
        nx: usize,
        ny: usize,
        starts: Vec<usize>,
        whitened: Vec<Point>,
    },
    Flat(Vec<Point>),
}

pub fn kde_fit(points: &[Point], h: BandwidthMatrix) -> Result<KernelDensity> {
    KernelDensity::new(points.to_vec(), h)
}

impl KernelDensity {
    pub fn new(points: Vec<Point>, h: BandwidthMatrix) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("kernel density needs at least one point".into()));
        }
        let chol = h
            .matrix()
            .cholesky()
            .ok_or_else(|| Error::InvalidInput("bandwidth matrix is not SPD".into()))?;
        let norm = 1.0 / (2.0 * PI * h.matrix().det().sqrt() * points.len() as f64);
        let whiten = |p: &Point| whiten(chol, *p);
        let z: Vec<Point> = points.iter().map(whiten).collect();
        let index = build_index(z);
        Ok(Self {
            points,
            h,
            chol,
            norm,
            index,
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn bandwidth(&self) -> BandwidthMatrix {
        self.h
    }

    pub fn density(&self, x: Point) -> f64 {
        let z = whiten(self.chol, x);
        let r2max = CUTOFF_RADIUS * CUTOFF_RADIUS;
        let mut sum = 0.0;
        let mut add = |w: &Point| {
            let d0 = z[0] - w[0];
            let d1 = z[1] - w[1];
            let r2 = d0 * d0 + d1 * d1;
            if r2 < r2max {
                sum += (-0.5 * r2).exp();
            }
        };
        match &self.index {
            CellIndex::Flat(all) => all.iter().for_each(&mut add),
            CellIndex::Grid {
                origin,
                cell,
                nx,
                ny,
                starts,
                whitened,
            } => {
                let reach = CELLS_PER_RADIUS.ceil() as i64;
                let cx = ((z[0] - origin[0]) / cell).floor() as i64;
                let cy = ((z[1] - origin[1]) / cell).floor() as i64;
                let x_lo = (cx - reach).max(0);
                let x_hi = (cx + reach).min(*nx as i64 - 1);
                let y_lo = (cy - reach).max(0);
                let y_hi = (cy + reach).min(*ny as i64 - 1);
                if x_lo > x_hi || y_lo > y_hi {
                    return 0.0;
                }
                for gy in y_lo..=y_hi {
                    let row = gy as usize * nx;
                    let a = starts[row + x_lo as usize];
                    let b = starts[row + x_hi as usize + 1];
                    whitened[a..b].iter().for_each(&mut add);
                }
            }
        }
        sum * self.norm
    }

    pub fn density_many(&self, xs: &[Point], exec: Execution) -> Vec<f64> {
        exec.map(xs.len(), |i| self.density(xs[i]))
    }

    pub fn density_grid(&self, grid: &GridSpec, exec: Execution) -> GridValues {
        grid.evaluate(exec, |p| self.density(p))
    }
}

fn whiten((l11, l21, l22): (f64, f64, f64), p: Point) -> Point {
    let z0 = p[0] / l11;
    [z0, (p[1] - l21 * z0) / l22]
}

fn build_index(z: Vec<Point>) -> CellIndex {
    let cell = CUTOFF_RADIUS / CELLS_PER_RADIUS;
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for p in &z {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let nx = ((x1 - x0) / cell).floor() as usize + 1;
    let ny = ((y1 - y0) / cell).floor() as usize + 1;
    // small or very spread-out samples are cheaper to scan directly
    if z.len() < 256 || nx.saturating_mul(ny) > 8 * z.len() {
        return CellIndex::Flat(z);
    }
    let cell_of = |p: &Point| {
        let cx = (((p[0] - x0) / cell).floor() as usize).min(nx - 1);
        let cy = (((p[1] - y0) / cell).floor() as usize).min(ny - 1);
        cy * nx + cx
    };
    let mut counts = vec![0usize; nx * ny + 1];
    for p in &z {
        counts[cell_of(p) + 1] += 1;
    }
    for k in 1..counts.len() {
        counts[k] += counts[k - 1];
    }
    let starts = counts.clone();
    let mut fill = counts;
    let mut whitened = vec![[0.0, 0.0]; z.len()];
    for p in &z {
        let c = cell_of(p);
        whitened[fill[c]] = *p;
        fill[c] += 1;
    }
    CellIndex::Grid {
        origin: [x0, y0],
        cell,
        nx,
        ny,
        starts,
        whitened,
    }
}
