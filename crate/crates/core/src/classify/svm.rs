use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Point;

use super::{require_two_classes, ProbabilityModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    /// Box constraint.
    pub c: f64,
    /// RBF width in `exp(−γ‖z − z′‖²)` on standardized features.
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SvmOptions {
    /// Stop once the maximal KKT violation falls below this.
    pub tolerance: f64,
    /// Iteration cap; `None` means `max(100 000, 100·n)`.
    pub max_iterations: Option<usize>,
    /// Kernel rows kept in memory.
    pub cache_rows: usize,
}

impl Default for SvmOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-3,
            max_iterations: None,
            cache_rows: 4096,
        }
    }
}

/// Soft-margin RBF support vector machine with Platt-scaled output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub params: SvmParams,
    /// Per-feature training mean and scale used for standardization.
    pub center: Point,
    pub scale: Point,
    /// Standardized support vectors.
    pub support: Vec<Point>,
    /// `αᵢ yᵢ` for each support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
    /// Platt sigmoid `p = 1 / (1 + exp(A·f + B))`.
    pub platt_a: f64,
    pub platt_b: f64,
    /// Maximal KKT violation at termination.
    pub residual: f64,
    pub iterations: usize,
}

pub fn svm_fit(x: &[Point], y: &[bool], params: SvmParams) -> Result<SvmModel> {
    svm_fit_with(x, y, params, &SvmOptions::default())
}

pub fn svm_fit_with(
    x: &[Point],
    y: &[bool],
    params: SvmParams,
    opts: &SvmOptions,
) -> Result<SvmModel> {
    require_two_classes(y, "SVM")?;
    if !(params.c > 0.0 && params.gamma > 0.0) {
        return Err(Error::InvalidInput(format!(
            "SVM needs C > 0 and gamma > 0, got C = {}, gamma = {}",
            params.c, params.gamma
        )));
    }
    let n = x.len();
    let (center, scale) = standardization(x);
    let z: Vec<Point> = x.iter().map(|p| standardize(*p, center, scale)).collect();
    let yf: Vec<f64> = y.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
    let max_iter = opts.max_iterations.unwrap_or((100 * n).max(100_000));
    let mut solver = Smo {
        z: &z,
        y: &yf,
        gamma: params.gamma,
        cache: RowCache::new(n, opts.cache_rows),
    };
    let sol = solver.solve(params.c, opts.tolerance, max_iter)?;

    let mut support = Vec::new();
    let mut coef = Vec::new();
    for i in 0..n {
        if sol.alpha[i] > 0.0 {
            support.push(z[i]);
            coef.push(sol.alpha[i] * yf[i]);
        }
    }
    let mut model = SvmModel {
        params,
        center,
        scale,
        support,
        coef,
        bias: -sol.rho,
        platt_a: 0.0,
        platt_b: 0.0,
        residual: sol.residual,
        iterations: sol.iterations,
    };
    let decisions: Vec<f64> = z.iter().map(|q| model.decision_standardized(*q)).collect();
    let (a, b) = platt_fit(&decisions, y);
    model.platt_a = a;
    model.platt_b = b;
    Ok(model)
}

impl SvmModel {
    pub fn decision(&self, p: Point) -> f64 {
        self.decision_standardized(standardize(p, self.center, self.scale))
    }

    fn decision_standardized(&self, q: Point) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(s, c)| c * rbf(self.params.gamma, *s, q))
            .sum::<f64>()
            + self.bias
    }

    /// Platt probability of the positive class for a decision value.
    pub fn platt(&self, f: f64) -> f64 {
        let v = self.platt_a * f + self.platt_b;
        let p = if v >= 0.0 {
            let e = (-v).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + v.exp())
        };
        p.clamp(1e-12, 1.0 - 1e-12)
    }
}

impl ProbabilityModel for SvmModel {
    fn probability(&self, p: Point) -> f64 {
        self.platt(self.decision(p))
    }
}

fn standardization(x: &[Point]) -> (Point, Point) {
    let mut center = [0.0; 2];
    let mut scale = [1.0; 2];
    for k in 0..2 {
        let v: Vec<f64> = x.iter().map(|p| p[k]).collect();
        center[k] = crate::stats::mean(&v);
        let sd = crate::stats::std_dev(&v);
        if sd > 0.0 && sd.is_finite() {
            scale[k] = sd;
        }
    }
    (center, scale)
}

fn standardize(p: Point, center: Point, scale: Point) -> Point {
    [(p[0] - center[0]) / scale[0], (p[1] - center[1]) / scale[1]]
}

fn rbf(gamma: f64, a: Point, b: Point) -> f64 {
    let d0 = a[0] - b[0];
    let d1 = a[1] - b[1];
    (-gamma * (d0 * d0 + d1 * d1)).exp()
}

/// Kernel rows computed on demand and kept until `capacity` rows are cached,
/// after which the oldest row is dropped.
struct RowCache {
    rows: Vec<Option<Box<[f64]>>>,
    order: std::collections::VecDeque<usize>,
    capacity: usize,
}

impl RowCache {
    fn new(n: usize, capacity: usize) -> Self {
        Self {
            rows: vec![None; n],
            order: Default::default(),
            capacity: capacity.max(2),
        }
    }
}

struct Solution {
    alpha: Vec<f64>,
    rho: f64,
    residual: f64,
    iterations: usize,
}

/// Sequential minimal optimization with second-order working-set selection
/// for `min ½αᵀQα − eᵀα`, `0 ≤ α ≤ C`, `yᵀα = 0`, `Q_ij = yᵢyⱼK(zᵢ, zⱼ)`.
struct Smo<'a> {
    z: &'a [Point],
    y: &'a [f64],
    gamma: f64,
    cache: RowCache,
}

impl Smo<'_> {
    /// Ensures row `i` of `K` is cached.
    fn load(&mut self, i: usize) {
        if self.cache.rows[i].is_some() {
            return;
        }
        if self.cache.order.len() >= self.cache.capacity {
            if let Some(old) = self.cache.order.pop_front() {
                self.cache.rows[old] = None;
            }
        }
        let zi = self.z[i];
        let row: Box<[f64]> = self.z.iter().map(|&zj| rbf(self.gamma, zi, zj)).collect();
        self.cache.rows[i] = Some(row);
        self.cache.order.push_back(i);
    }

    fn row(&self, i: usize) -> &[f64] {
        self.cache.rows[i].as_deref().expect("row loaded")
    }

    fn solve(&mut self, c: f64, tol: f64, max_iter: usize) -> Result<Solution> {
        const TAU: f64 = 1e-12;
        let n = self.z.len();
        let y = self.y;
        let mut alpha = vec![0.0; n];
        let mut grad = vec![-1.0; n];
        let up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
        let low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

        let mut iterations = 0;
        loop {
            // i maximizes −yᵢ∇ᵢ over the "up" set
            let mut g_max = f64::NEG_INFINITY;
            let mut i_sel = usize::MAX;
            for t in 0..n {
                if up(alpha[t], y[t]) && -y[t] * grad[t] >= g_max {
                    g_max = -y[t] * grad[t];
                    i_sel = t;
                }
            }
            let mut g_min = f64::INFINITY;
            for t in 0..n {
                if low(alpha[t], y[t]) {
                    g_min = g_min.min(-y[t] * grad[t]);
                }
            }
            let residual = g_max - g_min;
            if residual < tol || i_sel == usize::MAX {
                let rho = bias(&alpha, &grad, y, c);
                return Ok(Solution {
                    alpha,
                    rho,
                    residual: residual.max(0.0),
                    iterations,
                });
            }
            if iterations >= max_iter {
                return Err(Error::SvmNotConverged {
                    iterations,
                    residual,
                });
            }
            iterations += 1;

            let i = i_sel;
            self.load(i);
            let k_ii = 1.0;
            let mut j_sel = usize::MAX;
            let mut best = f64::INFINITY;
            {
                let ki = self.row(i);
                for t in 0..n {
                    if !low(alpha[t], y[t]) {
                        continue;
                    }
                    let b = g_max + y[t] * grad[t];
                    if b <= 0.0 {
                        continue;
                    }
                    let mut a = k_ii + 1.0 - 2.0 * ki[t];
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let obj = -(b * b) / a;
                    if obj <= best {
                        best = obj;
                        j_sel = t;
                    }
                }
            }
            let j = j_sel;
            if j == usize::MAX {
                let rho = bias(&alpha, &grad, y, c);
                return Ok(Solution {
                    alpha,
                    rho,
                    residual,
                    iterations,
                });
            }
            self.load(j);
            // loading j may have evicted i; with two or more slots j survives
            self.load(i);
            let k_ij = self.row(i)[j];

            let (old_i, old_j) = (alpha[i], alpha[j]);
            if y[i] != y[j] {
                let mut quad = 2.0 + 2.0 * k_ij;
                if quad <= 0.0 {
                    quad = TAU;
                }
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > 0.0 {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = c - diff;
                    }
                } else if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let mut quad = 2.0 - 2.0 * k_ij;
                if quad <= 0.0 {
                    quad = TAU;
                }
                let delta = (grad[i] - grad[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = sum - c;
                    }
                } else if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if sum > c {
                    if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = sum - c;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }

            let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
            let (ki, kj) = (self.row(i), self.row(j));
            for t in 0..n {
                grad[t] += y[t] * (y[i] * ki[t] * di + y[j] * kj[t] * dj);
            }
        }
    }
}

/// Offset `ρ` of the decision function `Σ αᵢyᵢK(zᵢ, ·) − ρ`, averaged over
/// free support vectors or taken mid-range when none are free.
fn bias(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum, mut free) = (0.0, 0usize);
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    if free > 0 {
        sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// Maximum-likelihood sigmoid fit with smoothed targets
/// `(n₊ + 1)/(n₊ + 2)` and `1/(n₋ + 2)`, by Newton's method with
/// backtracking.
pub(crate) fn platt_fit(f: &[f64], y: &[bool]) -> (f64, f64) {
    let n_pos = y.iter().filter(|&&b| b).count() as f64;
    let n_neg = y.len() as f64 - n_pos;
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    let target: Vec<f64> = y.iter().map(|&b| if b { hi } else { lo }).collect();
    let objective = |a: f64, b: f64| -> f64 {
        f.iter()
            .zip(&target)
            .map(|(&fi, &t)| {
                let v = fi * a + b;
                if v >= 0.0 {
                    t * v + (-v).exp().ln_1p()
                } else {
                    (t - 1.0) * v + v.exp().ln_1p()
                }
            })
            .sum()
    };
    let (mut a, mut b) = (0.0, ((n_neg + 1.0) / (n_pos + 1.0)).ln());
    let mut fval = objective(a, b);
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (1e-12, 1e-12, 0.0, 0.0, 0.0);
        for (&fi, &t) in f.iter().zip(&target) {
            let v = fi * a + b;
            let (p, q) = if v >= 0.0 {
                let e = (-v).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = v.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += fi * fi * d2;
            h22 += d2;
            h21 += fi * d2;
            let d1 = t - p;
            g1 += fi * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < 1e-10 {
            break;
        }
    }
    (a, b)
}
