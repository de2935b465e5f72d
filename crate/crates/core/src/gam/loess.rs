use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Local linear regression with tricube weights.
///
/// For span `α ≤ 1` each neighbourhood holds the `⌈α n⌉` nearest training
/// values; for `α > 1` it holds all of them and the maximum distance is
/// inflated by `α` (the one-predictor case of `α^(1/p)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Loess {
    pub span: f64,
    /// Training values, sorted ascending.
    x: Vec<f64>,
    /// Responses aligned with `x`.
    y: Vec<f64>,
}

/// Equivalent-kernel weights of one fitted value: `ŷ(x₀) = Σ w_k y_{start+k}`
/// over the sorted training values.
#[derive(Debug, Clone)]
struct Row {
    start: usize,
    weights: Vec<f64>,
}

fn check_span(span: f64) -> Result<()> {
    if !(span > 0.0 && span.is_finite()) {
        return Err(Error::InvalidInput(format!("loess span must be > 0, got {span}")));
    }
    Ok(())
}

/// Window `[start, end)` of `sorted` forming the neighbourhood of `x0`, and
/// the distance at which tricube weights reach zero.
fn neighbourhood(sorted: &[f64], span: f64, x0: f64) -> (usize, usize, f64) {
    let n = sorted.len();
    if span > 1.0 {
        let far = (x0 - sorted[0]).abs().max((sorted[n - 1] - x0).abs());
        (0, n, far * span)
    } else {
        let q = ((span * n as f64).ceil() as usize).clamp(2.min(n), n);
        // grow a window of q nearest values around the insertion point
        let pos = sorted.partition_point(|&v| v < x0);
        let (mut lo, mut hi) = (pos, pos);
        while hi - lo < q {
            let take_left = if lo == 0 {
                false
            } else if hi == n {
                true
            } else {
                x0 - sorted[lo - 1] <= sorted[hi] - x0
            };
            if take_left {
                lo -= 1;
            } else {
                hi += 1;
            }
        }
        let far = (x0 - sorted[lo]).abs().max((sorted[hi - 1] - x0).abs());
        // extend over ties at the window edges so equal values are treated alike
        while lo > 0 && (x0 - sorted[lo - 1]).abs() <= far && sorted[lo - 1] == sorted[lo] {
            lo -= 1;
        }
        while hi < n && (sorted[hi] - x0).abs() <= far && sorted[hi] == sorted[hi - 1] {
            hi += 1;
        }
        (lo, hi, far)
    }
}

/// Equivalent-kernel row for query `x0` over `sorted` training values.
fn row(sorted: &[f64], span: f64, x0: f64) -> Row {
    let (start, end, max_dist) = neighbourhood(sorted, span, x0);
    let xs = &sorted[start..end];
    let mut w: Vec<f64> = if max_dist > 0.0 {
        xs.iter()
            .map(|&v| {
                let u = (v - x0).abs() / max_dist;
                if u < 1.0 {
                    let a = 1.0 - u * u * u;
                    a * a * a
                } else {
                    0.0
                }
            })
            .collect()
    } else {
        vec![1.0; xs.len()]
    };
    if w.iter().all(|&v| v == 0.0) {
        // only the farthest neighbours exist at the cut-off distance
        w.iter_mut().for_each(|v| *v = 1.0);
    }
    let total: f64 = w.iter().sum();
    let mean = xs.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() / total;
    let sxx: f64 = xs.iter().zip(&w).map(|(x, w)| w * (x - mean).powi(2)).sum();
    let spread = xs[xs.len() - 1] - xs[0];
    let weights = if sxx > 1e-12 * total * spread.max(f64::MIN_POSITIVE).powi(2) && spread > 0.0 {
        xs.iter()
            .zip(&w)
            .map(|(x, wi)| wi / total + (x0 - mean) * wi * (x - mean) / sxx)
            .collect()
    } else {
        // no spread in the neighbourhood: weighted mean
        w.iter().map(|wi| wi / total).collect()
    };
    Row { start, weights }
}

/// Dot product with independent partial sums, which lets the compiler
/// vectorize the loop.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// Loess on fixed training values as a linear operator on responses.
#[derive(Debug, Clone)]
pub(crate) struct LoessSmoother {
    span: f64,
    sorted: Vec<f64>,
    /// Position of training row `i` in `sorted`.
    rank: Vec<usize>,
    rows: Vec<Row>,
}

impl LoessSmoother {
    pub fn new(x: &[f64], span: f64) -> Result<Self> {
        check_span(span)?;
        if x.len() < 3 {
            return Err(Error::InvalidInput("loess needs at least 3 points".into()));
        }
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
        let sorted: Vec<f64> = order.iter().map(|&i| x[i]).collect();
        let mut rank = vec![0; x.len()];
        for (pos, &i) in order.iter().enumerate() {
            rank[i] = pos;
        }
        // fitted values are computed once per distinct sorted value
        let mut rows: Vec<Row> = Vec::with_capacity(sorted.len());
        for pos in 0..sorted.len() {
            if pos > 0 && sorted[pos] == sorted[pos - 1] {
                let prev = rows[pos - 1].clone();
                rows.push(prev);
            } else {
                rows.push(row(&sorted, span, sorted[pos]));
            }
        }
        Ok(Self {
            span,
            sorted,
            rank,
            rows,
        })
    }

    fn to_sorted(&self, y: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; y.len()];
        for (i, &v) in y.iter().enumerate() {
            s[self.rank[i]] = v;
        }
        s
    }

    pub fn smooth(&self, y: &[f64]) -> Vec<f64> {
        let ys = self.to_sorted(y);
        (0..y.len())
            .map(|i| {
                let r = &self.rows[self.rank[i]];
                dot(&r.weights, &ys[r.start..r.start + r.weights.len()])
            })
            .collect()
    }

    /// Exact trace of the hat operator.
    pub fn trace(&self) -> f64 {
        (0..self.sorted.len())
            .map(|pos| {
                let r = &self.rows[pos];
                r.weights[pos - r.start]
            })
            .sum()
    }

    /// Freezes the operator applied to `y` into a predictor.
    pub fn freeze(&self, y: &[f64]) -> Loess {
        Loess {
            span: self.span,
            x: self.sorted.clone(),
            y: self.to_sorted(y),
        }
    }
}

impl Loess {
    pub fn fit(x: &[f64], y: &[f64], span: f64) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidInput("x and y lengths differ".into()));
        }
        Ok(LoessSmoother::new(x, span)?.freeze(y))
    }

    pub fn predict(&self, x0: f64) -> f64 {
        let r = row(&self.x, self.span, x0);
        dot(&r.weights, &self.y[r.start..r.start + r.weights.len()])
    }
}

/// Fitted values of a loess smooth of `y` on `x` at the training points.
pub fn loess_smooth(x: &[f64], y: &[f64], span: f64) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput("x and y lengths differ".into()));
    }
    Ok(LoessSmoother::new(x, span)?.smooth(y))
}
