use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::quantile_sorted;

/// Natural cubic spline basis without the constant term.
///
/// With knots `ξ₁ < … < ξ_K` (the two boundary knots included) the basis is
/// `x` and `d_k(x) − d_{K−1}(x)` for `k = 1 … K − 2`, where
/// `d_k(x) = ((x − ξ_k)³₊ − (x − ξ_K)³₊) / (ξ_K − ξ_k)`. Every member is
/// linear left of `ξ₁` and right of `ξ_K`. `x` is mapped to `[0, 1]` by the
/// boundary knots first to keep the cubes well scaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineBasis {
    /// Interior knots, at equally spaced quantiles of the training values.
    pub interior: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
}

impl SplineBasis {
    pub fn new(x: &[f64], n_knots: usize) -> Result<Self> {
        let mut sorted = x.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut distinct = sorted.clone();
        distinct.dedup();
        if distinct.len() < n_knots + 2 {
            return Err(Error::InvalidInput(format!(
                "natural spline with {n_knots} interior knots needs at least {} distinct values, got {}",
                n_knots + 2,
                distinct.len()
            )));
        }
        let lower = sorted[0];
        let upper = sorted[sorted.len() - 1];
        let interior: Vec<f64> = (1..=n_knots)
            .map(|k| quantile_sorted(&sorted, k as f64 / (n_knots + 1) as f64))
            .collect();
        let mut all = vec![lower];
        all.extend(&interior);
        all.push(upper);
        if all.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!(
                "quantile knots {all:?} are not strictly increasing; too many tied values"
            )));
        }
        Ok(Self {
            interior,
            lower,
            upper,
        })
    }

    pub fn dimension(&self) -> usize {
        self.interior.len() + 1
    }

    fn scaled_knots(&self) -> Vec<f64> {
        let mut k = vec![0.0];
        k.extend(self.interior.iter().map(|&v| self.scale(v)));
        k.push(1.0);
        k
    }

    fn scale(&self, x: f64) -> f64 {
        (x - self.lower) / (self.upper - self.lower)
    }

    /// Basis values at `x`, `dimension()` entries.
    pub fn eval(&self, x: f64) -> Vec<f64> {
        let knots = self.scaled_knots();
        let u = self.scale(x);
        let last = knots.len() - 1;
        let cube = |v: f64| if v > 0.0 { v * v * v } else { 0.0 };
        let d = |k: usize| (cube(u - knots[k]) - cube(u - knots[last])) / (knots[last] - knots[k]);
        let mut out = Vec::with_capacity(self.dimension());
        out.push(u);
        if last >= 2 {
            let d_end = d(last - 1);
            for k in 0..last - 1 {
                out.push(d(k) - d_end);
            }
        }
        out
    }

    /// `n × (dimension + 1)` design matrix with a leading column of ones.
    pub fn design(&self, x: &[f64]) -> DMatrix<f64> {
        let p = self.dimension() + 1;
        let mut m = DMatrix::zeros(x.len(), p);
        for (i, &xi) in x.iter().enumerate() {
            m[(i, 0)] = 1.0;
            for (k, v) in self.eval(xi).into_iter().enumerate() {
                m[(i, k + 1)] = v;
            }
        }
        m
    }
}

/// Least-squares projection onto `span{1, basis}` on fixed training values.
#[derive(Debug, Clone)]
pub(crate) struct SplineSmoother {
    pub basis: SplineBasis,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl SplineSmoother {
    pub fn new(x: &[f64], n_knots: usize) -> Result<Self> {
        let basis = SplineBasis::new(x, n_knots)?;
        let design = basis.design(x);
        let qr = design.qr();
        let r = qr.r();
        let diag_max = (0..r.nrows()).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        if (0..r.nrows()).any(|i| r[(i, i)].abs() <= 1e-10 * diag_max) {
            return Err(Error::Numerical(format!(
                "spline design with {n_knots} knots is rank deficient"
            )));
        }
        Ok(Self {
            basis,
            q: qr.q(),
            r,
        })
    }

    pub fn smooth(&self, y: &[f64]) -> Vec<f64> {
        let yv = DVector::from_column_slice(y);
        let qty = self.q.tr_mul(&yv);
        (&self.q * qty).iter().copied().collect()
    }

    /// Coefficients on `[1, basis]`.
    pub fn coefficients(&self, y: &[f64]) -> Vec<f64> {
        let qty = self.q.tr_mul(&DVector::from_column_slice(y));
        self.r
            .solve_upper_triangular(&qty)
            .expect("full-rank triangular factor")
            .iter()
            .copied()
            .collect()
    }

    pub fn trace(&self) -> f64 {
        self.q.ncols() as f64
    }
}

pub(crate) fn spline_value(basis: &SplineBasis, coef: &[f64], x: f64) -> f64 {
    coef[0]
        + basis
            .eval(x)
            .iter()
            .zip(&coef[1..])
            .map(|(b, c)| b * c)
            .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xs(n: usize) -> Vec<f64> {
        (0..n).map(|i| ((i * 7919) % n) as f64 * 0.1 + (i as f64 * 0.37).sin()).collect()
    }

    #[test]
    fn lines_lie_in_the_span() {
        let x = xs(60);
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v + 1.0).collect();
        for k in [0, 2, 5, 8] {
            let s = SplineSmoother::new(&x, k).unwrap();
            let fit = s.smooth(&y);
            for (a, b) in fit.iter().zip(&y) {
                assert!((a - b).abs() < 1e-8, "{k} knots: {a} vs {b}");
            }
        }
    }

    #[test]
    fn dimension_is_knots_plus_one_and_full_rank() {
        let x = xs(80);
        for k in 0..=8 {
            let basis = SplineBasis::new(&x, k).unwrap();
            assert_eq!(basis.dimension(), k + 1);
            let design = basis.design(&x);
            let rank = design.svd(false, false).rank(1e-9);
            assert_eq!(rank, k + 2);
        }
    }

    #[test]
    fn fitted_function_is_linear_beyond_boundaries() {
        let x = xs(100);
        let y: Vec<f64> = x.iter().map(|v| (v * 0.8).sin() * 5.0 + v * v * 0.1).collect();
        let s = SplineSmoother::new(&x, 6).unwrap();
        let coef = s.coefficients(&y);
        let f = |v: f64| spline_value(&s.basis, &coef, v);
        let range = s.basis.upper - s.basis.lower;
        let h = range / 1000.0;
        for edge in [s.basis.lower - 3.0 * h, s.basis.upper + 3.0 * h, s.basis.upper + 0.5 * range] {
            let second = f(edge + h) - 2.0 * f(edge) + f(edge - h);
            let slope = (f(edge + h) - f(edge - h)) / (2.0 * h);
            assert!(second.abs() <= 1e-6 * slope.abs(), "{second} vs slope {slope}");
        }
    }

    #[test]
    fn too_few_distinct_values() {
        let x = vec![1.0, 1.0, 2.0, 2.0, 3.0];
        assert!(SplineBasis::new(&x, 2).is_err());
        assert!(SplineBasis::new(&x, 1).is_ok());
    }
}
