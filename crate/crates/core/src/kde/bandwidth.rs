//! Bandwidth matrix selection for the bivariate Gaussian kernel.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::{covariance2, Point, Sym2};
use crate::optimize::{nelder_mead, NelderMeadOptions};

/// Symmetric positive-definite 2×2 smoothing matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Sym2", into = "Sym2")]
pub struct BandwidthMatrix(Sym2);

impl BandwidthMatrix {
    pub fn new(h: Sym2) -> Result<Self> {
        if h.is_spd() {
            Ok(Self(h))
        } else {
            Err(Error::InvalidInput(format!(
                "bandwidth matrix is not symmetric positive definite: {h:?}"
            )))
        }
    }

    pub fn matrix(&self) -> Sym2 {
        self.0
    }

    /// Per-axis kernel standard deviations `(√H₁₁, √H₂₂)`.
    pub fn axis_sd(&self) -> (f64, f64) {
        (self.0.a.sqrt(), self.0.d.sqrt())
    }
}

impl TryFrom<Sym2> for BandwidthMatrix {
    type Error = Error;
    fn try_from(h: Sym2) -> Result<Self> {
        Self::new(h)
    }
}

impl From<BandwidthMatrix> for Sym2 {
    fn from(h: BandwidthMatrix) -> Sym2 {
        h.0
    }
}

const DIM: f64 = 2.0;

fn distinct_count_at_least(points: &[Point], k: usize) -> bool {
    let mut seen: Vec<Point> = Vec::with_capacity(k);
    for p in points {
        if !seen.contains(p) {
            seen.push(*p);
            if seen.len() >= k {
                return true;
            }
        }
    }
    false
}

fn checked_covariance(points: &[Point]) -> Result<Sym2> {
    if !distinct_count_at_least(points, 3) {
        return Err(Error::Numerical(
            "bandwidth selection needs at least 3 distinct points".into(),
        ));
    }
    let cov = covariance2(points);
    if !(cov.det() > 1e-12 * cov.a * cov.d) || !cov.is_spd() {
        return Err(Error::Numerical(
            "sample covariance is singular: the points are collinear".into(),
        ));
    }
    Ok(cov)
}

/// Normal-reference rule `H = n^(−2/(d+4)) (4/(d+2))^(2/(d+4)) Σ̂`.
pub fn normal_scale_bandwidth(points: &[Point]) -> Result<BandwidthMatrix> {
    let cov = checked_covariance(points)?;
    let n = points.len() as f64;
    let factor = n.powf(-2.0 / (DIM + 4.0)) * (4.0 / (DIM + 2.0)).powf(2.0 / (DIM + 4.0));
    BandwidthMatrix::new(cov.scale(factor))
}

/// Normal-reference pilot `G = (2 / ((d+4) n))^(2/(d+6)) Σ̂` used inside the
/// smoothed cross-validation criterion.
pub fn scv_pilot(points: &[Point]) -> Result<Sym2> {
    let cov = checked_covariance(points)?;
    let n = points.len() as f64;
    Ok(cov.scale((2.0 / ((DIM + 4.0) * n)).powf(2.0 / (DIM + 6.0))))
}

/// Smoothed cross-validation criterion for Gaussian kernels, up to an
/// additive constant that does not depend on `h`:
///
/// `n⁻¹ (4π)⁻¹ |H|^(−1/2) + n⁻² Σᵢ Σⱼ [φ(2H+2G) − 2 φ(H+2G)](Xᵢ − Xⱼ)`.
pub fn scv_objective(points: &[Point], h: &Sym2, g: &Sym2, exec: Execution) -> f64 {
    let n = points.len();
    let nf = n as f64;
    let a = h.scale(2.0).add(&g.scale(2.0));
    let b = h.add(&g.scale(2.0));
    let (Some(a_inv), Some(b_inv)) = (a.inverse(), b.inverse()) else {
        return f64::INFINITY;
    };
    let (det_h, det_a, det_b) = (h.det(), a.det(), b.det());
    if !(det_h > 0.0 && det_a > 0.0 && det_b > 0.0) {
        return f64::INFINITY;
    }
    let partial = exec.map(n, |i| {
        let xi = points[i];
        let mut sa = 0.0;
        let mut sb = 0.0;
        for xj in &points[i + 1..] {
            let d = [xi[0] - xj[0], xi[1] - xj[1]];
            sa += (-0.5 * a_inv.quad(d)).exp();
            sb += (-0.5 * b_inv.quad(d)).exp();
        }
        (sa, sb)
    });
    let (sa, sb) = partial
        .into_iter()
        .fold((0.0, 0.0), |(x, y), (a, b)| (x + a, y + b));
    // the i = j terms contribute exp(0) = 1 each
    let pair_a = (nf + 2.0 * sa) / (2.0 * PI * det_a.sqrt());
    let pair_b = (nf + 2.0 * sb) / (2.0 * PI * det_b.sqrt());
    1.0 / (nf * 4.0 * PI * det_h.sqrt()) + (pair_a - 2.0 * pair_b) / (nf * nf)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthMethod {
    SmoothedCrossValidation,
    NormalScale,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandwidthSelection {
    pub h: BandwidthMatrix,
    pub method: BandwidthMethod,
    pub warning: Option<String>,
    /// Points the criterion was evaluated on.
    pub n_used: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct ScvOptions {
    /// Below this many points the normal-scale rule is used instead.
    pub min_points: usize,
    /// The criterion is evaluated on at most this many points (the first
    /// ones; callers pass exchangeable samples).
    pub max_points: usize,
    pub optimizer: NelderMeadOptions,
}

impl Default for ScvOptions {
    fn default() -> Self {
        Self {
            min_points: 50,
            max_points: 2000,
            optimizer: NelderMeadOptions {
                initial_step: 0.3,
                f_tol: 1e-9,
                x_tol: 1e-3,
                max_evals: 300,
            },
        }
    }
}

pub fn scv_bandwidth(points: &[Point]) -> Result<BandwidthSelection> {
    scv_bandwidth_with(points, &ScvOptions::default(), Execution::default())
}

/// Minimizes the SCV criterion over SPD matrices `H = L₀ M Mᵀ L₀ᵀ`, where
/// `L₀` is the Cholesky factor of the normal-scale bandwidth and `M` is lower
/// triangular with log-parameterized diagonal. Nelder–Mead starts at `M = I`.
pub fn scv_bandwidth_with(
    points: &[Point],
    opts: &ScvOptions,
    exec: Execution,
) -> Result<BandwidthSelection> {
    let sample = &points[..points.len().min(opts.max_points)];
    let h_ns = normal_scale_bandwidth(sample)?;
    if sample.len() < opts.min_points {
        let msg = format!(
            "{} points is below the SCV minimum of {}; using the normal-scale rule",
            sample.len(),
            opts.min_points
        );
        log::warn!("{msg}");
        return Ok(BandwidthSelection {
            h: normal_scale_bandwidth(points)?,
            method: BandwidthMethod::NormalScale,
            warning: Some(msg),
            n_used: sample.len(),
            evaluations: 0,
        });
    }
    let g = scv_pilot(sample)?;
    let (l11, l21, l22) = h_ns.matrix().cholesky().expect("SPD");
    let to_h = |p: &[f64]| -> Sym2 {
        // L = L₀ · M, M = [[e^p0, 0], [p1, e^p2]]
        let (m11, m21, m22) = (p[0].exp(), p[1], p[2].exp());
        let a11 = l11 * m11;
        let a21 = l21 * m11 + l22 * m21;
        let a22 = l22 * m22;
        Sym2::from_cholesky(a11, a21, a22)
    };
    let objective = |p: &[f64]| scv_objective(sample, &to_h(p), &g, exec);
    let min = nelder_mead(objective, &[0.0, 0.0, 0.0], &opts.optimizer);

    let n_used = sample.len();
    let rescale = |h: Sym2| -> Sym2 {
        // the optimum was found on `n_used` points; carry it to the full
        // sample with the n^(-1/3) rate of the criterion
        let ratio = (points.len() as f64 / n_used as f64).powf(-2.0 / (DIM + 4.0));
        h.scale(ratio)
    };

    if !(min.f < min.f_start) {
        let msg = "SCV optimizer did not improve on the normal-scale start".to_string();
        log::warn!("{msg}");
        return Ok(BandwidthSelection {
            h: BandwidthMatrix::new(rescale(h_ns.matrix()))?,
            method: BandwidthMethod::NormalScale,
            warning: Some(msg),
            n_used,
            evaluations: min.evaluations,
        });
    }
    let warning = (!min.converged).then(|| {
        format!(
            "SCV optimizer stopped at the evaluation cap ({}) before meeting its tolerance",
            min.evaluations
        )
    });
    Ok(BandwidthSelection {
        h: BandwidthMatrix::new(rescale(to_h(&min.x)))?,
        method: BandwidthMethod::SmoothedCrossValidation,
        warning,
        n_used,
        evaluations: min.evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn std_normal_points(n: usize, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)])
            .collect()
    }

    #[test]
    fn normal_scale_on_standard_normal() {
        let n = 10_000;
        let pts = std_normal_points(n, 1);
        let h = normal_scale_bandwidth(&pts).unwrap().matrix();
        let expect = (n as f64).powf(-1.0 / 3.0);
        assert!((h.a / expect - 1.0).abs() < 0.1);
        assert!((h.d / expect - 1.0).abs() < 0.1);
        assert!(h.b.abs() < 0.1 * expect);
    }

    #[test]
    fn normal_scale_scales_quadratically() {
        let pts = std_normal_points(500, 2);
        let s = 7.0;
        let scaled: Vec<Point> = pts.iter().map(|p| [p[0] * s, p[1] * s]).collect();
        let h1 = normal_scale_bandwidth(&pts).unwrap().matrix();
        let h2 = normal_scale_bandwidth(&scaled).unwrap().matrix();
        assert!((h2.a / h1.a - s * s).abs() < 1e-9 * s * s);
        assert!((h2.d / h1.d - s * s).abs() < 1e-9 * s * s);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert!(normal_scale_bandwidth(&[[0.0, 0.0], [1.0, 1.0]]).is_err());
        let line: Vec<Point> = (0..10).map(|i| [i as f64, 2.0 * i as f64]).collect();
        let err = normal_scale_bandwidth(&line).unwrap_err();
        assert!(err.to_string().contains("collinear"));
    }

    #[test]
    fn small_sample_falls_back_to_normal_scale() {
        let pts = std_normal_points(10, 3);
        let sel = scv_bandwidth(&pts).unwrap();
        assert_eq!(sel.method, BandwidthMethod::NormalScale);
        assert!(sel.warning.is_some());
        assert_eq!(sel.h, normal_scale_bandwidth(&pts).unwrap());
    }

    #[test]
    fn bandwidth_matrix_rejects_non_spd() {
        assert!(BandwidthMatrix::new(Sym2::new(1.0, 2.0, 1.0)).is_err());
        assert!(BandwidthMatrix::new(Sym2::new(-1.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn objective_is_finite_and_penalizes_extremes() {
        let pts = std_normal_points(300, 4);
        let g = scv_pilot(&pts).unwrap();
        let h_ns = normal_scale_bandwidth(&pts).unwrap().matrix();
        let mid = scv_objective(&pts, &h_ns, &g, Execution::Sequential);
        let tiny = scv_objective(&pts, &h_ns.scale(1e-4), &g, Execution::Sequential);
        let huge = scv_objective(&pts, &h_ns.scale(1e3), &g, Execution::Sequential);
        assert!(mid.is_finite());
        assert!(mid < tiny && mid < huge);
    }
}
