use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{covariance2, mean2, Point, Sym2};

use super::{require_two_classes, ProbabilityModel};

/// Ridge factor applied to ill-conditioned class covariances.
const RIDGE: f64 = 1e-6;
const MAX_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QdaClass {
    pub prior: f64,
    pub mean: Point,
    pub covariance: Sym2,
    /// Whether a ridge was added to make `covariance` well conditioned.
    pub regularized: bool,
    #[serde(skip)]
    inverse: Sym2,
    #[serde(skip)]
    log_norm: f64,
}

/// Gaussian class-conditional classifier; `classes[0]` is the negative class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QdaModel {
    pub classes: [QdaClass; 2],
}

pub fn qda_fit(x: &[Point], y: &[bool]) -> Result<QdaModel> {
    require_two_classes(y, "QDA")?;
    let n = y.len() as f64;
    let class = |label: bool| -> Result<QdaClass> {
        let pts: Vec<Point> = x
            .iter()
            .zip(y)
            .filter(|(_, &l)| l == label)
            .map(|(p, _)| *p)
            .collect();
        if pts.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "QDA needs at least 3 points per class, class {} has {}",
                label as u8,
                pts.len()
            )));
        }
        let mean = mean2(&pts);
        let mut cov = covariance2(&pts);
        let mut regularized = false;
        if !(cov.condition_number() <= MAX_CONDITION) {
            let ridge = RIDGE * cov.trace() / 2.0;
            cov = cov.add_ridge(if ridge > 0.0 { ridge } else { RIDGE });
            regularized = true;
        }
        let inverse = cov.inverse().ok_or_else(|| {
            Error::Numerical(format!("class {} covariance is singular", label as u8))
        })?;
        Ok(QdaClass {
            prior: pts.len() as f64 / n,
            mean,
            covariance: cov,
            regularized,
            inverse,
            log_norm: -0.5 * cov.det().ln(),
        })
    };
    Ok(QdaModel {
        classes: [class(false)?, class(true)?],
    })
}

impl QdaModel {
    /// Posterior `[P(negative | x), P(positive | x)]`, normalized in log space.
    pub fn predict_proba(&self, p: Point) -> [f64; 2] {
        let score = |k: &QdaClass| {
            let d = [p[0] - k.mean[0], p[1] - k.mean[1]];
            k.prior.ln() + k.log_norm - 0.5 * k.inverse.quad(d)
        };
        let s0 = score(&self.classes[0]);
        let s1 = score(&self.classes[1]);
        let m = s0.max(s1);
        let (e0, e1) = ((s0 - m).exp(), (s1 - m).exp());
        [e0 / (e0 + e1), e1 / (e0 + e1)]
    }

    /// Restores the cached inverses after deserialization.
    pub fn refresh(mut self) -> Result<Self> {
        for k in &mut self.classes {
            k.inverse = k
                .covariance
                .inverse()
                .ok_or_else(|| Error::Numerical("class covariance is singular".into()))?;
            k.log_norm = -0.5 * k.covariance.det().ln();
        }
        Ok(self)
    }
}

impl ProbabilityModel for QdaModel {
    fn probability(&self, p: Point) -> f64 {
        self.predict_proba(p)[1]
    }
}
