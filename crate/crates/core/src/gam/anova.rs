use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};

use super::backfit::GamModel;

/// Approximate F comparison of two additive models fitted to the same rows.
/// The models need not be nested, so the p-value is a heuristic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub rss_a: f64,
    pub rss_b: f64,
    pub df_a: f64,
    pub df_b: f64,
    pub n: usize,
    pub f: f64,
    pub p_value: f64,
    pub note: String,
}

const NOTE: &str = "approximate: models need not be nested";
const DF_TOL: f64 = 1e-9;

/// `F = ((RSS_a − RSS_b)/(df_b − df_a)) / (RSS_b/(n − df_b))` on
/// `(df_b − df_a, n − df_b)` degrees of freedom, with `a` the smaller model.
pub fn anova_compare(a: &GamModel, b: &GamModel) -> Result<AnovaResult> {
    if a.n != b.n || a.data_hash != b.data_hash {
        return Err(Error::InvalidInput(
            "ANOVA models were not fitted to the same rows".into(),
        ));
    }
    let (df_a, df_b) = (a.df(), b.df());
    let result = |f: f64, p_value: f64| AnovaResult {
        rss_a: a.rss,
        rss_b: b.rss,
        df_a,
        df_b,
        n: a.n,
        f,
        p_value,
        note: NOTE.to_string(),
    };
    let same_fit = (a.rss - b.rss).abs() <= 1e-12 * a.rss.max(b.rss).max(f64::MIN_POSITIVE);
    if (df_b - df_a).abs() <= DF_TOL && same_fit {
        return Ok(result(0.0, 1.0));
    }
    if df_b <= df_a + DF_TOL {
        return Err(Error::InvalidInput(format!(
            "ANOVA needs the first model to be smaller: df {df_a:.3} vs {df_b:.3}"
        )));
    }
    let d2 = a.n as f64 - df_b;
    if d2 <= 0.0 {
        return Err(Error::Numerical(format!(
            "no residual degrees of freedom left (n = {}, df = {df_b:.3})",
            a.n
        )));
    }
    if b.rss >= a.rss {
        return Ok(result(0.0, 1.0));
    }
    let d1 = df_b - df_a;
    if b.rss <= 0.0 {
        return Ok(result(f64::INFINITY, 0.0));
    }
    let f = ((a.rss - b.rss) / d1) / (b.rss / d2);
    let dist = FisherSnedecor::new(d1, d2).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(result(f, dist.sf(f)))
}
