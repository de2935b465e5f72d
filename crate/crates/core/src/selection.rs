//! k-fold and nested cross-validation over any trainable model family.
//!
//! A [`Family`] owns its data and knows how to fit a model on a subset of
//! rows and score it on another. [`nested_cv`] runs an inner k-fold search
//! over a parameter grid inside each outer training portion and scores the
//! winner on the outer test fold, which the inner search never saw.

use std::fmt::Debug;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::simulation::derive_seed;
use crate::stats;

pub const DEFAULT_FOLDS: usize = 5;

/// Salt separating inner-loop fold seeds from outer ones.
const INNER_SALT: u64 = 0x5EED_1AAE_0F01_D5ED;

/// A model family whose members are indexed by `Params`.
///
/// `loss` is the mean per-row loss: misclassification rate for classifiers,
/// squared error for regressors.
pub trait Family: Sync {
    type Params: Clone + Debug + Serialize + Send + Sync;
    type Model: Send;

    fn id(&self) -> String;
    fn len(&self) -> usize;
    fn fit(&self, rows: &[usize], params: &Self::Params, seed: u64) -> Result<Self::Model>;
    fn loss(&self, model: &Self::Model, rows: &[usize]) -> f64;

    /// Binary class labels to stratify folds on, if any.
    fn strata(&self) -> Option<&[bool]> {
        None
    }
}

/// Assignment of rows `0..n` to `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub stratified: bool,
    pub assignment: Vec<usize>,
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k < 2 || k > n {
        return Err(Error::InvalidInput(format!(
            "fold count must satisfy 2 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    Ok(())
}

/// Shuffles `0..n` and deals the shuffled rows to folds in turn.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    check_k(n, k)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        assignment[row] = pos % k;
    }
    Ok(FoldPlan {
        n,
        k,
        seed,
        stratified: false,
        assignment,
    })
}

/// Like [`kfold_split`], but deals the shuffled positives first and then the
/// negatives with one running counter, so every fold receives its share of
/// each class to within one row.
pub fn stratified_kfold_split(labels: &[bool], k: usize, seed: u64) -> Result<FoldPlan> {
    let n = labels.len();
    check_k(n, k)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![0; n];
    let mut counter = 0;
    for class in [true, false] {
        for &row in order.iter().filter(|&&r| labels[r] == class) {
            assignment[row] = counter % k;
            counter += 1;
        }
    }
    Ok(FoldPlan {
        n,
        k,
        seed,
        stratified: true,
        assignment,
    })
}

impl FoldPlan {
    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.n).filter(|&r| self.assignment[r] == fold).collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.n).filter(|&r| self.assignment[r] != fold).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &f in &self.assignment {
            s[f] += 1;
        }
        s
    }
}

fn plan_for<F: Family + ?Sized>(family: &F, rows: &[usize], k: usize, seed: u64) -> Result<FoldPlan> {
    match family.strata() {
        Some(labels) => {
            let sub: Vec<bool> = rows.iter().map(|&r| labels[r]).collect();
            stratified_kfold_split(&sub, k, seed)
        }
        None => kfold_split(rows.len(), k, seed),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub mean: f64,
    pub fold_scores: Vec<f64>,
}

impl CvResult {
    fn from_scores(fold_scores: Vec<f64>) -> Self {
        Self {
            mean: stats::mean(&fold_scores),
            fold_scores,
        }
    }
}

/// Cross-validates `params` over the rows listed in `rows`, with `plan`
/// indexing positions of `rows`. Fold `f` is fitted with seed
/// `derive_seed(seed, f)`.
fn cv_on<F: Family + ?Sized>(
    family: &F,
    rows: &[usize],
    params: &F::Params,
    plan: &FoldPlan,
    seed: u64,
) -> Result<CvResult> {
    let mut scores = Vec::with_capacity(plan.k);
    for fold in 0..plan.k {
        let train: Vec<usize> = plan.train_rows(fold).iter().map(|&p| rows[p]).collect();
        let test: Vec<usize> = plan.test_rows(fold).iter().map(|&p| rows[p]).collect();
        let model = family
            .fit(&train, params, derive_seed(seed, fold as u64))
            .map_err(|e| Error::FoldFailed {
                fold,
                source: Box::new(e),
            })?;
        scores.push(family.loss(&model, &test));
    }
    Ok(CvResult::from_scores(scores))
}

/// Plain k-fold estimate of the loss of `params` over all rows.
pub fn cross_validate<F: Family + ?Sized>(
    family: &F,
    params: &F::Params,
    plan: &FoldPlan,
    seed: u64,
) -> Result<CvResult> {
    if plan.n != family.len() {
        return Err(Error::InvalidInput(format!(
            "fold plan covers {} rows but the data has {}",
            plan.n,
            family.len()
        )));
    }
    let rows: Vec<usize> = (0..family.len()).collect();
    cv_on(family, &rows, params, plan, seed)
}

/// One outer round of nested cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterFold {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    /// Inner CV error of every grid entry; `None` where fitting failed.
    pub inner_errors: Vec<Option<f64>>,
    /// Grid index with the lowest inner error.
    pub chosen: usize,
    pub outer_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub family: String,
    pub grid: Vec<serde_json::Value>,
    pub k_outer: usize,
    pub k_inner: usize,
    pub seed: u64,
    pub n: usize,
    pub folds: Vec<OuterFold>,
    pub outer_error_mean: f64,
    pub outer_error_sd: f64,
    /// Mean over outer folds of the winning inner error.
    pub inner_selected_mean: f64,
    /// Grid index chosen most often across outer folds (lowest index on ties),
    /// used to fit the deployed model.
    pub final_choice: usize,
}

impl SelectionReport {
    pub fn final_params(&self) -> &serde_json::Value {
        &self.grid[self.final_choice]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Flat table with one row per (outer fold, grid entry); `outer_error` is
    /// filled for the entry selected in that fold.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["outer_fold", "params", "inner_error", "outer_error", "selected"])?;
        for f in &self.folds {
            for (g, params) in self.grid.iter().enumerate() {
                let selected = g == f.chosen;
                w.write_record([
                    f.fold.to_string(),
                    params.to_string(),
                    f.inner_errors[g].map(crate::dataset::fmt_sig9).unwrap_or_default(),
                    if selected {
                        crate::dataset::fmt_sig9(f.outer_error)
                    } else {
                        String::new()
                    },
                    (selected as u8).to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<selection csv>", e))?;
        Ok(())
    }
}

/// Nested cross-validation of `grid`, ordered from the simplest to the most
/// flexible setting; ties go to the earlier entry.
///
/// Outer fold `f` uses the plan `(k_outer, seed)` and refits the winner with
/// seed `derive_seed(seed, f)`, exactly as [`cross_validate`] would, so a
/// one-entry grid reproduces plain k-fold CV.
pub fn nested_cv<F: Family + ?Sized>(
    family: &F,
    grid: &[F::Params],
    k_outer: usize,
    k_inner: usize,
    seed: u64,
    exec: Execution,
) -> Result<SelectionReport> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("parameter grid is empty".into()));
    }
    let n = family.len();
    let all: Vec<usize> = (0..n).collect();
    let outer = plan_for(family, &all, k_outer, seed)?;
    let mut folds = Vec::with_capacity(k_outer);
    for fold in 0..k_outer {
        let train = outer.train_rows(fold);
        let test = outer.test_rows(fold);
        let inner_seed = derive_seed(seed ^ INNER_SALT, fold as u64);
        let inner = plan_for(family, &train, k_inner, inner_seed)
            .map_err(|e| Error::FoldFailed {
                fold,
                source: Box::new(e),
            })?;
        // fold-major so that per-fold work inside a family can be shared
        // across grid entries; an entry that fails in any inner fold is
        // dropped from this outer fold's comparison
        let mut totals = vec![0.0f64; grid.len()];
        let mut first_failure = None;
        for inner_fold in 0..k_inner {
            let fit_rows: Vec<usize> = inner.train_rows(inner_fold).iter().map(|&p| train[p]).collect();
            let score_rows: Vec<usize> = inner.test_rows(inner_fold).iter().map(|&p| train[p]).collect();
            let fit_seed = derive_seed(inner_seed, inner_fold as u64);
            let losses = exec.map(grid.len(), |g| {
                if totals[g].is_nan() {
                    return Ok(f64::NAN);
                }
                family
                    .fit(&fit_rows, &grid[g], fit_seed)
                    .map(|m| family.loss(&m, &score_rows))
            });
            for (g, loss) in losses.into_iter().enumerate() {
                match loss {
                    Ok(l) => totals[g] += l,
                    Err(e) => {
                        log::debug!("{} outer fold {fold}, inner fold {inner_fold}: {:?} failed: {e}", family.id(), grid[g]);
                        totals[g] = f64::NAN;
                        first_failure.get_or_insert(Error::FoldFailed {
                            fold: inner_fold,
                            source: Box::new(e),
                        });
                    }
                }
            }
        }
        let inner_errors: Vec<Option<f64>> = totals
            .iter()
            .map(|t| (!t.is_nan()).then(|| t / k_inner as f64))
            .collect();
        let scores: Vec<f64> = inner_errors.iter().map(|e| e.unwrap_or(f64::NAN)).collect();
        let chosen = argmin_first(&scores);
        let Some(chosen_error) = inner_errors[chosen] else {
            return Err(Error::FoldFailed {
                fold,
                source: Box::new(first_failure.expect("every entry failed")),
            });
        };
        let model = family
            .fit(&train, &grid[chosen], derive_seed(seed, fold as u64))
            .map_err(|e| Error::FoldFailed {
                fold,
                source: Box::new(e),
            })?;
        let outer_error = family.loss(&model, &test);
        log::debug!(
            "{} outer fold {fold}: chose {:?} (inner {:.4}, outer {:.4})",
            family.id(),
            grid[chosen],
            chosen_error,
            outer_error
        );
        folds.push(OuterFold {
            fold,
            train_size: train.len(),
            test_size: test.len(),
            inner_errors,
            chosen,
            outer_error,
        });
    }
    let outer_errors: Vec<f64> = folds.iter().map(|f| f.outer_error).collect();
    let selected: Vec<f64> = folds.iter().filter_map(|f| f.inner_errors[f.chosen]).collect();
    let mut votes = vec![0usize; grid.len()];
    for f in &folds {
        votes[f.chosen] += 1;
    }
    let top = *votes.iter().max().expect("nonempty grid");
    let final_choice = votes.iter().position(|&v| v == top).expect("max exists");
    Ok(SelectionReport {
        family: family.id(),
        grid: grid
            .iter()
            .map(serde_json::to_value)
            .collect::<std::result::Result<_, _>>()?,
        k_outer,
        k_inner,
        seed,
        n,
        outer_error_mean: stats::mean(&outer_errors),
        outer_error_sd: stats::std_dev(&outer_errors),
        inner_selected_mean: stats::mean(&selected),
        folds,
        final_choice,
    })
}

/// Index of the first minimum; NaN scores never win.
fn argmin_first(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x < xs[best] || xs[best].is_nan() {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn even_folds() {
        let p = kfold_split(100, 5, 1).unwrap();
        assert_eq!(p.sizes(), vec![20; 5]);
    }

    #[test]
    fn remainder_is_spread() {
        let mut s = kfold_split(7, 3, 2).unwrap().sizes();
        s.sort_unstable();
        assert_eq!(s, vec![2, 2, 3]);
    }

    #[test]
    fn stratified_folds_keep_class_shares() {
        let labels: Vec<bool> = (0..100).map(|i| (i * 37) % 100 < 60).collect();
        let p = stratified_kfold_split(&labels, 5, 3).unwrap();
        for f in 0..5 {
            let pos = p.test_rows(f).iter().filter(|&&r| labels[r]).count();
            assert!((11..=13).contains(&pos), "fold {f}: {pos}");
        }
        assert!(p.sizes().iter().all(|&s| s == 20));
    }

    #[test]
    fn plans_are_deterministic() {
        assert_eq!(kfold_split(50, 4, 9).unwrap(), kfold_split(50, 4, 9).unwrap());
        assert_ne!(kfold_split(50, 4, 9).unwrap(), kfold_split(50, 4, 10).unwrap());
    }

    #[test]
    fn bad_fold_counts_are_rejected() {
        assert!(kfold_split(3, 4, 0).is_err());
        assert!(kfold_split(10, 1, 0).is_err());
    }

    #[test]
    fn argmin_prefers_first() {
        assert_eq!(argmin_first(&[0.3, 0.1, 0.1, 0.2]), 1);
        assert_eq!(argmin_first(&[f64::NAN, 0.5]), 1);
    }
}
