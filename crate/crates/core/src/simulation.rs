//! Monte Carlo realizations of the project and extraction of (EV, t, c)
//! triads at fixed earned-value pivots.
//!
//! Run `i` of an ensemble seeded with `seed` draws from a ChaCha8 stream seeded
//! with [`derive_seed`]`(seed, i)`, so each run is a pure function of
//! `(spec, seed, i)` and the ensemble does not depend on how runs are spread
//! across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::Point;
use crate::project::{accrual_curve, ProjectSpec, Schedule};

/// Sampled durations below this are rejected and redrawn.
pub const DURATION_FLOOR: f64 = 1e-6;
/// Rejections allowed per activity draw before the project is declared
/// pathological.
pub const MAX_REJECTIONS: usize = 1000;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-run seed: `mix64(mix64(seed) + (run + 1) · γ)` with γ the 64-bit
/// golden-ratio increment of splitmix64.
pub fn derive_seed(seed: u64, run: u64) -> u64 {
    mix64(mix64(seed).wrapping_add(run.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Draws one duration per activity from Normal(mean, variance), rejecting
/// draws below [`DURATION_FLOOR`].
pub fn sample_durations(spec: &ProjectSpec, run_seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
    spec.activities()
        .iter()
        .map(|a| {
            if a.variance == 0.0 {
                return Ok(a.mean_duration);
            }
            let normal = Normal::new(a.mean_duration, a.variance.sqrt())
                .map_err(|e| Error::Numerical(format!("activity `{}`: {e}", a.id)))?;
            for _ in 0..MAX_REJECTIONS {
                let d = normal.sample(&mut rng);
                if d >= DURATION_FLOOR {
                    return Ok(d);
                }
            }
            Err(Error::SamplingRejected {
                activity: a.id.clone(),
                rejections: MAX_REJECTIONS,
            })
        })
        .collect()
}

/// One simulated realization of the project.
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub durations: Vec<f64>,
    pub schedule: Schedule,
    pub ac_curve: Curve,
    pub ev_curve: Curve,
    pub final_t: f64,
    pub final_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triad {
    pub ev_level: f64,
    pub t: f64,
    pub c: f64,
    pub final_t: f64,
    pub final_c: f64,
}

pub fn simulate_run(spec: &ProjectSpec, run_seed: u64) -> Result<RunTrace> {
    let durations = sample_durations(spec, run_seed)?;
    simulate_with_durations(spec, durations)
}

/// Builds the AC and EV curves for a given duration vector. AC accrues at the
/// activity's cost rate over its actual interval; EV accrues linearly so that
/// each activity has earned exactly its budget on completion.
pub fn simulate_with_durations(spec: &ProjectSpec, durations: Vec<f64>) -> Result<RunTrace> {
    let schedule = spec.earliest_start_schedule(&durations)?;
    let acts = spec.activities();
    let ac_curve = accrual_curve(&schedule, &durations, |i, elapsed| acts[i].cost_rate * elapsed);
    let ev_curve = accrual_curve(&schedule, &durations, |i, elapsed| {
        let budget = acts[i].budget();
        if elapsed >= durations[i] {
            budget
        } else {
            budget * (elapsed / durations[i])
        }
    });
    let final_t = schedule.project_finish();
    let final_c = ac_curve.final_value();
    Ok(RunTrace {
        durations,
        schedule,
        ac_curve,
        ev_curve,
        final_t,
        final_c,
    })
}

fn check_level(ev_level: f64) -> Result<()> {
    if ev_level > 0.0 && ev_level <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "EV level must lie in (0, 1], got {ev_level}"
        )))
    }
}

impl RunTrace {
    /// Time and actual cost at the earliest instant the run's EV reaches
    /// `ev_level` × BAC.
    pub fn extract_triad(&self, ev_level: f64) -> Result<Triad> {
        check_level(ev_level)?;
        let bac = self.ev_curve.final_value();
        let target = ev_level * bac;
        let t = self
            .ev_curve
            .first_crossing(target)
            .unwrap_or_else(|| self.ev_curve.end_time());
        let c = self.ac_curve.value_at(t);
        Ok(Triad {
            ev_level,
            t,
            c,
            final_t: self.final_t,
            final_c: self.final_c,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriadRow {
    pub run: u64,
    pub ev_level: f64,
    pub t: f64,
    pub c: f64,
    pub final_t: f64,
    pub final_c: f64,
    pub over_budget: bool,
    pub late: bool,
}

impl TriadRow {
    pub fn point(&self) -> Point {
        [self.t, self.c]
    }
}

/// Triads of an ensemble, ordered by run index and then by EV level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriadDataset {
    pub fingerprint: String,
    pub seed: u64,
    pub n_runs: u64,
    pub ev_levels: Vec<f64>,
    pub bac: f64,
    pub pd: f64,
    pub rows: Vec<TriadRow>,
}

/// Tolerance used when matching requested EV levels against stored ones.
pub const LEVEL_MATCH_TOL: f64 = 1e-9;

impl TriadDataset {
    pub fn rows_at(&self, ev_level: f64) -> Vec<TriadRow> {
        self.rows
            .iter()
            .filter(|r| (r.ev_level - ev_level).abs() <= LEVEL_MATCH_TOL)
            .copied()
            .collect()
    }

    pub fn points_at(&self, ev_level: f64) -> Vec<Point> {
        self.rows_at(ev_level).iter().map(TriadRow::point).collect()
    }

    pub fn has_level(&self, ev_level: f64) -> bool {
        self.ev_levels
            .iter()
            .any(|l| (l - ev_level).abs() <= LEVEL_MATCH_TOL)
    }
}

pub fn run_ensemble(
    spec: &ProjectSpec,
    n_runs: u64,
    seed: u64,
    ev_levels: &[f64],
) -> Result<TriadDataset> {
    run_ensemble_with(Execution::default(), spec, n_runs, seed, ev_levels)
}

pub fn run_ensemble_with(
    exec: Execution,
    spec: &ProjectSpec,
    n_runs: u64,
    seed: u64,
    ev_levels: &[f64],
) -> Result<TriadDataset> {
    if n_runs == 0 {
        return Err(Error::InvalidInput("n_runs must be >= 1".into()));
    }
    if ev_levels.is_empty() {
        return Err(Error::InvalidInput("at least one EV level is required".into()));
    }
    for &l in ev_levels {
        check_level(l)?;
    }
    let bac = spec.bac();
    let pd = spec.pd();
    let per_run = exec.try_map(n_runs as usize, |i| {
        let run = i as u64;
        let trace = simulate_run(spec, derive_seed(seed, run)).map_err(|e| Error::RunFailed {
            run,
            source: Box::new(e),
        })?;
        ev_levels
            .iter()
            .map(|&level| {
                let tr = trace.extract_triad(level)?;
                Ok(TriadRow {
                    run,
                    ev_level: level,
                    t: tr.t,
                    c: tr.c,
                    final_t: tr.final_t,
                    final_c: tr.final_c,
                    over_budget: tr.final_c > bac,
                    late: tr.final_t > pd,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(TriadDataset {
        fingerprint: spec.fingerprint(),
        seed,
        n_runs,
        ev_levels: ev_levels.to_vec(),
        bac,
        pd,
        rows: per_run.into_iter().flatten().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::project::{case_study, Activity, ProjectSpec};

    fn zero_variance_case_study() -> ProjectSpec {
        let mut file = case_study().to_file();
        for a in &mut file.activities {
            a.variance = 0.0;
        }
        ProjectSpec::from_file(file).unwrap()
    }

    fn single(mean: f64, rate: f64) -> ProjectSpec {
        ProjectSpec::new(
            None,
            vec![Activity {
                id: "S".into(),
                mean_duration: mean,
                variance: 0.5,
                cost_rate: rate,
            }],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn zero_variance_durations_are_means() {
        let spec = zero_variance_case_study();
        let d = sample_durations(&spec, 7).unwrap();
        let means: Vec<f64> = spec.activities().iter().map(|a| a.mean_duration).collect();
        assert_eq!(d, means);
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = case_study();
        assert_eq!(
            sample_durations(&spec, 99).unwrap(),
            sample_durations(&spec, 99).unwrap()
        );
        assert_ne!(
            sample_durations(&spec, 99).unwrap(),
            sample_durations(&spec, 100).unwrap()
        );
    }

    #[test]
    fn sample_mean_of_a7() {
        let spec = case_study();
        let i = spec.index_of("A7").unwrap();
        let n = 100_000;
        let sum: f64 = (0..n)
            .map(|r| sample_durations(&spec, derive_seed(3, r)).unwrap()[i])
            .sum();
        let mean = sum / n as f64;
        let se = 2.82f64.sqrt() / (n as f64).sqrt();
        assert!((mean - 8.0).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn pathological_spec_aborts_sampling() {
        let spec = ProjectSpec::new(
            None,
            vec![Activity {
                id: "P".into(),
                mean_duration: 1e-3,
                variance: 1e6,
                cost_rate: 1.0,
            }],
            vec![],
        )
        .unwrap();
        // about half the draws fall below the floor
        assert!(sample_durations(&spec, 1).is_ok());

        let hopeless = ProjectSpec::new(
            None,
            vec![Activity {
                id: "H".into(),
                mean_duration: 1e-12,
                variance: 1e-30,
                cost_rate: 1.0,
            }],
            vec![],
        )
        .unwrap();
        let err = sample_durations(&hopeless, 1).unwrap_err();
        assert!(matches!(err, Error::SamplingRejected { ref activity, .. } if activity == "H"));
    }

    #[test]
    fn zero_variance_run_collapses_onto_baseline() {
        let spec = zero_variance_case_study();
        let trace = simulate_run(&spec, 1).unwrap();
        let pv = spec.baseline_pv();
        assert_eq!(trace.ev_curve.times(), pv.curve().times());
        for ((_, a), (_, b)) in trace.ev_curve.breakpoints().zip(pv.curve().breakpoints()) {
            assert_eq!(a, b);
        }
        assert_eq!(trace.final_t, 13.0);
        assert_eq!(trace.final_c, 24613.0);
    }

    #[test]
    fn single_activity_overrun() {
        let spec = single(2.0, 10.0);
        let trace = simulate_with_durations(&spec, vec![4.0]).unwrap();
        assert_eq!(trace.final_c, 40.0);
        assert_eq!(trace.ev_curve.final_value(), 20.0);
        let tr = trace.extract_triad(0.5).unwrap();
        assert_eq!((tr.t, tr.c), (2.0, 20.0));
    }

    #[test]
    fn deterministic_triad_at_half() {
        let spec = zero_variance_case_study();
        let trace = simulate_run(&spec, 0).unwrap();
        let tr = trace.extract_triad(0.5).unwrap();
        let t_oracle = 5.0 + (12306.5 - 11757.0) / 1002.0;
        assert!((tr.t - t_oracle).abs() <= 1e-9 * t_oracle);
        assert!((tr.c - 12306.5).abs() <= 1e-9 * 12306.5);

        let full = trace.extract_triad(1.0).unwrap();
        assert_eq!((full.t, full.c), (trace.final_t, trace.final_c));
    }

    #[test]
    fn rejects_bad_levels() {
        let spec = case_study();
        let trace = simulate_run(&spec, 0).unwrap();
        assert!(trace.extract_triad(0.0).is_err());
        assert!(trace.extract_triad(1.5).is_err());
        assert!(run_ensemble(&spec, 0, 1, &[0.5]).is_err());
        assert!(run_ensemble(&spec, 10, 1, &[]).is_err());
    }

    #[test]
    fn one_run_one_row_per_level() {
        let spec = case_study();
        let ds = run_ensemble(&spec, 1, 5, &[0.25, 0.5, 0.75]).unwrap();
        assert_eq!(ds.rows.len(), 3);
        assert!(ds.rows.iter().all(|r| r.run == 0));
    }

    #[test]
    fn sequential_and_default_execution_agree() {
        let spec = case_study();
        let a = run_ensemble_with(Execution::Sequential, &spec, 200, 11, &[0.3, 0.6]).unwrap();
        let b = run_ensemble(&spec, 200, 11, &[0.3, 0.6]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn seeds_are_decorrelated() {
        let a = derive_seed(1, 0);
        let b = derive_seed(1, 1);
        let c = derive_seed(2, 0);
        assert!(a != b && a != c && b != c);
        assert!((a ^ b).count_ones() > 10);
    }
}
