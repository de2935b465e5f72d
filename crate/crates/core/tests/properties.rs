//! Randomized invariants across the project model, simulation, density,
//! classification, fold planning and smoothing layers.

use proptest::prelude::*;
use proptest::sample::subsequence;

use stochevm::classify::{forest_fit, qda_fit, ForestParams};
use stochevm::dataset::{read_triads, write_triads};
use stochevm::gam::{backfit_gam, Loess, SmootherSpec};
use stochevm::kde::{kde_fit, normal_scale_bandwidth, percentile_rectangle, DensityModel};
use stochevm::linalg::Point;
use stochevm::project::{Activity, ProjectSpec};
use stochevm::selection::{kfold_split, stratified_kfold_split};
use stochevm::simulation::{run_ensemble_with, simulate_run};
use stochevm::Execution;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

/// Activities `A0..An` with edges only from lower to higher index.
fn project() -> impl Strategy<Value = (Vec<Activity>, Vec<(String, String)>)> {
    (1usize..7).prop_flat_map(|n| {
        let acts = prop::collection::vec((0.5f64..10.0, 0.0f64..2.0, 1.0f64..1000.0), n);
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let len = pairs.len();
        (acts, subsequence(pairs, 0..=len))
    })
    .prop_map(|(acts, pairs)| {
        let activities = acts
            .into_iter()
            .enumerate()
            .map(|(i, (mean_duration, variance, cost_rate))| Activity {
                id: format!("A{i}"),
                mean_duration,
                variance,
                cost_rate,
            })
            .collect();
        let edges = pairs.into_iter().map(|(i, j)| (format!("A{i}"), format!("A{j}"))).collect();
        (activities, edges)
    })
}

fn spec_of(p: &(Vec<Activity>, Vec<(String, String)>)) -> ProjectSpec {
    ProjectSpec::new(None, p.0.clone(), p.1.clone()).expect("generated project is valid")
}

fn cloud(min: usize, max: usize) -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0).prop_map(|(a, b)| [a, b + 0.5 * a]), min..max)
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn pv_curve_runs_from_zero_to_bac(p in project()) {
        let spec = spec_of(&p);
        let pv = spec.baseline_pv();
        let budget: f64 = spec.activities().iter().map(|a| a.budget()).sum();
        prop_assert!((spec.bac() - budget).abs() <= 1e-9 * budget);
        prop_assert_eq!(pv.value_at(0.0), 0.0);
        prop_assert!((pv.value_at(spec.pd()) - spec.bac()).abs() <= 1e-9 * spec.bac());
        let values: Vec<f64> = (0..=200).map(|k| pv.value_at(spec.pd() * k as f64 / 200.0)).collect();
        prop_assert!(values.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn longer_activity_never_finishes_the_project_earlier(
        p in project(),
        pick in any::<prop::sample::Index>(),
        extra in 0.0f64..5.0,
    ) {
        let spec = spec_of(&p);
        let mut d: Vec<f64> = spec.activities().iter().map(|a| a.mean_duration).collect();
        let before = spec.earliest_start_schedule(&d).unwrap().project_finish();
        let i = pick.index(d.len());
        d[i] += extra;
        let after = spec.earliest_start_schedule(&d).unwrap().project_finish();
        prop_assert!(after >= before);
    }

    #[test]
    fn schedule_ignores_declaration_order(p in project(), seed in any::<u64>()) {
        let spec = spec_of(&p);
        let mut acts = p.0.clone();
        let mut edges = p.1.clone();
        let rotate = |len: usize| if len == 0 { 0 } else { (seed % len as u64) as usize };
        acts.reverse();
        let r = rotate(acts.len());
        acts.rotate_left(r);
        edges.reverse();
        let r = rotate(edges.len());
        edges.rotate_left(r);
        let shuffled = ProjectSpec::new(None, acts, edges).unwrap();
        prop_assert_eq!(spec.pd(), shuffled.pd());
        prop_assert_eq!(spec.baseline_pv().breakpoints().len(), shuffled.baseline_pv().breakpoints().len());
        let finish = |s: &ProjectSpec| {
            let d: Vec<f64> = s.activities().iter().map(|a| a.mean_duration).collect();
            let sched = s.earliest_start_schedule(&d).unwrap();
            let mut by_id: Vec<(String, f64)> =
                s.activities().iter().map(|a| a.id.clone()).zip(sched.finish).collect();
            by_id.sort_by(|a, b| a.0.cmp(&b.0));
            by_id
        };
        prop_assert_eq!(finish(&spec), finish(&shuffled));
    }

    #[test]
    fn triads_grow_with_the_level_and_end_at_bac(p in project(), seed in any::<u64>()) {
        let spec = spec_of(&p);
        let run = simulate_run(&spec, seed).unwrap();
        prop_assert!((run.ev_curve.value_at(run.final_t) - spec.bac()).abs() <= 1e-9 * spec.bac());
        let spent: f64 = spec.activities().iter().zip(&run.durations).map(|(a, d)| a.cost_rate * d).sum();
        prop_assert!((run.final_c - spent).abs() <= 1e-9 * spent);
        let mut last = (0.0, 0.0);
        for level in [0.1, 0.25, 0.5, 0.75, 0.9] {
            let tr = run.extract_triad(level).unwrap();
            prop_assert!(tr.t >= last.0 && tr.c >= last.1);
            prop_assert!(tr.t <= tr.final_t && tr.c <= tr.final_c);
            last = (tr.t, tr.c);
        }
    }

    #[test]
    fn zero_variance_triads_sit_on_the_baseline(p in project(), level in 0.05f64..0.95) {
        let mut acts = p.0.clone();
        acts.iter_mut().for_each(|a| a.variance = 0.0);
        let spec = ProjectSpec::new(None, acts, p.1.clone()).unwrap();
        let tr = simulate_run(&spec, 3).unwrap().extract_triad(level).unwrap();
        let pv = spec.baseline_pv();
        prop_assert!((tr.c - level * spec.bac()).abs() <= 1e-9 * spec.bac());
        prop_assert!((pv.value_at(tr.t) - level * spec.bac()).abs() <= 1e-9 * spec.bac());
    }

    #[test]
    fn triad_csv_round_trips_to_nine_digits(p in project(), seed in any::<u64>()) {
        let spec = spec_of(&p);
        let ds = run_ensemble_with(Execution::Sequential, &spec, 5, seed, &[0.3, 0.6]).unwrap();
        let mut bytes = Vec::new();
        write_triads(&ds.rows, &mut bytes).unwrap();
        let back = read_triads(bytes.as_slice()).unwrap();
        prop_assert_eq!(back.len(), ds.rows.len());
        for (a, b) in ds.rows.iter().zip(&back) {
            prop_assert_eq!((a.run, a.over_budget, a.late), (b.run, b.over_budget, b.late));
            for (x, y) in [(a.t, b.t), (a.c, b.c), (a.final_t, b.final_t), (a.final_c, b.final_c)] {
                prop_assert!((x - y).abs() <= 1e-8 * x.abs());
            }
        }
    }
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn execution_mode_does_not_change_the_ensemble(p in project(), seed in any::<u64>()) {
        let spec = spec_of(&p);
        let a = run_ensemble_with(Execution::Sequential, &spec, 40, seed, &[0.5]).unwrap();
        let b = run_ensemble_with(Execution::default(), &spec, 40, seed, &[0.5]).unwrap();
        prop_assert_eq!(a.rows, b.rows);
    }

    #[test]
    fn anomaly_falls_as_density_rises(points in cloud(30, 300), probes in cloud(30, 60)) {
        let h = normal_scale_bandwidth(&points).unwrap();
        let (fit, reference) = points.split_at(points.len() / 2);
        let model = DensityModel::with_reference(kde_fit(fit, h).unwrap(), reference, Execution::Sequential).unwrap();
        let mut scored: Vec<(f64, f64)> = probes.iter().map(|&p| (model.density(p), model.anomaly_probability(p))).collect();
        prop_assert!(scored.iter().all(|(f, a)| *f >= 0.0 && (0.0..=1.0).contains(a)));
        scored.sort_by(|x, y| x.0.total_cmp(&y.0));
        prop_assert!(scored.windows(2).all(|w| w[1].1 <= w[0].1));
    }

    /// Each of the four sides trims at most `⌊h⌋ + 1` points, with
    /// `h = 0.025 (n − 1)` the interpolation position; this tends to the
    /// population bound of 90% coverage.
    #[test]
    fn percentile_rectangle_covers_most_points(points in cloud(30, 600)) {
        let rect = percentile_rectangle(&points, 0.95).unwrap();
        prop_assert!(rect.t_lo <= rect.t_hi && rect.c_lo <= rect.c_hi);
        let n = points.len();
        let inside = points.iter().filter(|p| rect.contains(**p)).count();
        let trimmed = ((1.0 - 0.95) / 2.0 * (n - 1) as f64).floor() as usize + 1;
        prop_assert!(inside + 4 * trimmed >= n, "{} of {} inside {:?}", inside, n, rect);
    }

    #[test]
    fn folds_partition_the_rows(n in 10usize..300, k in 2usize..10, seed in any::<u64>()) {
        let plan = kfold_split(n, k, seed).unwrap();
        let mut seen = vec![0u8; n];
        for f in 0..k {
            for r in plan.test_rows(f) {
                seen[r] += 1;
            }
            let train = plan.train_rows(f);
            prop_assert_eq!(train.len() + plan.test_rows(f).len(), n);
            prop_assert!(plan.test_rows(f).iter().all(|r| !train.contains(r)));
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        let sizes = plan.sizes();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert_eq!(plan, kfold_split(n, k, seed).unwrap());
    }

    #[test]
    fn stratified_folds_partition_the_rows(labels in prop::collection::vec(any::<bool>(), 20..200), seed in any::<u64>()) {
        let plan = stratified_kfold_split(&labels, 5, seed).unwrap();
        let mut all: Vec<usize> = (0..5).flat_map(|f| plan.test_rows(f)).collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
    }

    #[test]
    fn classifier_probabilities_are_distributions(points in cloud(30, 200), seed in any::<u64>(), scale in 0.01f64..100.0) {
        let labels: Vec<bool> = points.iter().map(|p| p[0] + 0.3 * p[1] > 0.2).collect();
        prop_assume!(labels.iter().filter(|&&b| b).count() >= 5 && labels.iter().filter(|&&b| !b).count() >= 5);
        let qda = qda_fit(&points, &labels).unwrap();
        let scaled: Vec<Point> = points.iter().map(|p| [p[0] * scale, p[1] / scale]).collect();
        let qda_scaled = qda_fit(&scaled, &labels).unwrap();
        let forest = forest_fit(&points, &labels, ForestParams { ntree: 25, ..ForestParams::default() }, seed, Execution::Sequential);
        for p in points.iter().take(40) {
            for pr in [qda.predict_proba(*p), forest.predict_proba(*p)] {
                prop_assert!(pr.iter().all(|v| (0.0..=1.0).contains(v)));
                prop_assert!((pr[0] + pr[1] - 1.0).abs() < 1e-12);
            }
            let a = qda.predict_proba(*p)[1];
            let b = qda_scaled.predict_proba([p[0] * scale, p[1] / scale])[1];
            prop_assert!((a - b).abs() < 1e-6, "{} vs {}", a, b);
        }
    }

    #[test]
    fn loess_shifts_with_the_response(xs in prop::collection::vec(-10.0f64..10.0, 20..120), span in 0.2f64..1.5, k in -100.0f64..100.0) {
        let y: Vec<f64> = xs.iter().map(|x| x.sin() * 3.0 + 0.1 * x).collect();
        let shifted: Vec<f64> = y.iter().map(|v| v + k).collect();
        let a = Loess::fit(&xs, &y, span).unwrap();
        let b = Loess::fit(&xs, &shifted, span).unwrap();
        for q in [-12.0, -3.3, 0.0, 4.1, 11.0] {
            prop_assert!((b.predict(q) - a.predict(q) - k).abs() <= 1e-8 * (1.0 + k.abs() + a.predict(q).abs()));
        }
    }

    #[test]
    fn backfitted_smooths_are_centred(points in cloud(30, 200), knots in 0usize..5, span in 0.3f64..1.0) {
        let y: Vec<f64> = points.iter().map(|p| (p[0] * 0.7).sin() + 0.2 * p[1] * p[1]).collect();
        for specs in [[SmootherSpec::NaturalSpline { knots }; 2], [SmootherSpec::Loess { span }; 2]] {
            let Ok(m) = backfit_gam(&points, &y, specs) else { continue };
            let scale = y.iter().fold(1.0f64, |s, v| s.max(v.abs()));
            for (j, smooth) in m.smooths.iter().enumerate() {
                let mean = points.iter().map(|p| smooth.eval(p[j])).sum::<f64>() / points.len() as f64;
                prop_assert!(mean.abs() <= 1e-6 * scale, "{:?} smooth {} mean {}", specs, j, mean);
            }
            let fitted_mean = m.fitted.iter().sum::<f64>() / m.n as f64;
            prop_assert!((fitted_mean - m.intercept).abs() <= 1e-6 * scale);
        }
    }
}

#[test]
fn gaussian_rectangle_coverage_reaches_ninety_percent() {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    for (seed, rho) in [(1u64, -0.9), (2, 0.0), (3, 0.5), (4, 0.9)] {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<Point> = (0..5000)
            .map(|_| {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                [a, rho * a + (1.0f64 - rho * rho).sqrt() * b]
            })
            .collect();
        let rect = percentile_rectangle(&points, 0.95).unwrap();
        let inside = points.iter().filter(|p| rect.contains(**p)).count() as f64 / 5000.0;
        assert!(inside >= 0.90, "rho {rho}: coverage {inside}");
    }
}
