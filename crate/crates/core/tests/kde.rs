//! Bandwidth selection checked against a brute-force grid search of an
//! independently coded SCV criterion.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use stochevm::kde::{normal_scale_bandwidth, scv_bandwidth, scv_pilot};
use stochevm::linalg::{Point, Sym2};

fn cloud(n: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)])
        .collect()
}

/// Bivariate normal density with diagonal covariance `(s1, s2)`.
fn phi_diag(x: f64, y: f64, s1: f64, s2: f64) -> f64 {
    (-(x * x / s1 + y * y / s2) / 2.0).exp() / (2.0 * std::f64::consts::PI * (s1 * s2).sqrt())
}

/// SCV criterion for diagonal `H` and diagonal pilot `G`, written out as the
/// plain double sum.
fn scv_diag(pts: &[Point], h: (f64, f64), g: (f64, f64)) -> f64 {
    let n = pts.len() as f64;
    let mut total = 0.0;
    for p in pts {
        for q in pts {
            let (dx, dy) = (p[0] - q[0], p[1] - q[1]);
            total += phi_diag(dx, dy, 2.0 * h.0 + 2.0 * g.0, 2.0 * h.1 + 2.0 * g.1)
                - 2.0 * phi_diag(dx, dy, h.0 + 2.0 * g.0, h.1 + 2.0 * g.1);
        }
    }
    1.0 / (n * 4.0 * std::f64::consts::PI * (h.0 * h.1).sqrt()) + total / (n * n)
}

fn grid_search(pts: &[Point], g: (f64, f64), around: (f64, f64)) -> (f64, f64) {
    let factors: Vec<f64> = (0..=16).map(|k| 0.25 * 2f64.powf(k as f64 / 4.0)).collect();
    let mut best = (f64::INFINITY, around);
    for &a in &factors {
        for &b in &factors {
            let h = (around.0 * a, around.1 * b);
            let v = scv_diag(pts, h, g);
            if v < best.0 {
                best = (v, h);
            }
        }
    }
    best.1
}

#[test]
fn scv_on_standard_normal_agrees_with_grid_search() {
    let pts = cloud(2000, 11);
    let ns = normal_scale_bandwidth(&pts).unwrap().matrix();
    let sel = scv_bandwidth(&pts).unwrap();
    let h = sel.h.matrix();
    for (got, reference) in [(h.a, ns.a), (h.d, ns.d)] {
        assert!(got / reference < 2.0 && reference / got < 2.0, "{got} vs {reference}");
    }
    // the grid search sees the same pilot but none of the library's algebra
    let sub = &pts[..600];
    let pilot = scv_pilot(sub).unwrap();
    let scale = (2000.0f64 / 600.0).powf(-1.0 / 3.0);
    let (ga, gd) = (pilot.a, pilot.d);
    let oracle = grid_search(sub, (ga, gd), (ns.a / scale, ns.d / scale));
    let (oa, od) = (oracle.0 * scale, oracle.1 * scale);
    // grid step is a factor 2^(1/4); allow two steps plus sampling noise
    for (got, o) in [(h.a, oa), (h.d, od)] {
        assert!(got / o < 1.8 && o / got < 1.8, "{got} vs oracle {o}");
    }
}

#[test]
fn scv_is_equivariant_under_axis_rescaling() {
    let pts = cloud(1500, 12);
    let s = 250.0;
    let stretched: Vec<Point> = pts.iter().map(|p| [p[0], s * p[1]]).collect();
    let a: Sym2 = scv_bandwidth(&pts).unwrap().h.matrix();
    let b: Sym2 = scv_bandwidth(&stretched).unwrap().h.matrix();
    assert!((b.a / a.a - 1.0).abs() < 0.05, "{} vs {}", b.a, a.a);
    assert!((b.d / (s * s * a.d) - 1.0).abs() < 0.05, "{} vs {}", b.d, s * s * a.d);
    assert!((b.b / (s * a.b) - 1.0).abs() < 0.05 || (b.b - s * a.b).abs() < 0.01 * s * (a.a * a.d).sqrt());
}
