//! Small fixed-size helpers for the bivariate (t, c) feature space.

use serde::{Deserialize, Serialize};

pub type Point = [f64; 2];

/// Symmetric 2×2 matrix `[[a, b], [b, d]]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Sym2 {
    pub a: f64,
    pub b: f64,
    pub d: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 { a: 1.0, b: 0.0, d: 1.0 };

    pub fn new(a: f64, b: f64, d: f64) -> Self {
        Self { a, b, d }
    }

    pub fn diag(a: f64, d: f64) -> Self {
        Self { a, b: 0.0, d }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.b
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.a * s, self.b * s, self.d * s)
    }

    pub fn add(&self, o: &Sym2) -> Self {
        Self::new(self.a + o.a, self.b + o.b, self.d + o.d)
    }

    pub fn add_ridge(&self, r: f64) -> Self {
        Self::new(self.a + r, self.b, self.d + r)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let half_tr = 0.5 * (self.a + self.d);
        let disc = (0.25 * (self.a - self.d).powi(2) + self.b * self.b).sqrt();
        (half_tr - disc, half_tr + disc)
    }

    pub fn is_spd(&self) -> bool {
        self.a.is_finite()
            && self.b.is_finite()
            && self.d.is_finite()
            && self.a > 0.0
            && self.det() > 0.0
            && self.eigenvalues().0 > 0.0
    }

    pub fn condition_number(&self) -> f64 {
        let (lo, hi) = self.eigenvalues();
        if lo <= 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }

    pub fn inverse(&self) -> Option<Sym2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(Sym2::new(self.d / det, -self.b / det, self.a / det))
    }

    /// `xᵀ M x`
    pub fn quad(&self, x: Point) -> f64 {
        self.a * x[0] * x[0] + 2.0 * self.b * x[0] * x[1] + self.d * x[1] * x[1]
    }

    /// Lower Cholesky factor `(l11, l21, l22)` with `M = L Lᵀ`.
    pub fn cholesky(&self) -> Option<(f64, f64, f64)> {
        if !(self.a > 0.0) {
            return None;
        }
        let l11 = self.a.sqrt();
        let l21 = self.b / l11;
        let rem = self.d - l21 * l21;
        if !(rem > 0.0) {
            return None;
        }
        Some((l11, l21, rem.sqrt()))
    }

    pub fn from_cholesky(l11: f64, l21: f64, l22: f64) -> Self {
        Sym2::new(l11 * l11, l11 * l21, l21 * l21 + l22 * l22)
    }
}

pub fn mean2(points: &[Point]) -> Point {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p[0], sy + p[1]));
    [sx / n, sy / n]
}

/// Unbiased sample covariance (divisor n − 1).
pub fn covariance2(points: &[Point]) -> Sym2 {
    let m = mean2(points);
    let mut s = Sym2::new(0.0, 0.0, 0.0);
    for p in points {
        let dx = p[0] - m[0];
        let dy = p[1] - m[1];
        s.a += dx * dx;
        s.b += dx * dy;
        s.d += dy * dy;
    }
    let denom = (points.len() as f64 - 1.0).max(1.0);
    s.scale(1.0 / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_round_trip() {
        let m = Sym2::new(4.0, 1.2, 2.0);
        let (l11, l21, l22) = m.cholesky().unwrap();
        let back = Sym2::from_cholesky(l11, l21, l22);
        assert!((back.a - m.a).abs() < 1e-12);
        assert!((back.b - m.b).abs() < 1e-12);
        assert!((back.d - m.d).abs() < 1e-12);
    }

    #[test]
    fn inverse_and_quad() {
        let m = Sym2::new(2.0, 0.5, 1.0);
        let inv = m.inverse().unwrap();
        // M · M⁻¹ = I
        assert!((m.a * inv.a + m.b * inv.b - 1.0).abs() < 1e-12);
        assert!((m.a * inv.b + m.b * inv.d).abs() < 1e-12);
        assert_eq!(Sym2::IDENTITY.quad([3.0, 4.0]), 25.0);
    }

    #[test]
    fn singular_matrix_is_not_spd() {
        let m = Sym2::new(1.0, 1.0, 1.0);
        assert!(!m.is_spd());
        assert!(m.condition_number().is_infinite() || m.condition_number() > 1e15);
    }
}
