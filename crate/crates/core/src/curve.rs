//! Nondecreasing piecewise-linear cumulative curves (PV, EV, AC over time).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl Curve {
    /// Builds a curve from breakpoints. Times must be strictly increasing and
    /// values nondecreasing; both are checked in debug builds.
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Self {
        debug_assert_eq!(times.len(), values.len());
        debug_assert!(!times.is_empty());
        debug_assert!(times.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(values.windows(2).all(|w| w[0] <= w[1]));
        Self { times, values }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn final_value(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Value at `t`, clamped to the first/last breakpoint outside the range.
    pub fn value_at(&self, t: f64) -> f64 {
        if t <= self.times[0] {
            return self.values[0];
        }
        let i = self.times.partition_point(|&x| x < t);
        if i == self.times.len() {
            return self.final_value();
        }
        if self.times[i] == t {
            return self.values[i];
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    /// Earliest time at which the curve reaches `level`, or `None` if it never
    /// does.
    pub fn first_crossing(&self, level: f64) -> Option<f64> {
        let i = self.values.partition_point(|&v| v < level);
        if i == self.values.len() {
            return None;
        }
        if i == 0 {
            return Some(self.times[0]);
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        Some(t0 + (level - v0) / (v1 - v0) * (t1 - t0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> Curve {
        Curve::new(vec![0.0, 2.0, 4.0, 6.0], vec![0.0, 10.0, 10.0, 30.0])
    }

    #[test]
    fn interpolates_and_clamps() {
        let c = ramp();
        assert_eq!(c.value_at(-1.0), 0.0);
        assert_eq!(c.value_at(1.0), 5.0);
        assert_eq!(c.value_at(3.0), 10.0);
        assert_eq!(c.value_at(5.0), 20.0);
        assert_eq!(c.value_at(9.0), 30.0);
    }

    #[test]
    fn first_crossing_skips_plateau() {
        let c = ramp();
        assert_eq!(c.first_crossing(10.0), Some(2.0));
        assert_eq!(c.first_crossing(20.0), Some(5.0));
        assert_eq!(c.first_crossing(0.0), Some(0.0));
        assert_eq!(c.first_crossing(31.0), None);
    }
}
