//! Closed real intervals.

use serde::{Deserialize, Serialize};

/// Closed interval `[lo, hi]` with `lo <= hi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    /// Builds the interval spanned by two endpoints in either order.
    pub fn new(a: f64, b: f64) -> Self {
        if a <= b {
            Interval { lo: a, hi: b }
        } else {
            Interval { lo: b, hi: a }
        }
    }

    pub fn unit() -> Self {
        Interval { lo: 0.0, hi: 1.0 }
    }

    pub fn ball(center: f64, radius: f64) -> Self {
        Interval::new(center - radius, center + radius)
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_with_tol(&self, x: f64, tol: f64) -> bool {
        self.lo - tol <= x && x <= self.hi + tol
    }

    /// Strict interior membership.
    pub fn contains_interior(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    pub fn contains_interval(&self, other: &Interval, tol: f64) -> bool {
        other.lo >= self.lo - tol && other.hi <= self.hi + tol
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    /// Affine coordinate of `x`, 0 at `lo` and 1 at `hi`.
    pub fn unit_coord(&self, x: f64) -> f64 {
        (x - self.lo) / self.len()
    }

    pub fn at(&self, t: f64) -> f64 {
        self.lo + t * self.len()
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_orders_endpoints() {
        let i = Interval::new(0.7, 0.2);
        assert_eq!(i.lo, 0.2);
        assert_eq!(i.hi, 0.7);
        assert!(i.contains_interior(0.5));
        assert!(!i.contains_interior(0.2));
    }

    #[test]
    fn intersection_of_disjoint_is_none() {
        assert!(Interval::new(0.0, 0.1).intersect(&Interval::new(0.2, 0.3)).is_none());
        let i = Interval::new(0.0, 0.5).intersect(&Interval::new(0.25, 1.0)).unwrap();
        assert_eq!(i, Interval::new(0.25, 0.5));
    }
}
