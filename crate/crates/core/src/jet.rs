//! Third-order jets and their chain rule.

/// Value and first three derivatives of a function at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl Jet {
    pub fn new(value: f64, d1: f64, d2: f64, d3: f64) -> Self {
        Jet { value, d1, d2, d3 }
    }

    pub fn identity(x: f64) -> Self {
        Jet::new(x, 1.0, 0.0, 0.0)
    }

    pub fn derivative(&self, order: u8) -> f64 {
        match order {
            0 => self.value,
            1 => self.d1,
            2 => self.d2,
            _ => self.d3,
        }
    }

    /// Jet of `outer ∘ inner`, where `outer` was evaluated at `inner.value`.
    pub fn compose(outer: Jet, inner: Jet) -> Jet {
        let g1 = inner.d1;
        Jet {
            value: outer.value,
            d1: outer.d1 * g1,
            d2: outer.d2 * g1 * g1 + outer.d1 * inner.d2,
            d3: outer.d3 * g1 * g1 * g1 + 3.0 * outer.d2 * g1 * inner.d2 + outer.d1 * inner.d3,
        }
    }

    /// Jet of the inverse function at `self.value`, given the jet of the
    /// function at `x`. The returned value is `x`.
    pub fn inverse(&self, x: f64) -> Jet {
        let p1 = self.d1;
        Jet {
            value: x,
            d1: 1.0 / p1,
            d2: -self.d2 / (p1 * p1 * p1),
            d3: (3.0 * self.d2 * self.d2 - p1 * self.d3) / p1.powi(5),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(x: f64) -> Jet {
        Jet::new(x.powi(3), 3.0 * x * x, 6.0 * x, 6.0)
    }

    #[test]
    fn composition_matches_closed_form() {
        // (x^3)^3 = x^9
        let x: f64 = 0.7;
        let j = Jet::compose(cube(x.powi(3)), cube(x));
        assert!((j.value - x.powi(9)).abs() < 1e-15);
        assert!((j.d1 - 9.0 * x.powi(8)).abs() < 1e-13);
        assert!((j.d2 - 72.0 * x.powi(7)).abs() < 1e-12);
        assert!((j.d3 - 504.0 * x.powi(6)).abs() < 1e-11);
    }

    #[test]
    fn inverse_of_cube_is_cube_root() {
        let x: f64 = 1.3;
        let inv = cube(x).inverse(x);
        let y = x.powi(3);
        // d/dy y^(1/3) = (1/3) y^(-2/3)
        assert!((inv.d1 - y.powf(-2.0 / 3.0) / 3.0).abs() < 1e-14);
        assert!((inv.d2 + 2.0 / 9.0 * y.powf(-5.0 / 3.0)).abs() < 1e-14);
        assert!((inv.d3 - 10.0 / 27.0 * y.powf(-8.0 / 3.0)).abs() < 1e-13);
    }
}
