//! Multimodal interval maps: closed-form branches, derivatives to order
//! three, the Schwarzian derivative and structural validation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interval::Interval;
use crate::jet::Jet;

/// Points this close to a turning point are treated as the turning point.
pub const TURNING_TIE: f64 = 1e-14;
/// Tolerance on declared turning-point orders.
pub const ORDER_BAND: f64 = 0.05;
/// Number of dyadic scales used by the order fit.
pub const ORDER_FIT_SCALES: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("point {x} lies outside the domain {domain}")]
    Domain { x: f64, domain: Interval },
    #[error("map is not differentiable at turning point {c}")]
    TurningPoint { c: f64 },
    #[error("Schwarzian undefined at {x}: |f'| = {d1:e}")]
    Singularity { x: f64, d1: f64 },
    #[error("turning point {c}: fitted order {fitted:.4} disagrees with declared {declared}")]
    Flatness { c: f64, declared: f64, fitted: f64 },
    #[error("invalid map: {0}")]
    Invalid(String),
}

/// Floating-point width used by sensitive evaluations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Double,
    /// Compensated polynomial evaluation.
    Extended,
}

/// Smooth orientation-aware change of coordinates on an interval.
#[derive(Clone, Debug, PartialEq)]
pub enum Diffeo {
    /// `x + A·|I|·sin(π (x−a)/|I|)`; fixes both endpoints, requires `|A|π < 1`.
    SineBump { domain: Interval, amplitude: f64 },
    /// `a + b − x`.
    Reflect { domain: Interval },
}

impl Diffeo {
    pub fn domain(&self) -> Interval {
        match self {
            Diffeo::SineBump { domain, .. } | Diffeo::Reflect { domain } => *domain,
        }
    }

    pub fn jet(&self, x: f64) -> Jet {
        match *self {
            Diffeo::SineBump { domain, amplitude } => {
                let w = domain.len();
                let k = std::f64::consts::PI / w;
                let t = k * (x - domain.lo);
                let (s, c) = t.sin_cos();
                Jet::new(
                    x + amplitude * w * s,
                    1.0 + amplitude * w * k * c,
                    -amplitude * w * k * k * s,
                    -amplitude * w * k * k * k * c,
                )
            }
            Diffeo::Reflect { domain } => Jet::new(domain.lo + domain.hi - x, -1.0, 0.0, 0.0),
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        self.jet(x).value
    }

    pub fn is_increasing(&self) -> bool {
        matches!(self, Diffeo::SineBump { .. })
    }

    pub fn inverse(&self, y: f64) -> f64 {
        match *self {
            Diffeo::Reflect { domain } => domain.lo + domain.hi - y,
            Diffeo::SineBump { domain, .. } => {
                // Newton safeguarded by a bracket; φ is increasing.
                let (mut lo, mut hi) = (domain.lo, domain.hi);
                let y = domain.clamp(y);
                let mut x = y;
                for _ in 0..200 {
                    let j = self.jet(x);
                    let r = j.value - y;
                    if r == 0.0 {
                        return x;
                    }
                    if r > 0.0 {
                        hi = hi.min(x);
                    } else {
                        lo = lo.max(x);
                    }
                    let mut next = x - r / j.d1;
                    if !(next > lo && next < hi) {
                        next = 0.5 * (lo + hi);
                    }
                    if next == x || hi - lo <= f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
                        return next;
                    }
                    x = next;
                }
                x
            }
        }
    }

    pub fn validate(&self) -> Result<(), MapError> {
        match *self {
            Diffeo::SineBump { amplitude, .. } if amplitude.abs() * std::f64::consts::PI >= 1.0 => {
                Err(MapError::Invalid(format!(
                    "sine bump amplitude {amplitude} does not give a diffeomorphism"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Closed-form expression backing one or more branches.
#[derive(Clone, Debug)]
pub enum Formula {
    /// Ascending coefficients.
    Polynomial(Vec<f64>),
    /// `height · (1 − |(x − center)/half_width|^alpha)`.
    PowerCusp { center: f64, half_width: f64, height: f64, alpha: f64 },
    /// `φ ∘ base ∘ φ⁻¹`.
    Conjugated { base: Arc<MultimodalMap>, phi: Diffeo },
    /// `base^n`.
    Iterate { base: Arc<MultimodalMap>, n: usize },
}

fn horner_jet(coeffs: &[f64], x: f64) -> Jet {
    let (mut p, mut d1, mut d2, mut d3) = (0.0, 0.0, 0.0, 0.0);
    for &a in coeffs.iter().rev() {
        d3 = d3 * x + 3.0 * d2;
        d2 = d2 * x + d1;
        d1 = d1 * x + p;
        p = p * x + a;
    }
    // d2 and d3 above hold p''/2 and p'''/6
    Jet::new(p, d1, 2.0 * d2, 6.0 * d3)
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Compensated Horner scheme.
fn horner_compensated(coeffs: &[f64], x: f64) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for &a in coeffs.iter().rev() {
        let (p, pe) = two_prod(s, x);
        let (t, se) = two_sum(p, a);
        s = t;
        c = c * x + (pe + se);
    }
    s + c
}

fn signed_pow(u: f64, e: f64, odd: bool) -> f64 {
    let m = u.abs();
    let v = if m == 0.0 {
        if e > 0.0 {
            0.0
        } else if e == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        m.powf(e)
    };
    if odd && u < 0.0 {
        -v
    } else {
        v
    }
}

impl Formula {
    pub fn jet(&self, x: f64, precision: Precision) -> Jet {
        match self {
            Formula::Polynomial(c) => {
                let mut j = horner_jet(c, x);
                if precision == Precision::Extended {
                    j.value = horner_compensated(c, x);
                }
                j
            }
            &Formula::PowerCusp { center, half_width, height, alpha } => {
                let u = (x - center) / half_width;
                let term = |coef: f64, e: f64, odd: bool| {
                    if coef == 0.0 {
                        0.0
                    } else {
                        coef * signed_pow(u, e, odd)
                    }
                };
                let w = half_width;
                Jet::new(
                    height * (1.0 - u.abs().powf(alpha)),
                    -height * term(alpha, alpha - 1.0, true) / w,
                    -height * term(alpha * (alpha - 1.0), alpha - 2.0, false) / (w * w),
                    -height * term(alpha * (alpha - 1.0) * (alpha - 2.0), alpha - 3.0, true) / (w * w * w),
                )
            }
            Formula::Conjugated { base, phi } => {
                let y = phi.inverse(x);
                let inv = phi.jet(y).inverse(y);
                let inner = base.jet_unchecked(y);
                let outer = phi.jet(inner.value);
                Jet::compose(outer, Jet::compose(inner, inv))
            }
            Formula::Iterate { base, n } => {
                let mut acc = Jet::identity(x);
                for _ in 0..*n {
                    let step = base.jet_unchecked(base.domain().clamp(acc.value));
                    acc = Jet::compose(step, acc);
                }
                acc
            }
        }
    }
}

/// Monotone piece of a map between consecutive turning points.
#[derive(Clone, Debug)]
pub struct Branch {
    pub interval: Interval,
    pub increasing: bool,
    pub formula: Arc<Formula>,
    /// Values at the left and right endpoints.
    pub end_values: (f64, f64),
}

impl Branch {
    pub fn image(&self) -> Interval {
        Interval::new(self.end_values.0, self.end_values.1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurningPoint {
    pub location: f64,
    pub order: f64,
}

/// Piecewise closed-form interval self-map with finitely many turning points.
#[derive(Clone, Debug)]
pub struct MultimodalMap {
    domain: Interval,
    branches: Vec<Branch>,
    turning: Vec<TurningPoint>,
    label: String,
    precision: Precision,
}

/// One-sided least-squares fit of the local scaling exponent at a turning point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub location: f64,
    pub declared: f64,
    pub left_exponent: f64,
    pub right_exponent: f64,
    /// Limits of `(f(c±x) − f(c)) / |x|^α` at the finest scale.
    pub left_constant: f64,
    pub right_constant: f64,
}

impl OrderFit {
    pub fn fitted(&self) -> f64 {
        0.5 * (self.left_exponent + self.right_exponent)
    }

    pub fn order_matches(&self) -> bool {
        (self.left_exponent - self.declared).abs() <= ORDER_BAND
            && (self.right_exponent - self.declared).abs() <= ORDER_BAND
    }

    /// Both one-sided constants nonzero and in agreement.
    pub fn constants_agree(&self) -> bool {
        let (l, r) = (self.left_constant, self.right_constant);
        l != 0.0 && r != 0.0 && l.signum() == r.signum() && ((l - r) / l.abs().max(r.abs())).abs() <= 0.05
    }

    pub fn non_flat(&self) -> bool {
        self.declared > 1.0 && self.order_matches() && self.constants_agree()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub label: String,
    pub checks: Vec<CheckRecord>,
    pub limitations: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&CheckRecord> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Maximal period checked for finiteness of periodic points during validation.
pub const VALIDATION_PERIOD_BOUND: usize = 6;

impl MultimodalMap {
    /// Builds a map from a formula and its interior turning points. Branch
    /// directions are read off the endpoint values.
    pub fn from_formula(
        domain: Interval,
        formula: Formula,
        turning: Vec<TurningPoint>,
        label: impl Into<String>,
    ) -> Result<Self, MapError> {
        let f = Arc::new(formula);
        let pieces = vec![f; turning.len() + 1];
        Self::from_pieces(domain, pieces, turning, label)
    }

    /// One formula per lap; `pieces.len() == turning.len() + 1`.
    pub fn from_pieces(
        domain: Interval,
        pieces: Vec<Arc<Formula>>,
        mut turning: Vec<TurningPoint>,
        label: impl Into<String>,
    ) -> Result<Self, MapError> {
        if !(domain.len() > 0.0) {
            return Err(MapError::Invalid(format!("degenerate domain {domain}")));
        }
        turning.sort_by(|a, b| a.location.total_cmp(&b.location));
        if pieces.len() != turning.len() + 1 {
            return Err(MapError::Invalid("one piece per lap required".into()));
        }
        for t in &turning {
            if !domain.contains_interior(t.location) {
                return Err(MapError::Invalid(format!(
                    "turning point {} not interior to {domain}",
                    t.location
                )));
            }
        }
        let mut cuts = vec![domain.lo];
        cuts.extend(turning.iter().map(|t| t.location));
        cuts.push(domain.hi);
        let branches = pieces
            .into_iter()
            .enumerate()
            .map(|(i, formula)| {
                let interval = Interval::new(cuts[i], cuts[i + 1]);
                let l = formula.jet(interval.lo, Precision::Double).value;
                let r = formula.jet(interval.hi, Precision::Double).value;
                Branch { interval, increasing: r >= l, formula, end_values: (l, r) }
            })
            .collect();
        Ok(MultimodalMap { domain, branches, turning, label: label.into(), precision: Precision::Double })
    }

    /// `λ x (1 − x)` on `[0, 1]`.
    pub fn quadratic(lambda: f64) -> Result<Self, MapError> {
        if !(lambda > 0.0 && lambda <= 4.0) {
            return Err(MapError::Invalid(format!("quadratic parameter {lambda} outside (0, 4]")));
        }
        Self::from_formula(
            Interval::unit(),
            Formula::Polynomial(vec![0.0, lambda, -lambda]),
            vec![TurningPoint { location: 0.5, order: 2.0 }],
            format!("quadratic({lambda})"),
        )
    }

    /// `s · min(x, 1 − x)` on `[0, 1]`. The corner has order 1.
    pub fn tent(slope: f64) -> Result<Self, MapError> {
        if !(slope > 0.0 && slope <= 2.0) {
            return Err(MapError::Invalid(format!("tent slope {slope} outside (0, 2]")));
        }
        Self::from_pieces(
            Interval::unit(),
            vec![
                Arc::new(Formula::Polynomial(vec![0.0, slope])),
                Arc::new(Formula::Polynomial(vec![slope, -slope])),
            ],
            vec![TurningPoint { location: 0.5, order: 1.0 }],
            format!("tent({slope})"),
        )
    }

    /// `height · (1 − |2x − 1|^alpha)` on `[0, 1]`.
    pub fn power_unimodal(alpha: f64, height: f64) -> Result<Self, MapError> {
        if !(alpha > 0.0 && height > 0.0 && height <= 1.0) {
            return Err(MapError::Invalid(format!("power family ({alpha}, {height}) invalid")));
        }
        Self::from_formula(
            Interval::unit(),
            Formula::PowerCusp { center: 0.5, half_width: 0.5, height, alpha },
            vec![TurningPoint { location: 0.5, order: alpha }],
            format!("power({alpha}, {height})"),
        )
    }

    /// Polynomial with ascending `coeffs` on `domain`. With `rescale`, the
    /// map is conjugated by the affine bijection `[0,1] → domain`.
    pub fn polynomial(coeffs: &[f64], domain: Interval, rescale: bool) -> Result<Self, MapError> {
        let (coeffs, domain) = if rescale {
            (rescale_polynomial(coeffs, domain), Interval::unit())
        } else {
            (coeffs.to_vec(), domain)
        };
        let turning = polynomial_turning_points(&coeffs, domain);
        let label = format!("polynomial({:?})", coeffs);
        Self::from_formula(domain, Formula::Polynomial(coeffs), turning, label)
    }

    /// `φ ∘ base ∘ φ⁻¹` on `φ(domain)`; turning points move to `φ(c)`.
    pub fn conjugate(base: &MultimodalMap, phi: Diffeo) -> Result<Self, MapError> {
        phi.validate()?;
        if phi.domain() != base.domain {
            return Err(MapError::Invalid("diffeomorphism domain differs from map domain".into()));
        }
        let turning = base
            .turning
            .iter()
            .map(|t| TurningPoint { location: phi.apply(t.location), order: t.order })
            .collect();
        let label = format!("conjugate({})", base.label);
        let mut m = Self::from_formula(
            base.domain,
            Formula::Conjugated { base: Arc::new(base.clone()), phi },
            turning,
            label,
        )?;
        m.precision = base.precision;
        Ok(m)
    }

    /// `f^n` restricted to the closed interval `window`.
    pub fn restricted_iterate(&self, n: usize, window: Interval) -> Result<Self, MapError> {
        if n == 0 {
            return Err(MapError::Invalid("iterate count must be positive".into()));
        }
        let base = Arc::new(self.clone());
        // critical points of f^n: preimages of turning points under f^k, k < n
        let mut level: Vec<f64> = self.turning.iter().map(|t| t.location).collect();
        let mut crit: Vec<f64> = Vec::new();
        for k in 0..n {
            crit.extend(level.iter().copied().filter(|&x| window.contains_interior(x)));
            if k + 1 == n {
                break;
            }
            let mut next = Vec::new();
            for &y in &level {
                for b in 0..self.branches.len() {
                    if let Some(x) = self.solve_on_branch(b, y) {
                        next.push(x);
                    }
                }
            }
            next.sort_by(f64::total_cmp);
            next.dedup_by(|a, b| (*a - *b).abs() <= 1e-13);
            level = next;
        }
        crit.sort_by(f64::total_cmp);
        crit.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
        let turning = crit
            .into_iter()
            .map(|x| {
                let mut order = 1.0;
                let mut y = x;
                for _ in 0..n {
                    if let Some(t) = self.turning.iter().find(|t| (t.location - y).abs() <= 1e-9) {
                        order *= t.order;
                    }
                    y = self.eval_unchecked(y);
                }
                TurningPoint { location: x, order }
            })
            .collect();
        let mut m = Self::from_formula(
            window,
            Formula::Iterate { base, n },
            turning,
            format!("{}^{} on {}", self.label, n, window),
        )?;
        m.precision = self.precision;
        Ok(m)
    }

    /// Replaces the declared turning-point orders.
    pub fn with_declared_orders(mut self, orders: &[f64]) -> Result<Self, MapError> {
        if orders.len() != self.turning.len() {
            return Err(MapError::Invalid(format!(
                "{} orders declared for {} turning points",
                orders.len(),
                self.turning.len()
            )));
        }
        for (t, &o) in self.turning.iter_mut().zip(orders) {
            t.order = o;
        }
        Ok(self)
    }

    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn turning_points_declared(&self) -> &[TurningPoint] {
        &self.turning
    }

    pub fn critical_points(&self) -> Vec<f64> {
        self.turning.iter().map(|t| t.location).collect()
    }

    /// Absolute tolerance used for domain membership.
    pub fn domain_tol(&self) -> f64 {
        1e-12 * self.domain.len()
    }

    /// Index of the branch containing `x`; ties at a turning point go left.
    pub fn branch_index(&self, x: f64) -> usize {
        self.turning.partition_point(|t| t.location < x)
    }

    /// Index of the turning point within [`TURNING_TIE`] of `x`.
    pub fn turning_index_at(&self, x: f64) -> Option<usize> {
        self.turning.iter().position(|t| (t.location - x).abs() <= TURNING_TIE)
    }

    pub fn jet_unchecked(&self, x: f64) -> Jet {
        let b = &self.branches[self.branch_index(x)];
        b.formula.jet(x, self.precision)
    }

    pub fn eval_unchecked(&self, x: f64) -> f64 {
        let x = match self.turning_index_at(x) {
            Some(i) => self.turning[i].location,
            None => x,
        };
        self.domain.clamp(self.jet_unchecked(x).value)
    }

    pub fn eval(&self, x: f64) -> Result<f64, MapError> {
        if !self.domain.contains_with_tol(x, self.domain_tol()) {
            return Err(MapError::Domain { x, domain: self.domain });
        }
        let x = self.domain.clamp(x);
        let y = self.eval_unchecked(x);
        Ok(y)
    }

    /// Derivative of order 1, 2 or 3.
    pub fn derivative(&self, x: f64, order: u8) -> Result<f64, MapError> {
        if !(1..=3).contains(&order) {
            return Err(MapError::Invalid(format!("derivative order {order} not in 1..=3")));
        }
        if !self.domain.contains_with_tol(x, self.domain_tol()) {
            return Err(MapError::Domain { x, domain: self.domain });
        }
        let x = self.domain.clamp(x);
        if let Some(i) = self.turning_index_at(x) {
            let c = self.turning[i].location;
            let left = self.branches[i].formula.jet(c, self.precision).derivative(order);
            let right = self.branches[i + 1].formula.jet(c, self.precision).derivative(order);
            let scale = left.abs().max(right.abs()).max(1.0);
            if !left.is_finite() || !right.is_finite() || (left - right).abs() > 1e-9 * scale {
                return Err(MapError::TurningPoint { c });
            }
            return Ok(left);
        }
        Ok(self.jet_unchecked(x).derivative(order))
    }

    /// `f'''/f' − (3/2)(f''/f')²`.
    pub fn schwarzian(&self, x: f64) -> Result<f64, MapError> {
        if !self.domain.contains_with_tol(x, self.domain_tol()) {
            return Err(MapError::Domain { x, domain: self.domain });
        }
        let j = self.jet_unchecked(self.domain.clamp(x));
        if j.d1.abs() < 1e-12 || self.turning_index_at(x).is_some() {
            return Err(MapError::Singularity { x, d1: j.d1 });
        }
        let r = j.d2 / j.d1;
        Ok(j.d3 / j.d1 - 1.5 * r * r)
    }

    /// Solution of `f(x) = y` on branch `b`, or `None` when `y` is outside
    /// the branch image. Values within a snap tolerance of an endpoint image
    /// return that endpoint exactly.
    pub fn solve_on_branch(&self, b: usize, y: f64) -> Option<f64> {
        let br = &self.branches[b];
        let (vl, vr) = br.end_values;
        // values just outside the image snap to the nearer end; interior values always bisect
        let img = br.image();
        if !img.contains(y) {
            if !img.contains_with_tol(y, 1e-13 * self.domain.len()) {
                return None;
            }
            let at_lo = (vl - y).abs() <= (vr - y).abs();
            return Some(if at_lo { br.interval.lo } else { br.interval.hi });
        }
        if y == vl {
            return Some(br.interval.lo);
        }
        if y == vr {
            return Some(br.interval.hi);
        }
        let f = |x: f64| br.formula.jet(x, self.precision).value;
        let (mut lo, mut hi) = (br.interval.lo, br.interval.hi);
        for _ in 0..2200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let below = f(mid) < y;
            if below == br.increasing {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (fl, fh) = ((f(lo) - y).abs(), (f(hi) - y).abs());
        Some(if fl <= fh { lo } else { hi })
    }

    /// Declared turning points, each re-verified by the scaling fit.
    pub fn turning_points(&self) -> Result<Vec<(f64, f64)>, MapError> {
        self.turning
            .iter()
            .map(|t| {
                let fit = self.fit_order(t.location, t.order);
                if fit.order_matches() {
                    Ok((t.location, t.order))
                } else {
                    Err(MapError::Flatness { c: t.location, declared: t.order, fitted: fit.fitted() })
                }
            })
            .collect()
    }

    /// Least-squares fit of `log|f(c±x) − f(c)|` against `log x` over
    /// [`ORDER_FIT_SCALES`] dyadic scales ending at the finest one whose
    /// increments clear rounding.
    pub fn fit_order(&self, c: f64, declared: f64) -> OrderFit {
        let mut room = (c - self.domain.lo).min(self.domain.hi - c);
        for t in &self.turning {
            let d = (t.location - c).abs();
            if d > TURNING_TIE {
                room = room.min(d);
            }
        }
        let top = (0.05 * self.domain.len()).min(0.25 * room);
        let fc = self.jet_unchecked(c).value;
        let delta = |x: f64| self.jet_unchecked(x).value - fc;
        // finest dyadic scale whose increments clear rounding on both sides
        let floor = 1e-11 * fc.abs().max(self.domain.len());
        let finest = (0..60)
            .take_while(|&k| {
                let x = top * 0.5f64.powi(k);
                delta(c - x).abs() >= floor && delta(c + x).abs() >= floor
            })
            .last()
            .unwrap_or(0);
        let first = finest.saturating_sub(ORDER_FIT_SCALES as i32 - 1);
        let side = |sign: f64| {
            let pts: Vec<(f64, f64)> = (first..=finest)
                .map(|k| {
                    let x = top * 0.5f64.powi(k);
                    (x.ln(), delta(c + sign * x).abs().max(f64::MIN_POSITIVE).ln())
                })
                .collect();
            let slope = crate::stats::ols_slope(&pts);
            let x = top * 0.5f64.powi(finest);
            (slope, delta(c + sign * x) / x.powf(declared))
        };
        let (le, lc) = side(-1.0);
        let (re, rc) = side(1.0);
        OrderFit {
            location: c,
            declared,
            left_exponent: le,
            right_exponent: re,
            left_constant: lc,
            right_constant: rc,
        }
    }

    /// Structural checks; failures are reported, not raised.
    pub fn validate_multimodal(&self) -> ValidationReport {
        let mut checks = Vec::new();
        let tol = 1e-10 * self.domain.len();
        let (a, b) = (self.domain.lo, self.domain.hi);
        let boundary_residual = [a, b]
            .iter()
            .map(|&x| {
                let y = self.jet_unchecked(x).value;
                (y - a).abs().min((y - b).abs())
            })
            .fold(0.0, f64::max);
        checks.push(CheckRecord {
            name: "boundary".into(),
            passed: boundary_residual <= tol,
            residual: boundary_residual,
            detail: "f maps the domain boundary into itself".into(),
        });

        let interior = self.turning.iter().all(|t| self.domain.contains_interior(t.location));
        checks.push(CheckRecord {
            name: "interior_turning_points".into(),
            passed: interior,
            residual: 0.0,
            detail: format!("{} turning points", self.turning.len()),
        });

        let mut worst = 0.0f64;
        let mut mono_ok = true;
        let mut alternating = true;
        for (i, br) in self.branches.iter().enumerate() {
            if i > 0 && self.branches[i - 1].increasing == br.increasing {
                alternating = false;
            }
            let n = 256;
            let mut prev = br.formula.jet(br.interval.lo, self.precision).value;
            for k in 1..=n {
                let x = br.interval.at(k as f64 / n as f64);
                let v = br.formula.jet(x, self.precision).value;
                let step = if br.increasing { v - prev } else { prev - v };
                if step <= 0.0 {
                    mono_ok = false;
                    worst = worst.max(-step);
                }
                prev = v;
            }
        }
        checks.push(CheckRecord {
            name: "monotone_laps".into(),
            passed: mono_ok && alternating,
            residual: worst,
            detail: format!("{} laps, alternating = {alternating}", self.branches.len()),
        });

        for t in &self.turning {
            let fit = self.fit_order(t.location, t.order);
            checks.push(CheckRecord {
                name: format!("non_flat@{}", t.location),
                passed: fit.non_flat(),
                residual: (fit.fitted() - t.order).abs(),
                detail: format!(
                    "declared {} fitted ({:.4}, {:.4}) constants ({:.6e}, {:.6e})",
                    t.order, fit.left_exponent, fit.right_exponent, fit.left_constant, fit.right_constant
                ),
            });
        }

        // Fixed points of f^n must be isolated on a 4096-point grid.
        let grid = 4096;
        let mut longest = 0usize;
        for n in 1..=VALIDATION_PERIOD_BOUND {
            let mut run = 0usize;
            for k in 0..=grid {
                let x = self.domain.at(k as f64 / grid as f64);
                let mut y = x;
                for _ in 0..n {
                    y = self.eval_unchecked(y);
                }
                if (y - x).abs() <= 1e-13 * self.domain.len() {
                    run += 1;
                    longest = longest.max(run);
                } else {
                    run = 0;
                }
            }
        }
        checks.push(CheckRecord {
            name: "isolated_periodic_points".into(),
            passed: longest <= 2,
            residual: longest as f64,
            detail: format!("longest run of grid fixed points of f^n, n <= {VALIDATION_PERIOD_BOUND}"),
        });

        ValidationReport {
            label: self.label.clone(),
            checks,
            limitations: vec![format!(
                "finiteness of Fix(f^n) checked only for n <= {VALIDATION_PERIOD_BOUND} on a {grid}-cell grid"
            )],
        }
    }
}

/// Coefficients of `(p(a + (b−a)u) − a)/(b−a)` in `u`.
fn rescale_polynomial(coeffs: &[f64], domain: Interval) -> Vec<f64> {
    let (a, w) = (domain.lo, domain.len());
    // Horner in polynomial arithmetic with the affine inner map a + w u.
    let mut acc: Vec<f64> = vec![0.0];
    for &c in coeffs.iter().rev() {
        let mut next = vec![0.0; acc.len() + 1];
        for (k, &v) in acc.iter().enumerate() {
            next[k] += v * a;
            next[k + 1] += v * w;
        }
        next[0] += c;
        acc = next;
    }
    acc[0] -= a;
    while acc.len() > 1 && *acc.last().unwrap() == 0.0 {
        acc.pop();
    }
    acc.iter().map(|v| v / w).collect()
}

fn poly_derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(k, &v)| k as f64 * v).collect()
}

fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &v| acc * x + v)
}

/// Sign changes of `p'` in the interior, with the order given by the first
/// non-vanishing higher derivative.
fn polynomial_turning_points(coeffs: &[f64], domain: Interval) -> Vec<TurningPoint> {
    let d1 = poly_derivative(coeffs);
    if d1.is_empty() {
        return Vec::new();
    }
    let grid = 4096;
    let mut roots = Vec::new();
    let mut prev_x = domain.lo;
    let mut prev_v = poly_eval(&d1, prev_x);
    for k in 1..=grid {
        let x = domain.at(k as f64 / grid as f64);
        let v = poly_eval(&d1, x);
        if prev_v != 0.0 && v != 0.0 && prev_v.signum() != v.signum() {
            let (mut lo, mut hi, sl) = (prev_x, x, prev_v.signum());
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if poly_eval(&d1, mid).signum() == sl {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        } else if v == 0.0 && k < grid {
            let after = poly_eval(&d1, domain.at((k as f64 + 0.5) / grid as f64));
            if prev_v != 0.0 && after != 0.0 && prev_v.signum() != after.signum() {
                roots.push(x);
            }
        }
        prev_x = x;
        if v != 0.0 {
            prev_v = v;
        }
    }
    roots.dedup_by(|a, b| (*a - *b).abs() <= 2.0 * domain.len() / grid as f64);
    let w = domain.len();
    roots
        .into_iter()
        .filter(|&c| domain.contains_interior(c))
        .map(|c| {
            let mut derivs = Vec::new();
            let mut d = d1.clone();
            let mut fact = 1.0;
            for k in 1..coeffs.len() {
                fact *= k as f64;
                derivs.push((k, (poly_eval(&d, c) / fact).abs() * w.powi(k as i32)));
                d = poly_derivative(&d);
            }
            let peak = derivs.iter().map(|t| t.1).fold(0.0, f64::max);
            let order = derivs
                .iter()
                .find(|&&(k, v)| k >= 2 && v > 1e-7 * peak)
                .map(|&(k, _)| k as f64)
                .unwrap_or(2.0);
            TurningPoint { location: c, order }
        })
        .collect()
}

/// Map family parameters as written in scenario files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapFamilyConfig {
    Quadratic {
        lambda: f64,
        #[serde(default)]
        declared_orders: Option<Vec<f64>>,
    },
    Tent {
        slope: f64,
    },
    Polynomial {
        coefficients: Vec<f64>,
        #[serde(default = "unit_domain")]
        domain: [f64; 2],
        #[serde(default)]
        rescale: bool,
        #[serde(default)]
        declared_orders: Option<Vec<f64>>,
    },
    Power {
        alpha: f64,
        #[serde(default = "one")]
        height: f64,
        #[serde(default)]
        declared_orders: Option<Vec<f64>>,
    },
    SmoothConjugate {
        base: Box<MapFamilyConfig>,
        diffeo: DiffeoConfig,
    },
}

fn unit_domain() -> [f64; 2] {
    [0.0, 1.0]
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffeoConfig {
    SineBump { amplitude: f64 },
    Reflect,
}

impl DiffeoConfig {
    pub fn on(&self, domain: Interval) -> Diffeo {
        match *self {
            DiffeoConfig::SineBump { amplitude } => Diffeo::SineBump { domain, amplitude },
            DiffeoConfig::Reflect => Diffeo::Reflect { domain },
        }
    }
}

impl MapFamilyConfig {
    pub fn build(&self, precision: Precision) -> Result<MultimodalMap, MapError> {
        let declare = |m: MultimodalMap, o: &Option<Vec<f64>>| match o {
            Some(orders) => m.with_declared_orders(orders),
            None => Ok(m),
        };
        let m = match self {
            MapFamilyConfig::Quadratic { lambda, declared_orders } => {
                declare(MultimodalMap::quadratic(*lambda)?, declared_orders)?
            }
            MapFamilyConfig::Tent { slope } => MultimodalMap::tent(*slope)?,
            MapFamilyConfig::Polynomial { coefficients, domain, rescale, declared_orders } => declare(
                MultimodalMap::polynomial(coefficients, Interval::new(domain[0], domain[1]), *rescale)?,
                declared_orders,
            )?,
            MapFamilyConfig::Power { alpha, height, declared_orders } => {
                declare(MultimodalMap::power_unimodal(*alpha, *height)?, declared_orders)?
            }
            MapFamilyConfig::SmoothConjugate { base, diffeo } => {
                let b = base.build(precision)?;
                let phi = diffeo.on(b.domain());
                MultimodalMap::conjugate(&b, phi)?
            }
        };
        Ok(m.with_precision(precision))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q4() -> MultimodalMap {
        MultimodalMap::quadratic(4.0).unwrap()
    }

    #[test]
    fn quadratic_values() {
        let f = q4();
        assert_eq!(f.eval(0.5).unwrap(), 1.0);
        assert_eq!(f.eval(0.0).unwrap(), 0.0);
        assert_eq!(f.eval(0.25).unwrap(), 0.75);
        assert!(matches!(f.eval(1.5), Err(MapError::Domain { .. })));
    }

    #[test]
    fn quadratic_derivatives() {
        let f = q4();
        assert_eq!(f.derivative(0.0, 1).unwrap(), 4.0);
        assert_eq!(f.derivative(0.75, 1).unwrap(), -2.0);
        for x in [0.1, 0.3, 0.77] {
            assert_eq!(f.derivative(x, 3).unwrap(), 0.0);
        }
        assert_eq!(f.derivative(0.5, 1).unwrap(), 0.0);
    }

    #[test]
    fn tent_corner_is_not_differentiable() {
        let t = MultimodalMap::tent(2.0).unwrap();
        assert!(matches!(t.derivative(0.5, 1), Err(MapError::TurningPoint { .. })));
        assert_eq!(t.derivative(0.2, 1).unwrap(), 2.0);
        assert_eq!(t.derivative(0.8, 1).unwrap(), -2.0);
    }

    #[test]
    fn schwarzian_values() {
        let f = q4();
        assert!((f.schwarzian(0.0).unwrap() + 6.0).abs() < 1e-12);
        assert!((f.schwarzian(0.25).unwrap() + 24.0).abs() < 1e-12);
        assert!(matches!(f.schwarzian(0.5), Err(MapError::Singularity { .. })));
        let affine = MultimodalMap::polynomial(&[0.0, 1.0], Interval::unit(), false).unwrap();
        assert_eq!(affine.schwarzian(0.3).unwrap(), 0.0);
    }

    #[test]
    fn schwarzian_negative_off_turning_point() {
        let f = q4();
        for k in 0..100 {
            let x = (k as f64 + 0.5) / 100.0;
            if (x - 0.5).abs() > 1e-3 {
                assert!(f.schwarzian(x).unwrap() < 0.0);
            }
        }
    }

    #[test]
    fn turning_points_of_families() {
        assert_eq!(q4().turning_points().unwrap(), vec![(0.5, 2.0)]);
        let mono = MultimodalMap::polynomial(&[0.0, 0.0, 1.0], Interval::unit(), false).unwrap();
        assert!(mono.turning_points().unwrap().is_empty());
    }

    #[test]
    fn rescaled_cubic_has_two_quadratic_turning_points() {
        let r = 2.5f64.sqrt();
        let f = MultimodalMap::polynomial(&[0.0, -1.5, 0.0, 1.0], Interval::new(-r, r), true).unwrap();
        let tps = f.turning_points().unwrap();
        assert_eq!(tps.len(), 2);
        // ±√0.5 mapped to (x + √2.5) / (2√2.5)
        let expect = [(1.0 - 0.2f64.sqrt()) / 2.0, (1.0 + 0.2f64.sqrt()) / 2.0];
        for ((c, a), e) in tps.iter().zip(expect) {
            assert!((c - e).abs() < 1e-10, "{c} vs {e}");
            assert_eq!(*a, 2.0);
        }
        assert!(f.validate_multimodal().passed(), "{:?}", f.validate_multimodal());
    }

    #[test]
    fn quartic_vertex_order_detected() {
        // 1 − (2x − 1)^4
        let c = rescale_free_quartic();
        let f = MultimodalMap::polynomial(&c, Interval::unit(), false).unwrap();
        assert_eq!(f.turning_points_declared()[0].order, 4.0);
        assert!((f.turning_points_declared()[0].location - 0.5).abs() < 1e-9);
    }

    fn rescale_free_quartic() -> Vec<f64> {
        // 1 − (16x^4 − 32x^3 + 24x^2 − 8x + 1)
        vec![0.0, 8.0, -24.0, 32.0, -16.0]
    }

    #[test]
    fn validation_of_quadratic_family() {
        assert!(q4().validate_multimodal().passed());
        let f = MultimodalMap::quadratic(3.6).unwrap();
        let rep = f.validate_multimodal();
        assert!(rep.passed(), "{rep:?}");
        assert!(!rep.limitations.is_empty());
    }

    #[test]
    fn cubic_corner_declared_quadratic_fails_non_flatness() {
        let f = MultimodalMap::power_unimodal(3.0, 1.0).unwrap().with_declared_orders(&[2.0]).unwrap();
        let rep = f.validate_multimodal();
        assert!(!rep.passed());
        let fit = f.fit_order(0.5, 2.0);
        assert!((fit.fitted() - 3.0).abs() < 0.01);
        assert!(matches!(f.turning_points(), Err(MapError::Flatness { .. })));
    }

    #[test]
    fn tent_fails_non_flatness() {
        let t = MultimodalMap::tent(2.0).unwrap();
        let rep = t.validate_multimodal();
        assert!(rep.check("boundary").unwrap().passed);
        assert!(!rep.check("non_flat@0.5").unwrap().passed);
    }

    #[test]
    fn conjugated_map_commutes_with_diffeo() {
        let f = q4();
        let phi = Diffeo::SineBump { domain: Interval::unit(), amplitude: 0.1 };
        let g = MultimodalMap::conjugate(&f, phi.clone()).unwrap();
        for k in 1..50 {
            let x = k as f64 / 50.0;
            let lhs = g.eval(phi.apply(x)).unwrap();
            let rhs = phi.apply(f.eval(x).unwrap());
            assert!((lhs - rhs).abs() < 1e-13);
        }
        assert!(g.validate_multimodal().passed(), "{:?}", g.validate_multimodal());
        assert!((g.critical_points()[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn conjugated_derivatives_match_finite_differences() {
        let f = q4();
        let g = MultimodalMap::conjugate(&f, Diffeo::SineBump { domain: Interval::unit(), amplitude: 0.1 }).unwrap();
        for &x in &[0.13, 0.37, 0.81] {
            let h = 1e-4;
            for order in 1..=3u8 {
                let fd = |t: f64| g.derivative(t, order - 1).or_else(|_| g.eval(t)).unwrap();
                let d0 = |t: f64| if order == 1 { g.eval(t).unwrap() } else { fd(t) };
                let approx = (d0(x + h) - d0(x - h)) / (2.0 * h);
                let exact = g.derivative(x, order).unwrap();
                assert!((approx - exact).abs() < 1e-5 * exact.abs().max(1.0), "order {order} at {x}");
            }
        }
    }

    #[test]
    fn iterate_composes_bitwise() {
        let f = q4();
        let f2 = f.restricted_iterate(2, Interval::unit()).unwrap();
        for k in 0..=200 {
            let x = k as f64 / 200.0;
            assert_eq!(f2.eval(x).unwrap(), f.eval(f.eval(x).unwrap()).unwrap());
        }
        assert_eq!(f2.turning_points_declared().len(), 3);
    }

    #[test]
    fn derivative_finite_difference_convergence_is_second_order() {
        let f = MultimodalMap::conjugate(&q4(), Diffeo::SineBump { domain: Interval::unit(), amplitude: 0.1 })
            .unwrap();
        let x = 0.3;
        let exact = f.derivative(x, 1).unwrap();
        let pts: Vec<(f64, f64)> = (2..7)
            .map(|k| {
                let h = 0.5f64.powi(k);
                let fd = (f.eval(x + h).unwrap() - f.eval(x - h).unwrap()) / (2.0 * h);
                (h.ln(), (fd - exact).abs().ln())
            })
            .collect();
        let slope = crate::stats::ols_slope(&pts);
        assert!((slope - 2.0).abs() < 0.1, "slope {slope}");
    }

    #[test]
    fn extended_precision_agrees_with_double() {
        let f = q4().with_precision(Precision::Extended);
        assert_eq!(f.eval(0.25).unwrap(), 0.75);
        assert!((f.eval(0.3).unwrap() - 0.84).abs() < 1e-16);
    }
}
