//! Regularity diagnostics for homeomorphisms: ratio distortion, uaa moduli,
//! pointwise C¹ verdicts, Hölder fits, zooming pairs, multiplier
//! obstructions and the dichotomy report.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conjugacy::{check_critical_order, symbol_of, Conjugacy, ConjugacyError, ConjugacyTable, CriticalOrderRecord, OrderStatus};
use crate::interval::Interval;
use crate::map_core::MultimodalMap;
use crate::orbit::{
    self, certify_expanding, find_periodic_points_adaptive, hypothesis_gate, iterate_n, noncritical_orbit, Direction,
    GateReport, OrbitError, PeriodicClass,
};
use crate::renormalization::{self, RenormError, RenormalizationInterval};

/// Gaps below this make a triple degenerate.
pub const MIN_GAP: f64 = 1e-13;
/// Largest scale of the geometric grid.
pub const S0: f64 = 0.1;
pub const DEFAULT_SCALES: usize = 20;
pub const DEFAULT_RATIOS: [f64; 3] = [1.5, 2.0, 4.0];
pub const TRIPLES_PER_SCALE: usize = 64;
/// Finest-three-scale modulus bound for a uaa-consistent curve.
pub const UAA_TOL: f64 = 1e-3;
/// Modulus floor that counts as persistent distortion.
pub const UAA_FLOOR: f64 = 0.1;
pub const C1_SPREAD: f64 = 1e-2;
pub const C1_MIN: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegularityError {
    #[error("degenerate triple ({x}, {y}, {z})")]
    DegenerateTriple { x: f64, y: f64, z: f64 },
    #[error(transparent)]
    Conjugacy(#[from] ConjugacyError),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error(transparent)]
    Renormalization(#[from] RenormError),
    #[error("no zooming pair at {p} up to k = {k_max} (inconclusive)")]
    NotFound { p: f64, k_max: usize },
    #[error("h({p}) = {y} is not within {tol:e} of a period-{period} point of g")]
    CycleMismatch { p: f64, y: f64, period: usize, tol: f64 },
    #[error("hypothesis violation: {reason}")]
    HypothesisViolation { reason: String, partial: Box<DichotomyReport> },
}

/// Evaluator of `h` resolved near a point.
pub enum Resolved<'a> {
    Func(&'a (dyn Fn(f64) -> f64 + Sync)),
    TableRef(&'a ConjugacyTable),
    Table(ConjugacyTable),
}

impl Resolved<'_> {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Resolved::Func(f) => f(x),
            Resolved::TableRef(t) => t.eval(x),
            Resolved::Table(t) => t.eval(x),
        }
    }
}

/// Monotone map whose values can be resolved at a requested scale.
pub trait Homeomorphism: Sync {
    fn domain(&self) -> Interval;
    /// Evaluator accurate for arguments within `scale` of `p`.
    fn resolve(&self, p: f64, scale: f64) -> Result<Resolved<'_>, RegularityError>;
    /// Evaluators for the leading run of decreasing `scales` around `p` that
    /// can be resolved; an error only if the coarsest one cannot.
    fn resolve_scales(&self, p: f64, scales: &[f64]) -> Result<Vec<Resolved<'_>>, RegularityError> {
        let mut out = Vec::with_capacity(scales.len());
        for &s in scales {
            match self.resolve(p, s) {
                Ok(r) => out.push(r),
                Err(e) if out.is_empty() => return Err(e),
                Err(_) => break,
            }
        }
        Ok(out)
    }
}

/// Closed-form homeomorphism.
pub struct ClosedForm<F: Fn(f64) -> f64 + Sync> {
    pub f: F,
    pub domain: Interval,
}

impl<F: Fn(f64) -> f64 + Sync> ClosedForm<F> {
    pub fn new(domain: Interval, f: F) -> Self {
        ClosedForm { f, domain }
    }
}

impl<F: Fn(f64) -> f64 + Sync> Homeomorphism for ClosedForm<F> {
    fn domain(&self) -> Interval {
        self.domain
    }
    fn resolve(&self, _p: f64, _scale: f64) -> Result<Resolved<'_>, RegularityError> {
        Ok(Resolved::Func(&self.f))
    }
}

impl Homeomorphism for ConjugacyTable {
    fn domain(&self) -> Interval {
        ConjugacyTable::domain(self)
    }
    fn resolve(&self, _p: f64, _scale: f64) -> Result<Resolved<'_>, RegularityError> {
        Ok(Resolved::TableRef(self))
    }
}

impl Homeomorphism for Conjugacy {
    fn domain(&self) -> Interval {
        self.f.domain()
    }
    fn resolve(&self, p: f64, scale: f64) -> Result<Resolved<'_>, RegularityError> {
        Ok(Resolved::Table(self.refined_near(p, scale)?))
    }
    fn resolve_scales(&self, p: f64, scales: &[f64]) -> Result<Vec<Resolved<'_>>, RegularityError> {
        let mut out = Vec::with_capacity(scales.len());
        let mut from = self.table().depth;
        for &s in scales {
            match self.refined_near_from(p, s, from) {
                Ok(t) => {
                    from = t.depth;
                    out.push(Resolved::Table(t));
                }
                Err(e) if out.is_empty() => return Err(e.into()),
                Err(_) => break,
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrdTriple {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub hx: f64,
    pub hy: f64,
    pub hz: f64,
    pub value: f64,
}

impl LrdTriple {
    pub fn recompute(&self) -> f64 {
        lrd_from_values(self.x, self.y, self.z, self.hx, self.hy, self.hz)
    }
}

fn lrd_from_values(x: f64, y: f64, z: f64, hx: f64, hy: f64, hz: f64) -> f64 {
    // one logarithm of a ratio of ratios; the four-log sum only when that overflows
    let q = ((hz - hy) / (hy - hx)) / ((z - y) / (y - x));
    if q.is_finite() && q > 0.0 {
        q.ln().abs()
    } else {
        ((hz - hy).abs().ln() - (hy - hx).abs().ln() + (y - x).abs().ln() - (z - y).abs().ln()).abs()
    }
}

fn check_triple(x: f64, y: f64, z: f64) -> Result<(), RegularityError> {
    let ordered = (x < y && y < z) || (x > y && y > z);
    if !ordered || (y - x).abs() < MIN_GAP || (z - y).abs() < MIN_GAP {
        return Err(RegularityError::DegenerateTriple { x, y, z });
    }
    Ok(())
}

/// Logarithmic ratio distortion of `h` on a monotone triple.
pub fn lrd_triple(h: impl Fn(f64) -> f64, x: f64, y: f64, z: f64) -> Result<LrdTriple, RegularityError> {
    check_triple(x, y, z)?;
    let (hx, hy, hz) = (h(x), h(y), h(z));
    if hz == hy || hy == hx {
        return Err(RegularityError::DegenerateTriple { x, y, z });
    }
    Ok(LrdTriple { x, y, z, hx, hy, hz, value: lrd_from_values(x, y, z, hx, hy, hz) })
}

pub fn lrd(h: impl Fn(f64) -> f64, x: f64, y: f64, z: f64) -> Result<f64, RegularityError> {
    Ok(lrd_triple(h, x, y, z)?.value)
}

/// `(lrd_{h2∘h1}, lrd_{h2}(h1-images) + lrd_{h1} − lrd_{h2∘h1})`.
pub fn lrd_chain(
    h1: impl Fn(f64) -> f64,
    h2: impl Fn(f64) -> f64,
    x: f64,
    y: f64,
    z: f64,
) -> Result<(f64, f64), RegularityError> {
    let a = lrd_triple(&h1, x, y, z)?;
    let b = lrd(&h2, a.hx, a.hy, a.hz)?;
    let comp = lrd(|t| h2(h1(t)), x, y, z)?;
    Ok((comp, b + a.value - comp))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UaaCurve {
    pub p: f64,
    pub ratio_bound: f64,
    pub scales: Vec<f64>,
    pub modulus: Vec<f64>,
}

impl UaaCurve {
    pub fn finest(&self, k: usize) -> &[f64] {
        &self.modulus[self.modulus.len().saturating_sub(k)..]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UaaVerdict {
    UaaConsistent,
    NotUaa,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UaaReport {
    pub p: f64,
    pub curves: Vec<UaaCurve>,
    pub verdict: UaaVerdict,
}

pub fn scale_grid(scales: usize) -> Vec<f64> {
    (0..scales).map(|j| S0 * 0.5f64.powi(j as i32)).collect()
}

/// Supremum of `lrd_h` over random admissible triples in `B_s(p)` at each scale.
pub fn uaa_test(
    h: &dyn Homeomorphism,
    p: f64,
    ratio_bounds: &[f64],
    scales: usize,
    seed: u64,
) -> Result<UaaReport, RegularityError> {
    let resolved = h.resolve_scales(p, &scale_grid(scales))?;
    Ok(uaa_on(h.domain(), p, scales, &resolved, ratio_bounds, seed))
}

fn uaa_on(d: Interval, p: f64, scales: usize, resolved: &[Resolved], ratio_bounds: &[f64], seed: u64) -> UaaReport {
    let grid = scale_grid(scales);
    let grid = &grid[..resolved.len()];
    let mut curves = Vec::new();
    for &cb in ratio_bounds {
        let mut rng = crate::rng::stream(seed, &format!("uaa:{p:e}:{cb}"));
        let mut modulus = Vec::with_capacity(scales);
        for (j, &s) in grid.iter().enumerate() {
            let ball = Interval::new(d.clamp(p - s), d.clamp(p + s));
            let mut sup = 0.0f64;
            for _ in 0..TRIPLES_PER_SCALE {
                let len = rng.gen_range(0.5 * s..=s).min(ball.len());
                let r = (rng.gen_range(-1.0..1.0) * cb.ln()).exp();
                let x = ball.lo + rng.gen::<f64>() * (ball.len() - len);
                let y = x + len / (1.0 + r);
                let z = x + len;
                if let Ok(v) = lrd(|t| resolved[j].eval(t), x, y, z) {
                    sup = sup.max(v);
                }
            }
            modulus.push(sup);
        }
        curves.push(UaaCurve { p, ratio_bound: cb, scales: grid.to_vec(), modulus });
    }
    // consistency needs the full grid; persistence is evidence at any depth
    let consistent =
        resolved.len() == scales && curves.iter().all(|c| c.finest(3).iter().all(|&m| m < UAA_TOL));
    let persistent = curves.iter().any(|c| c.finest(3).iter().all(|&m| m > UAA_FLOOR));
    let verdict = if consistent {
        UaaVerdict::UaaConsistent
    } else if persistent {
        UaaVerdict::NotUaa
    } else {
        UaaVerdict::Inconclusive
    };
    UaaReport { p, curves, verdict }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum C1Class {
    #[serde(rename = "C1_nonzero")]
    C1Nonzero,
    #[serde(rename = "derivative_zero")]
    DerivativeZero,
    #[serde(rename = "divergent")]
    Divergent,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct C1Verdict {
    pub p: f64,
    /// `(scale, mean quotient)` pairs, coarse to fine.
    pub quotients: Vec<(f64, f64)>,
    pub estimate: Option<f64>,
    pub verdict: C1Class,
    /// Log-log slope of `|quotient|` against scale over the finest four scales.
    pub slope: f64,
}

impl C1Verdict {
    /// Finest scale at which `h` could be resolved.
    pub fn finest_scale(&self) -> Option<f64> {
        self.quotients.last().map(|q| q.0)
    }
}

const C1_OFFSETS: [f64; 3] = [0.25, 0.5, 0.75];

/// Difference quotients over pairs straddling `p` (one-sided at the boundary).
pub fn c1_at_point(h: &dyn Homeomorphism, p: f64, scales: usize) -> Result<C1Verdict, RegularityError> {
    let resolved = h.resolve_scales(p, &scale_grid(scales))?;
    Ok(c1_on(h.domain(), p, scales, &resolved))
}

fn c1_on(d: Interval, p: f64, scales: usize, resolved: &[Resolved]) -> C1Verdict {
    let grid = scale_grid(scales);
    let at_lo = p <= d.lo + 1e-15 * d.len();
    let at_hi = p >= d.hi - 1e-15 * d.len();
    let quotients: Vec<(f64, f64)> = grid
        .iter()
        .zip(resolved)
        .map(|(&s, r)| {
            let qs = C1_OFFSETS.iter().map(|&a| {
                let (x, y) = if at_lo {
                    (p, p + (a + 0.25) * s)
                } else if at_hi {
                    (p - (a + 0.25) * s, p)
                } else {
                    (p - a * s, p + (1.0 - a) * s)
                };
                let (x, y) = (d.clamp(x), d.clamp(y));
                (r.eval(y) - r.eval(x)) / (y - x)
            });
            (s, qs.sum::<f64>() / C1_OFFSETS.len() as f64)
        })
        .collect();
    let mut v = classify_c1(p, quotients);
    if v.quotients.len() < scales {
        v.verdict = C1Class::Inconclusive;
        v.estimate = None;
    }
    v
}

fn classify_c1(p: f64, quotients: Vec<(f64, f64)>) -> C1Verdict {
    let n = quotients.len();
    let last3: Vec<f64> = quotients[n.saturating_sub(3)..].iter().map(|q| q.1).collect();
    let est = last3.last().copied().unwrap_or(f64::NAN);
    let hi = last3.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = last3.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = (hi - lo) / est.abs();
    let pts: Vec<(f64, f64)> = quotients[n.saturating_sub(4)..]
        .iter()
        .map(|&(s, q)| (s.ln(), q.abs().max(f64::MIN_POSITIVE).ln()))
        .collect();
    let slope = crate::stats::ols_slope(&pts);
    let (verdict, estimate) = if spread <= C1_SPREAD && est.abs() >= C1_MIN {
        (C1Class::C1Nonzero, Some(est))
    } else if slope >= 0.5 {
        (C1Class::DerivativeZero, Some(0.0))
    } else if slope <= -0.5 {
        (C1Class::Divergent, None)
    } else {
        (C1Class::Inconclusive, None)
    };
    C1Verdict { p, quotients, estimate, verdict, slope }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub gamma: f64,
    pub raw_slope: f64,
    pub r_squared: f64,
    /// Exponent of the oscillation on the leftmost cell.
    pub leftmost_exponent: f64,
    /// `(cell width, max oscillation)` per dyadic level.
    pub oscillation: Vec<(f64, f64)>,
}

/// Log-log fit of the maximal oscillation over dyadic covers of `iv`.
pub fn holder_exponent(h: &dyn Homeomorphism, iv: Interval, scales: usize) -> Result<HolderFit, RegularityError> {
    let r = h.resolve(iv.mid(), 0.5 * iv.len())?;
    let mut oscillation = Vec::new();
    let mut left = Vec::new();
    for j in 1..=scales.max(2) {
        let cells = 1usize << j;
        let w = iv.len() / cells as f64;
        let vals: Vec<f64> = (0..=cells).map(|k| r.eval(iv.at(k as f64 / cells as f64))).collect();
        let osc = vals.windows(2).map(|v| (v[1] - v[0]).abs()).fold(0.0, f64::max);
        oscillation.push((w, osc));
        left.push((w.ln(), (vals[1] - vals[0]).abs().max(f64::MIN_POSITIVE).ln()));
    }
    let pts: Vec<(f64, f64)> = oscillation.iter().map(|&(w, o)| (w.ln(), o.max(f64::MIN_POSITIVE).ln())).collect();
    let (slope, _, r2) = crate::stats::ols(&pts);
    Ok(HolderFit {
        gamma: slope.clamp(f64::MIN_POSITIVE, 1.0),
        raw_slope: slope,
        r_squared: r2,
        leftmost_exponent: crate::stats::ols_slope(&left),
        oscillation,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZoomScale {
    pub v_n: Interval,
    pub hv_n: Interval,
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZoomingWitnessPair {
    pub p: f64,
    pub v: Interval,
    pub hv: Interval,
    pub scales: Vec<ZoomScale>,
    pub alpha: f64,
    pub c_f: f64,
    pub c_g: f64,
    pub central: bool,
}

fn hypothesis_refusal(f: &MultimodalMap, g: &MultimodalMap, period_max: usize) -> Result<Option<String>, RegularityError> {
    for (name, m) in [("f", f), ("g", g)] {
        let gate = hypothesis_gate(m, period_max, orbit::DEFAULT_GRID)?;
        if !gate.passed() {
            return Ok(Some(gate_reason(name, &gate)));
        }
    }
    Ok(None)
}

fn gate_reason(name: &str, gate: &GateReport) -> String {
    let p = &gate.offending[0];
    format!(
        "{name} has a non-repelling period-{} point at {} (multiplier {})",
        p.period, p.location, p.multiplier
    )
}

/// Pulls `v` back along a lap chain (laps listed from the point outwards).
fn pull_back_chain(map: &MultimodalMap, v: Interval, laps: &[usize]) -> Option<Interval> {
    let tol = 1e-12 * map.domain().len();
    let mut t = v;
    for &b in laps.iter().rev() {
        let img = map.branches()[b].image();
        if !img.contains_interval(&t, tol) {
            return None;
        }
        let lo = map.solve_on_branch(b, img.clamp(t.lo))?;
        let hi = map.solve_on_branch(b, img.clamp(t.hi))?;
        t = Interval::new(lo, hi);
        if map.critical_points().iter().any(|&c| t.contains_with_tol(c, 0.0)) {
            return None;
        }
    }
    Some(t)
}

/// Fitted constant in `lrd_{F}(x,y,z) ≤ C |F(z) − F(x)|^α` over sampled triples of `v`.
fn distortion_constant(map: &MultimodalMap, k: usize, v: Interval, alpha: f64) -> f64 {
    let fk = |x: f64| iterate_n(map, x, k);
    let mut c = 0.0f64;
    for &(a, b, e) in &[(0.0, 0.5, 1.0), (0.1, 0.3, 0.9), (0.0, 0.2, 0.6), (0.4, 0.7, 1.0), (0.2, 0.25, 0.3)] {
        let (x, y, z) = (v.at(a), v.at(b), v.at(e));
        if let Ok(l) = lrd(fk, x, y, z) {
            let span = (fk(z) - fk(x)).abs();
            if span > 0.0 {
                c = c.max(l / span.powf(alpha));
            }
        }
    }
    c
}

/// Shrinking intervals near `p` mapped diffeomorphically onto a fixed `V`
/// by `f^{k_n}` and onto `h(V)` by `g^{k_n}`.
pub fn find_zooming_pair(
    conj: &Conjugacy,
    p: f64,
    alpha: f64,
    k_max: usize,
    delta: f64,
) -> Result<ZoomingWitnessPair, RegularityError> {
    let (f, g) = (conj.f.as_ref(), conj.g.as_ref());
    if let Some(reason) = hypothesis_refusal(f, g, 8)? {
        return Err(RegularityError::HypothesisViolation { reason, partial: Box::default() });
    }
    let d = f.domain();
    let laps = f.branches().len();
    let gl = |i: usize| match conj.orientation {
        crate::conjugacy::Orientation::Preserving => i,
        crate::conjugacy::Orientation::Reversing => laps - 1 - i,
    };
    let fixed = find_periodic_points_adaptive(f, 1, orbit::DEFAULT_GRID, orbit::MAX_GRID)?;
    let mut anchors: Vec<(f64, bool)> = fixed
        .iter()
        .filter(|q| q.class == PeriodicClass::Repellor)
        .map(|q| (q.location, (q.location - p).abs() <= 1e-12))
        .collect();
    // the central witness first, then anchors with the strongest expansion
    anchors.sort_by_key(|a| std::cmp::Reverse(a.1));
    for (anchor, central) in anchors {
        let v = Interval::new(d.clamp(anchor - delta), d.clamp(anchor + delta));
        let hv = Interval::new(conj.table().eval(v.lo), conj.table().eval(v.hi));
        let scales = zoom_scales(f, g, &gl, p, anchor, central, v, hv, k_max)?;
        if scales.len() < 3 {
            continue;
        }
        let c_f = scales.iter().map(|s| distortion_constant(f, s.k, s.v_n, alpha)).fold(0.0, f64::max);
        let c_g = scales.iter().map(|s| distortion_constant(g, s.k, s.hv_n, alpha)).fold(0.0, f64::max);
        return Ok(ZoomingWitnessPair { p, v, hv, scales, alpha, c_f, c_g, central });
    }
    Err(RegularityError::NotFound { p, k_max })
}

#[allow(clippy::too_many_arguments)]
fn zoom_scales(
    f: &MultimodalMap,
    g: &MultimodalMap,
    gl: &dyn Fn(usize) -> usize,
    p: f64,
    anchor: f64,
    central: bool,
    v: Interval,
    hv: Interval,
    k_max: usize,
) -> Result<Vec<ZoomScale>, RegularityError> {
    let d = f.domain();
    let pull = |chain: &[usize]| -> Option<ZoomScale> {
        let v_n = pull_back_chain(f, v, chain)?;
        let g_chain: Vec<usize> = chain.iter().map(|&i| gl(i)).collect();
        let hv_n = pull_back_chain(g, hv, &g_chain)?;
        Some(ZoomScale { v_n, hv_n, k: chain.len() })
    };
    let reach = |s: &ZoomScale| (s.v_n.lo - p).abs().max((s.v_n.hi - p).abs());
    let mut scales: Vec<ZoomScale> = Vec::new();
    if central {
        let b = f.branch_index(anchor.min(d.hi - 1e-15));
        for k in 1..=k_max {
            if let Some(s) = pull(&vec![b; k]) {
                scales.push(s);
            }
        }
        return Ok(scales);
    }
    // per depth, the closest node whose pullbacks exist on both sides;
    // kept only when it strictly improves on the previous reach
    let nodes = noncritical_orbit(f, anchor, k_max, Direction::Backward)?;
    let mut last = f64::INFINITY;
    for k in 1..=k_max {
        let mut level: Vec<_> = nodes.iter().filter(|n| n.depth == k && n.noncritical).collect();
        level.sort_by(|a, b| (a.point - p).abs().total_cmp(&(b.point - p).abs()));
        if let Some(s) = level.iter().take(16).find_map(|n| pull(&n.branch_chain)) {
            if reach(&s) < last {
                last = reach(&s);
                scales.push(s);
            }
        }
    }
    Ok(scales)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierRecord {
    pub period: usize,
    pub point_f: f64,
    pub mult_f: f64,
    pub point_g: f64,
    pub mult_g: f64,
    pub matched: bool,
}

/// Relative tolerance on `|multiplier|` agreement.
pub const MULTIPLIER_TOL: f64 = 1e-6;

/// Compares `|Df^n|` at each `f`-cycle point with `|Dg^n|` at the `g`-cycle point through `ĥ(p)`.
pub fn multiplier_obstruction(
    f: &MultimodalMap,
    g: &MultimodalMap,
    table: &ConjugacyTable,
    period_max: usize,
) -> Result<Vec<MultiplierRecord>, RegularityError> {
    let pf = find_periodic_points_adaptive(f, period_max, orbit::DEFAULT_GRID, orbit::MAX_GRID)?;
    let pg = find_periodic_points_adaptive(g, period_max, orbit::DEFAULT_GRID, orbit::MAX_GRID)?;
    let b = &table.breakpoints;
    pf.iter()
        .map(|p| {
            let y = table.eval(p.location);
            let i = b.partition_point(|q| q.x < p.location).clamp(1, b.len() - 1);
            let cell = (b[i].y - b[i - 1].y).abs();
            let tol = 2.0 * cell + 1e-9;
            let q = pg
                .iter()
                .filter(|q| q.period == p.period)
                .min_by(|a, b| (a.location - y).abs().total_cmp(&(b.location - y).abs()))
                .filter(|q| (q.location - y).abs() <= tol)
                .ok_or(RegularityError::CycleMismatch { p: p.location, y, period: p.period, tol })?;
            let (a, bb) = (p.multiplier.abs(), q.multiplier.abs());
            Ok(MultiplierRecord {
                period: p.period,
                point_f: p.location,
                mult_f: p.multiplier,
                point_g: q.location,
                mult_g: q.multiplier,
                matched: (a - bb).abs() <= MULTIPLIER_TOL * a.max(bb),
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DichotomyVerdict {
    SmoothEverywhereConsistent,
    RenormalizationLocked,
    #[default]
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessConfig {
    /// Interior sample points for C¹ verdicts.
    pub sample_points: Vec<f64>,
    pub scales: usize,
    pub ratio_bounds: Vec<f64>,
    pub period_max: usize,
    pub renormalization_n_max: usize,
    pub expanding_delta: f64,
    pub seed: u64,
}

impl Default for SmoothnessConfig {
    fn default() -> Self {
        SmoothnessConfig {
            sample_points: (1..8).map(|k| k as f64 / 8.0).collect(),
            scales: 12,
            ratio_bounds: DEFAULT_RATIOS.to_vec(),
            period_max: 4,
            renormalization_n_max: 4,
            expanding_delta: 0.05,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DichotomyReport {
    pub verdict: DichotomyVerdict,
    pub critical_orders: Vec<CriticalOrderRecord>,
    pub c1: Vec<C1Verdict>,
    pub uaa: Vec<UaaReport>,
    pub multipliers: Vec<MultiplierRecord>,
    pub renormalization: Vec<RenormalizationInterval>,
    /// Boundary points of the renormalization basin that were probed.
    pub boundary_c1: Vec<C1Verdict>,
    pub skipped: Vec<(f64, String)>,
    pub notes: Vec<String>,
}

/// Points whose orbits meet a turning point within `depth` steps.
fn hits_turning_point(f: &MultimodalMap, x: f64, depth: usize) -> bool {
    let mut y = x;
    for _ in 0..depth {
        if matches!(symbol_of(f, y), crate::conjugacy::Symbol::Critical(_)) {
            return true;
        }
        y = f.eval_unchecked(y);
    }
    false
}

fn smooth(c: &C1Verdict) -> bool {
    c.verdict == C1Class::C1Nonzero
}

/// Runs the gate and the diagnostics and assembles the dichotomy verdict.
pub fn smoothness_report(conj: &Conjugacy, cfg: &SmoothnessConfig) -> Result<DichotomyReport, RegularityError> {
    let (f, g) = (conj.f.as_ref(), conj.g.as_ref());
    let mut rep = DichotomyReport { critical_orders: check_critical_order(f, g, conj.table()), ..Default::default() };
    let mult = multiplier_obstruction(f, g, conj.table(), cfg.period_max);
    let mut reason = hypothesis_refusal(f, g, cfg.period_max.max(8))?;
    if reason.is_none() {
        if let Some(r) = rep.critical_orders.iter().find(|r| r.status != OrderStatus::Preserved) {
            reason = Some(format!("turning point {} has status {:?}", r.c_f, r.status));
        }
    }
    if let Some(reason) = reason {
        match mult {
            Ok(m) => rep.multipliers = m,
            Err(e) => rep.notes.push(format!("multiplier table unavailable: {e}")),
        }
        return Err(RegularityError::HypothesisViolation { reason, partial: Box::new(rep) });
    }
    rep.multipliers = mult?;

    let depth = 48;
    let points: Vec<f64> = cfg
        .sample_points
        .iter()
        .copied()
        .filter(|&x| {
            let hit = hits_turning_point(f, x, depth);
            if hit {
                rep.skipped.push((x, "orbit meets a turning point".into()));
            }
            !hit
        })
        .collect();
    // one resolution per point serves both the C¹ quotients and the uaa curves
    let d = f.domain();
    let per_point: Result<Vec<(C1Verdict, Option<UaaReport>)>, RegularityError> = points
        .par_iter()
        .map(|&x| {
            let resolved = conj.resolve_scales(x, &scale_grid(cfg.scales))?;
            let c1 = c1_on(d, x, cfg.scales, &resolved);
            let uaa = certify_expanding(f, x, cfg.expanding_delta, 8, true)
                .ok()
                .map(|_| uaa_on(d, x, cfg.scales, &resolved, &cfg.ratio_bounds, cfg.seed));
            Ok((c1, uaa))
        })
        .collect();
    for (c1, uaa) in per_point? {
        if c1.quotients.len() < cfg.scales {
            rep.notes.push(format!("h unresolved below scale {:e} near {}", c1.finest_scale().unwrap_or(f64::NAN), c1.p));
        }
        rep.c1.push(c1);
        rep.uaa.extend(uaa);
    }
    if rep.uaa.is_empty() {
        rep.notes.push("no sample point was certified nearby-expanding; uaa curves omitted".into());
    }

    rep.renormalization = renormalization::find_renormalization_intervals(f, cfg.renormalization_n_max, orbit::DEFAULT_GRID)?;
    let inside_ok = rep.c1.iter().all(smooth)
        && rep.multipliers.iter().all(|m| m.matched)
        && rep.uaa.iter().all(|u| u.verdict == UaaVerdict::UaaConsistent);
    if rep.renormalization.is_empty() {
        rep.verdict = if inside_ok { DichotomyVerdict::SmoothEverywhereConsistent } else { DichotomyVerdict::Inconclusive };
        return Ok(rep);
    }
    // E(f) ∩ ∂B(J): the boundary of J consists of repelling periodic points.
    let mut boundary = Vec::new();
    for r in &rep.renormalization {
        boundary.extend([r.j.lo, r.j.hi]);
    }
    let bc: Result<Vec<C1Verdict>, RegularityError> =
        boundary.par_iter().map(|&x| c1_at_point(conj, x, cfg.scales)).collect();
    rep.boundary_c1 = bc?;
    let boundary_ok = rep.boundary_c1.iter().all(smooth);
    let j = &rep.renormalization[0];
    rep.notes.push(format!("renormalization interval {} with return time {}", j.j, j.n));
    rep.verdict = match (inside_ok, boundary_ok) {
        (true, true) => DichotomyVerdict::SmoothEverywhereConsistent,
        (true, false) => DichotomyVerdict::RenormalizationLocked,
        _ => DichotomyVerdict::Inconclusive,
    };
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_core::Diffeo;
    use std::f64::consts::PI;

    fn q4() -> MultimodalMap {
        MultimodalMap::quadratic(4.0).unwrap()
    }

    fn sin2(x: f64) -> f64 {
        (0.5 * PI * x).sin().powi(2)
    }

    #[test]
    fn lrd_examples() {
        assert!(lrd(|x| 3.0 * x + 1.0, 0.1, 0.2, 0.35).unwrap() < 1e-12);
        assert!((lrd(|x| x * x, 0.1, 0.2, 0.3).unwrap() - (5.0f64 / 3.0).ln()).abs() < 1e-12);
        assert!(lrd(|x| (x - 0.5).powi(2), 0.3, 0.5, 0.7).unwrap() < 1e-12);
        assert!(matches!(lrd(|x| x, 0.1, 0.1, 0.3), Err(RegularityError::DegenerateTriple { .. })));
    }

    #[test]
    fn lrd_chain_examples() {
        let (c, s) = lrd_chain(|x| 2.0 * x, |x| x - 1.0, 0.1, 0.2, 0.4).unwrap();
        assert!(c.abs() < 1e-12 && s.abs() < 1e-12);
        let (_, s) = lrd_chain(|x| x * x, |x| x * x * x, 0.1, 0.2, 0.3).unwrap();
        assert!(s >= -1e-9);
        let (c, s) = lrd_chain(|x| x * x, f64::sqrt, 0.1, 0.2, 0.3).unwrap();
        let l = lrd(|x| x * x, 0.1, 0.2, 0.3).unwrap();
        assert!(c < 1e-12 && (s - 2.0 * l).abs() < 1e-9);
    }

    #[test]
    fn uaa_on_closed_forms() {
        let phi = ClosedForm::new(Interval::unit(), |x: f64| x + 0.1 * (PI * x).sin());
        let r = uaa_test(&phi, 0.3, &DEFAULT_RATIOS, 20, 1).unwrap();
        assert_eq!(r.verdict, UaaVerdict::UaaConsistent);
        let s = ClosedForm::new(Interval::unit(), sin2);
        let r = uaa_test(&s, 0.0, &[2.0], 20, 1).unwrap();
        assert!(r.curves[0].modulus.iter().all(|&m| m > 0.1));
        assert_eq!(r.verdict, UaaVerdict::NotUaa);
        let a = ClosedForm::new(Interval::unit(), |x: f64| 0.5 * x + 0.2);
        let r = uaa_test(&a, 0.6, &DEFAULT_RATIOS, 10, 1).unwrap();
        assert!(r.curves.iter().all(|c| c.modulus.iter().all(|&m| m < 1e-9)));
    }

    #[test]
    fn c1_on_closed_forms() {
        let phi = ClosedForm::new(Interval::unit(), |x: f64| x + 0.1 * (PI * x).sin());
        let v = c1_at_point(&phi, 0.3, 20).unwrap();
        assert_eq!(v.verdict, C1Class::C1Nonzero);
        assert!((v.estimate.unwrap() - (1.0 + 0.1 * PI * (0.3 * PI).cos())).abs() < 1e-4);
        let s = ClosedForm::new(Interval::unit(), sin2);
        assert_eq!(c1_at_point(&s, 0.0, 20).unwrap().verdict, C1Class::DerivativeZero);
        let v = c1_at_point(&s, 0.5, 20).unwrap();
        assert_eq!(v.verdict, C1Class::C1Nonzero);
        assert!((v.estimate.unwrap() - PI / 2.0).abs() < 1e-3);
        let r = ClosedForm::new(Interval::unit(), f64::sqrt);
        assert_eq!(c1_at_point(&r, 0.0, 20).unwrap().verdict, C1Class::Divergent);
    }

    /// Resolves nothing finer than `floor`.
    struct Coarse(f64);

    impl Homeomorphism for Coarse {
        fn domain(&self) -> Interval {
            Interval::unit()
        }
        fn resolve(&self, p: f64, scale: f64) -> Result<Resolved<'_>, RegularityError> {
            if scale < self.0 {
                return Err(ConjugacyError::ScaleUnderflow { p, scale, levels: 0 }.into());
            }
            Ok(Resolved::Func(&|x| x + 0.1 * (PI * x).sin()))
        }
    }

    #[test]
    fn unresolved_scales_give_inconclusive_verdicts() {
        let h = Coarse(1e-3);
        let v = c1_at_point(&h, 0.3, 20).unwrap();
        assert_eq!(v.quotients.len(), 7);
        assert_eq!(v.verdict, C1Class::Inconclusive);
        assert_eq!(v.finest_scale(), Some(S0 / 64.0));
        let u = uaa_test(&h, 0.3, &[2.0], 20, 1).unwrap();
        assert_eq!(u.curves[0].modulus.len(), 7);
        assert_eq!(u.verdict, UaaVerdict::Inconclusive);
        assert!(c1_at_point(&Coarse(1.0), 0.3, 20).is_err());
    }

    #[test]
    fn holder_examples() {
        let a = ClosedForm::new(Interval::unit(), |x: f64| 2.0 * x);
        assert!((holder_exponent(&a, Interval::unit(), 12).unwrap().gamma - 1.0).abs() < 0.02);
        let r = ClosedForm::new(Interval::unit(), f64::sqrt);
        assert!((holder_exponent(&r, Interval::unit(), 12).unwrap().gamma - 0.5).abs() < 0.05);
        let s = ClosedForm::new(Interval::unit(), sin2);
        let h = holder_exponent(&s, Interval::new(0.0, 0.1), 12).unwrap();
        assert!((h.leftmost_exponent - 2.0).abs() < 0.05);
    }

    #[test]
    fn multiplier_examples() {
        let t = MultimodalMap::tent(2.0).unwrap();
        let table = crate::conjugacy::build_conjugacy(&t, &q4(), 10).unwrap();
        let m = multiplier_obstruction(&t, &q4(), &table, 1).unwrap();
        assert_eq!(m.len(), 2);
        assert!(!m[0].matched && m[0].mult_f == 2.0 && (m[0].mult_g - 4.0).abs() < 1e-12);
        assert!(m[1].matched);
        let f = q4();
        let id = crate::conjugacy::build_conjugacy(&f, &f, 8).unwrap();
        assert!(multiplier_obstruction(&f, &f, &id, 3).unwrap().iter().all(|r| r.matched && r.mult_f == r.mult_g));
    }

    #[test]
    fn zooming_pair_at_repelling_fixed_point() {
        let f = q4();
        let g = MultimodalMap::conjugate(&f, Diffeo::SineBump { domain: Interval::unit(), amplitude: 0.1 }).unwrap();
        let c = Conjugacy::new(&f, &g, 8).unwrap();
        let z = find_zooming_pair(&c, 0.0, 1.0, 10, 0.05).unwrap();
        assert!(z.central);
        assert!(z.scales.iter().enumerate().all(|(i, s)| s.k == i + 1 && s.v_n.contains(0.0)));
        assert!(z.c_f.is_finite() && z.c_g.is_finite());
        let z = find_zooming_pair(&c, 0.3, 1.0, 12, 0.05).unwrap();
        assert!(!z.central && z.scales.len() >= 3);
    }

    #[test]
    fn attracting_map_is_refused() {
        let f = MultimodalMap::quadratic(3.2).unwrap();
        let c = Conjugacy::new(&f, &f, 6).unwrap();
        assert!(matches!(find_zooming_pair(&c, 0.0, 1.0, 6, 0.05), Err(RegularityError::HypothesisViolation { .. })));
    }
}
