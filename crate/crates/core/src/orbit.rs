//! Orbits, periodic points, branch inversion, expansion witnesses and
//! uniform expansion estimates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interval::Interval;
use crate::map_core::{MapError, MultimodalMap, TURNING_TIE};

/// Half-width of the neutral multiplier band.
pub const NEUTRAL_BAND: f64 = 1e-6;
/// Default grid for periodic-point isolation.
pub const DEFAULT_GRID: usize = 1 << 16;
/// Cap on backward-orbit nodes.
pub const NODE_CAP: usize = 1_000_000;
/// Residual bound for refined periodic points.
pub const PERIODIC_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("grid too coarse at period {period}: {coarse} roots at base resolution, {fine} at double")]
    GridTooCoarse { period: usize, coarse: usize, fine: usize },
    #[error("backward orbit exceeded {cap} nodes")]
    DepthExplosion { cap: usize },
    #[error("no expansion witness for {p} up to k = {k_max} (inconclusive)")]
    NotCertified { p: f64, k_max: usize },
    #[error("no admissible orbit segments avoid the {gamma}-neighbourhood of the turning points")]
    NoAdmissibleSegments { gamma: f64 },
    #[error("no turning point captured up to n = {n_max}")]
    NotCaptured { n_max: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeriodicClass {
    Repellor,
    Attractor,
    Neutral,
}

impl PeriodicClass {
    pub fn of(multiplier: f64) -> Self {
        let m = multiplier.abs();
        if m > 1.0 + NEUTRAL_BAND {
            PeriodicClass::Repellor
        } else if m >= 1.0 - NEUTRAL_BAND {
            PeriodicClass::Neutral
        } else {
            PeriodicClass::Attractor
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicPoint {
    pub location: f64,
    pub period: usize,
    pub multiplier: f64,
    pub class: PeriodicClass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackwardOrbitNode {
    pub point: f64,
    pub depth: usize,
    /// Branch indices from `point` towards the root.
    pub branch_chain: Vec<usize>,
    pub noncritical: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Approximant {
    pub point: f64,
    pub v: Interval,
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionWitness {
    pub base: f64,
    pub delta: f64,
    pub approximants: Vec<Approximant>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManeEstimate {
    pub gamma: f64,
    pub c_hat: f64,
    pub lambda_hat: f64,
    pub sample_count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Backward,
    Forward,
}

fn snap_turning(map: &MultimodalMap, x: f64) -> f64 {
    match map.turning_index_at(x) {
        Some(i) => map.turning_points_declared()[i].location,
        None => x,
    }
}

/// One step of `f` that reports escapes instead of clamping them.
pub fn step(map: &MultimodalMap, x: f64) -> Result<f64, OrbitError> {
    let d = map.domain();
    let tol = map.domain_tol();
    if !d.contains_with_tol(x, tol) {
        return Err(MapError::Domain { x, domain: d }.into());
    }
    let y = map.jet_unchecked(snap_turning(map, d.clamp(x))).value;
    if !d.contains_with_tol(y, tol) {
        return Err(MapError::Domain { x: y, domain: d }.into());
    }
    Ok(d.clamp(y))
}

/// `[x, f(x), …, f^n(x)]`.
pub fn iterate(map: &MultimodalMap, x: f64, n: usize) -> Result<Vec<f64>, OrbitError> {
    let mut out = Vec::with_capacity(n + 1);
    let mut y = x;
    if !map.domain().contains_with_tol(x, map.domain_tol()) {
        return Err(MapError::Domain { x, domain: map.domain() }.into());
    }
    out.push(map.domain().clamp(y));
    for _ in 0..n {
        y = step(map, y)?;
        out.push(y);
    }
    Ok(out)
}

pub fn iterate_n(map: &MultimodalMap, x: f64, n: usize) -> f64 {
    (0..n).fold(x, |y, _| map.eval_unchecked(y))
}

/// `Df^n(x)` as the product of branch derivatives along the orbit.
pub fn orbit_derivative(map: &MultimodalMap, x: f64, n: usize) -> f64 {
    let mut y = x;
    let mut d = 1.0;
    for _ in 0..n {
        let y0 = snap_turning(map, y);
        d *= map.jet_unchecked(y0).d1;
        y = map.eval_unchecked(y0);
    }
    d
}

fn minimal_period(map: &MultimodalMap, x: f64, n: usize) -> usize {
    let tol = PERIODIC_TOL * map.domain().len();
    (1..=n).find(|&d| n.is_multiple_of(d) && (iterate_n(map, x, d) - x).abs() <= tol).unwrap_or(n)
}

fn bisect_fixed(map: &MultimodalMap, n: usize, mut lo: f64, mut hi: f64) -> f64 {
    let g = |x: f64| iterate_n(map, x, n) - x;
    let glo = g(lo);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm > 0.0) == (glo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if g(lo).abs() <= g(hi).abs() {
        lo
    } else {
        hi
    }
}

/// Roots of `f^n(x) − x` on a uniform grid: exact zeros at grid points
/// plus one root per sign-changing cell.
fn roots_on_grid(map: &MultimodalMap, n: usize, grid: usize) -> Vec<f64> {
    let d = map.domain();
    let xs: Vec<f64> = (0..=grid).map(|k| d.at(k as f64 / grid as f64)).collect();
    let gs: Vec<f64> = xs.par_iter().map(|&x| iterate_n(map, x, n) - x).collect();
    let cells: Vec<Option<f64>> = (0..=grid)
        .into_par_iter()
        .map(|k| {
            if gs[k] == 0.0 {
                Some(xs[k])
            } else if k > 0 && gs[k - 1] != 0.0 && (gs[k - 1] > 0.0) != (gs[k] > 0.0) {
                Some(bisect_fixed(map, n, xs[k - 1], xs[k]))
            } else {
                None
            }
        })
        .collect();
    cells.into_iter().flatten().collect()
}

/// Periodic points with minimal period `≤ period_max`, sorted by period then location.
pub fn find_periodic_points(
    map: &MultimodalMap,
    period_max: usize,
    grid: usize,
) -> Result<Vec<PeriodicPoint>, OrbitError> {
    find_periodic_points_adaptive(map, period_max, grid, grid)
}

/// As [`find_periodic_points`], doubling the grid per period until the root
/// count is stable, up to `max_grid` cells.
pub fn find_periodic_points_adaptive(
    map: &MultimodalMap,
    period_max: usize,
    grid: usize,
    max_grid: usize,
) -> Result<Vec<PeriodicPoint>, OrbitError> {
    if period_max == 0 || grid < 2 {
        return Err(OrbitError::InvalidInput("period_max >= 1 and grid >= 2 required".into()));
    }
    let mut out = Vec::new();
    for n in 1..=period_max {
        let mut g = grid;
        let mut coarse = roots_on_grid(map, n, g);
        loop {
            let fine = roots_on_grid(map, n, 2 * g);
            if fine.len() <= coarse.len() {
                break;
            }
            if 2 * g > max_grid {
                return Err(OrbitError::GridTooCoarse { period: n, coarse: coarse.len(), fine: fine.len() });
            }
            g *= 2;
            coarse = fine;
        }
        for x in coarse {
            if minimal_period(map, x, n) != n {
                continue;
            }
            let multiplier = orbit_derivative(map, x, n);
            out.push(PeriodicPoint { location: x, period: n, multiplier, class: PeriodicClass::of(multiplier) });
        }
    }
    Ok(out)
}

/// Grid ceiling for internal periodic-point scans.
pub const MAX_GRID: usize = 1 << 22;

/// Cycles that break the no-attractor, no-neutral-point hypothesis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub period_max: usize,
    pub offending: Vec<PeriodicPoint>,
}

impl GateReport {
    pub fn passed(&self) -> bool {
        self.offending.is_empty()
    }
}

pub fn hypothesis_gate(map: &MultimodalMap, period_max: usize, grid: usize) -> Result<GateReport, OrbitError> {
    let pts = find_periodic_points_adaptive(map, period_max, grid, MAX_GRID)?;
    Ok(GateReport {
        period_max,
        offending: pts.into_iter().filter(|p| p.class != PeriodicClass::Repellor).collect(),
    })
}

/// All depth-1 preimages of `y`, one per branch reaching it.
pub fn preimages(map: &MultimodalMap, y: f64) -> Vec<BackwardOrbitNode> {
    let d = map.domain();
    if !d.contains_with_tol(y, map.domain_tol()) {
        return Vec::new();
    }
    let y = d.clamp(y);
    let mut out: Vec<BackwardOrbitNode> = Vec::new();
    for b in 0..map.branches().len() {
        if let Some(x) = map.solve_on_branch(b, y) {
            if out.iter().any(|n| (n.point - x).abs() <= TURNING_TIE) {
                continue;
            }
            let critical = map.turning_index_at(x).is_some();
            let x = snap_turning(map, x);
            let branch = map.branch_index(x);
            out.push(BackwardOrbitNode { point: x, depth: 1, branch_chain: vec![branch], noncritical: !critical });
        }
    }
    out
}

/// Finite-depth non-critical orbit of `p`. Backward returns the whole tree
/// with critical leaves flagged and not expanded; forward stops after the
/// first turning point.
pub fn noncritical_orbit(
    map: &MultimodalMap,
    p: f64,
    depth: usize,
    direction: Direction,
) -> Result<Vec<BackwardOrbitNode>, OrbitError> {
    noncritical_orbit_capped(map, p, depth, direction, NODE_CAP)
}

pub fn noncritical_orbit_capped(
    map: &MultimodalMap,
    p: f64,
    depth: usize,
    direction: Direction,
    cap: usize,
) -> Result<Vec<BackwardOrbitNode>, OrbitError> {
    let d = map.domain();
    if !d.contains_with_tol(p, map.domain_tol()) {
        return Err(MapError::Domain { x: p, domain: d }.into());
    }
    let root = BackwardOrbitNode { point: d.clamp(p), depth: 0, branch_chain: Vec::new(), noncritical: true };
    match direction {
        Direction::Forward => {
            let mut out = vec![root];
            let mut x = d.clamp(p);
            for k in 1..=depth {
                if map.turning_index_at(x).is_some() {
                    break;
                }
                let b = map.branch_index(x);
                x = step(map, x)?;
                let mut chain = out.last().unwrap().branch_chain.clone();
                chain.push(b);
                out.push(BackwardOrbitNode { point: x, depth: k, branch_chain: chain, noncritical: true });
            }
            Ok(out)
        }
        Direction::Backward => {
            let mut out = vec![root];
            let mut frontier = vec![0usize];
            for _ in 0..depth {
                let mut next = Vec::new();
                for &i in &frontier {
                    let parent = out[i].clone();
                    for child in preimages(map, parent.point) {
                        if out.len() >= cap {
                            return Err(OrbitError::DepthExplosion { cap });
                        }
                        let mut chain = child.branch_chain.clone();
                        chain.extend_from_slice(&parent.branch_chain);
                        let noncritical = child.noncritical;
                        out.push(BackwardOrbitNode {
                            point: child.point,
                            depth: parent.depth + 1,
                            branch_chain: chain,
                            noncritical,
                        });
                        if noncritical {
                            next.push(out.len() - 1);
                        }
                    }
                }
                frontier = next;
            }
            Ok(out)
        }
    }
}

/// Image of `j` under `f` when `j` sits inside one lap; `None` if a turning
/// point lies in the closure of `j` away from its endpoints.
pub fn monotone_image(map: &MultimodalMap, j: Interval) -> Option<Interval> {
    if map.critical_points().iter().any(|&c| j.contains_interior(c)) {
        return None;
    }
    Some(Interval::new(map.eval_unchecked(j.lo), map.eval_unchecked(j.hi)))
}

fn closure_hits_turning(map: &MultimodalMap, j: Interval) -> bool {
    map.critical_points().iter().any(|&c| j.contains_with_tol(c, TURNING_TIE))
}

/// Target ball `B_δ(y) ∩ I`.
pub fn target_ball(map: &MultimodalMap, y: f64, delta: f64) -> Interval {
    let d = map.domain();
    Interval::new(d.clamp(y - delta), d.clamp(y + delta))
}

/// Pulls `B_δ(f^k(q)) ∩ I` back along the branch chain of `q`.
pub fn pull_back_ball(map: &MultimodalMap, q: f64, k: usize, delta: f64) -> Option<Interval> {
    let orbit: Vec<f64> = (0..=k).scan(q, |y, i| {
        let cur = *y;
        if i < k {
            *y = map.eval_unchecked(cur);
        }
        Some(cur)
    }).collect();
    let mut target = target_ball(map, orbit[k], delta);
    let tol = 1e-12 * map.domain().len();
    for j in (0..k).rev() {
        let z = orbit[j];
        if map.turning_index_at(z).is_some() {
            return None;
        }
        let b = map.branch_index(z);
        let img = map.branches()[b].image();
        if !img.contains_interval(&target, tol) {
            return None;
        }
        let lo = map.solve_on_branch(b, img.clamp(target.lo))?;
        let hi = map.solve_on_branch(b, img.clamp(target.hi))?;
        let pulled = Interval::new(lo, hi);
        if closure_hits_turning(map, pulled) {
            return None;
        }
        target = pulled;
    }
    Some(target)
}

/// Post-hoc check of one approximant: every forward image stays inside a lap
/// and the last one matches the target ball. Returns the endpoint error.
pub fn verify_approximant(map: &MultimodalMap, a: &Approximant, delta: f64) -> Option<f64> {
    let mut j = a.v;
    let mut y = a.point;
    if !j.contains_with_tol(y, 1e-12) {
        return None;
    }
    for _ in 0..a.k {
        if closure_hits_turning(map, j) {
            return None;
        }
        j = monotone_image(map, j)?;
        y = map.eval_unchecked(y);
    }
    let t = target_ball(map, y, delta);
    Some((j.lo - t.lo).abs().max((j.hi - t.hi).abs()))
}

pub fn verify_witness(map: &MultimodalMap, w: &ExpansionWitness, tol: f64) -> bool {
    w.approximants.len() >= 3
        && w.approximants.windows(2).all(|p| p[0].k < p[1].k)
        && w.approximants.iter().all(|a| verify_approximant(map, a, w.delta).is_some_and(|e| e <= tol))
}

/// Searches for `V_n` with `f^{k_n}(V_n) = B_δ(f^{k_n}(p_n)) ∩ I` for `k_n = 1..=k_max`.
pub fn certify_expanding(
    map: &MultimodalMap,
    p: f64,
    delta: f64,
    k_max: usize,
    nearby: bool,
) -> Result<ExpansionWitness, OrbitError> {
    let d = map.domain();
    if !d.contains_with_tol(p, map.domain_tol()) {
        return Err(MapError::Domain { x: p, domain: d }.into());
    }
    let mut values: Vec<f64> = map.critical_points().iter().map(|&c| map.eval_unchecked(c)).collect();
    values.sort_by(f64::total_cmp);
    if let Some(gap) = values.windows(2).map(|w| w[1] - w[0]).filter(|g| *g > 0.0).reduce(f64::min) {
        if delta >= 0.5 * gap {
            return Err(OrbitError::InvalidInput(format!("delta {delta} not below half the critical-value gap {gap}")));
        }
    }
    if !(delta > 0.0) {
        return Err(OrbitError::InvalidInput("delta must be positive".into()));
    }
    let p = d.clamp(p);
    let tol = 1e-9;
    let approximants: Vec<Approximant> = (1..=k_max)
        .into_par_iter()
        .filter_map(|k| {
            let try_point = |q: f64| {
                let v = pull_back_ball(map, q, k, delta)?;
                let a = Approximant { point: q, v, k };
                (verify_approximant(map, &a, delta)? <= tol).then_some(a)
            };
            if let Some(a) = try_point(p) {
                return Some(a);
            }
            if !nearby {
                return None;
            }
            let r = 0.1 * d.len() * 0.5f64.powi(k as i32);
            (1..=16).flat_map(|i| [p - r * i as f64 / 16.0, p + r * i as f64 / 16.0])
                .filter(|q| d.contains(*q))
                .find_map(try_point)
        })
        .collect();
    if approximants.len() < 3 {
        return Err(OrbitError::NotCertified { p, k_max });
    }
    Ok(ExpansionWitness { base: p, delta, approximants })
}

/// Fits `|f^n(J)| ≥ C λ^n |J|` over orbit segments avoiding `B_γ(C_f)`.
pub fn estimate_mane_constants(
    map: &MultimodalMap,
    gamma: f64,
    samples: usize,
    n_max: usize,
) -> Result<ManeEstimate, OrbitError> {
    if !(gamma > 0.0) || samples == 0 || n_max == 0 {
        return Err(OrbitError::InvalidInput("gamma > 0, samples > 0 and n_max > 0 required".into()));
    }
    let crit = map.critical_points();
    let near_crit = |j: Interval| crit.iter().any(|&c| j.hi >= c - gamma && j.lo <= c + gamma);
    // precondition: the critical neighbourhood holds no fixed point
    let fixed = find_periodic_points(map, 1, 4096)?;
    if fixed.iter().any(|p| crit.iter().any(|&c| (p.location - c).abs() < gamma)) {
        return Err(OrbitError::NoAdmissibleSegments { gamma });
    }
    let d = map.domain();
    let len0 = 1e-6 * d.len();
    let cap = 0.01 * d.len();
    let records: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let lo = d.lo + (d.len() - len0) * (s as f64 + 0.5) / samples as f64;
            let mut j = Interval::new(lo, lo + len0);
            let mut growth = Vec::new();
            for _ in 0..n_max {
                if near_crit(j) {
                    break;
                }
                match monotone_image(map, j) {
                    Some(next) if next.len() > 0.0 => j = next,
                    _ => break,
                }
                growth.push((j.len() / len0).ln());
                if j.len() > cap {
                    break;
                }
            }
            growth
        })
        .collect();
    let admissible = records.iter().filter(|r| !r.is_empty()).count();
    if admissible == 0 {
        return Err(OrbitError::NoAdmissibleSegments { gamma });
    }
    let horizon = records.iter().map(Vec::len).max().unwrap_or(0);
    let mins: Vec<(f64, f64)> = (0..horizon)
        .filter_map(|i| {
            let m = records.iter().filter_map(|r| r.get(i)).copied().reduce(f64::min)?;
            Some(((i + 1) as f64, m))
        })
        .collect();
    let log_lambda = if mins.len() >= 2 { crate::stats::ols_slope(&mins) } else { mins[0].1 };
    let log_c = mins.iter().map(|&(n, m)| m - n * log_lambda).fold(f64::INFINITY, f64::min);
    Ok(ManeEstimate { gamma, c_hat: log_c.exp(), lambda_hat: log_lambda.exp(), sample_count: admissible })
}

/// Smallest `n ≤ n_max` with a turning point interior to `f^n(J)`.
pub fn forward_capture_time(map: &MultimodalMap, j: Interval, n_max: usize) -> Result<usize, OrbitError> {
    if !(j.len() > 0.0) {
        return Err(OrbitError::InvalidInput("degenerate interval".into()));
    }
    let mut cur = j;
    for n in 0..=n_max {
        match monotone_image(map, cur) {
            None => return Ok(n),
            Some(next) => cur = next,
        }
    }
    Err(OrbitError::NotCaptured { n_max })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q4() -> MultimodalMap {
        MultimodalMap::quadratic(4.0).unwrap()
    }

    #[test]
    fn iterate_examples() {
        assert_eq!(iterate(&q4(), 0.5, 2).unwrap(), vec![0.5, 1.0, 0.0]);
        let t = MultimodalMap::tent(2.0).unwrap();
        let o = iterate(&t, 2.0 / 3.0, 3).unwrap();
        assert!(o.iter().all(|&x| (x - 2.0 / 3.0).abs() < 1e-15));
        let o = iterate(&q4(), 0.3, 2).unwrap();
        assert!((o[1] - 0.84).abs() < 1e-15 && (o[2] - 0.5376).abs() < 1e-15);
    }

    #[test]
    fn fixed_points_and_two_cycle() {
        let pts = find_periodic_points(&q4(), 2, DEFAULT_GRID).unwrap();
        let fixed: Vec<_> = pts.iter().filter(|p| p.period == 1).collect();
        assert_eq!(fixed.len(), 2);
        assert_eq!(fixed[0].location, 0.0);
        assert!((fixed[0].multiplier - 4.0).abs() < 1e-8);
        assert!((fixed[1].location - 0.75).abs() < 1e-12);
        assert!((fixed[1].multiplier + 2.0).abs() < 1e-8);
        let two: Vec<_> = pts.iter().filter(|p| p.period == 2).collect();
        assert_eq!(two.len(), 2);
        let s5 = 5f64.sqrt();
        assert!((two[0].location - (5.0 - s5) / 8.0).abs() < 1e-12);
        assert!((two[1].location - (5.0 + s5) / 8.0).abs() < 1e-12);
        assert!(two.iter().all(|p| (p.multiplier + 4.0).abs() < 1e-8));
    }

    #[test]
    fn tent_fixed_points() {
        let t = MultimodalMap::tent(2.0).unwrap();
        let pts = find_periodic_points(&t, 1, 4096).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!((pts[0].location, pts[0].multiplier), (0.0, 2.0));
        assert!((pts[1].location - 2.0 / 3.0).abs() < 1e-12 && pts[1].multiplier == -2.0);
    }

    #[test]
    fn preimage_examples() {
        let f = q4();
        let pts: Vec<f64> = preimages(&f, 0.0).iter().map(|n| n.point).collect();
        assert_eq!(pts, vec![0.0, 1.0]);
        let top = preimages(&f, 1.0);
        assert_eq!(top.len(), 1);
        assert_eq!(top[0].point, 0.5);
        assert!(!top[0].noncritical);
        let q: Vec<f64> = preimages(&f, 0.75).iter().map(|n| n.point).collect();
        assert!((q[0] - 0.25).abs() < 1e-15 && (q[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn backward_orbit_examples() {
        let f = q4();
        let t = noncritical_orbit(&f, 0.0, 2, Direction::Backward).unwrap();
        let nc: Vec<f64> = t.iter().filter(|n| n.depth >= 1 && n.noncritical).map(|n| n.point).collect();
        assert_eq!(nc, vec![0.0, 1.0, 0.0, 1.0]);
        assert!(t.iter().any(|n| n.point == 0.5 && !n.noncritical && n.depth == 2));
        let z = noncritical_orbit(&f, 0.3, 0, Direction::Backward).unwrap();
        assert_eq!(z.len(), 1);
        assert!(matches!(
            noncritical_orbit_capped(&f, 0.3, 10, Direction::Backward, 100),
            Err(OrbitError::DepthExplosion { .. })
        ));
    }

    #[test]
    fn expanding_witnesses_at_zero_and_one() {
        let f = q4();
        for p in [0.0, 1.0] {
            let w = certify_expanding(&f, p, 0.05, 8, false).unwrap();
            assert!(w.approximants.len() >= 3);
            assert!(verify_witness(&f, &w, 1e-9));
        }
        let w = certify_expanding(&f, 0.0, 0.05, 8, false).unwrap();
        for pair in w.approximants.windows(2) {
            assert!(pair[0].v.contains_interval(&pair[1].v, 0.0));
        }
    }

    #[test]
    fn turning_point_is_not_certified() {
        let f = MultimodalMap::quadratic(3.6).unwrap();
        assert!(matches!(certify_expanding(&f, 0.5, 0.05, 8, false), Err(OrbitError::NotCertified { .. })));
    }

    #[test]
    fn mane_examples() {
        let e = estimate_mane_constants(&q4(), 0.1, 400, 30).unwrap();
        assert!(e.lambda_hat > 1.0, "{e:?}");
        let t = MultimodalMap::tent(2.0).unwrap();
        let e = estimate_mane_constants(&t, 0.1, 400, 30).unwrap();
        assert!((e.lambda_hat - 2.0).abs() < 1e-6, "{e:?}");
        assert!(matches!(estimate_mane_constants(&q4(), 0.45, 400, 30), Err(OrbitError::NoAdmissibleSegments { .. })));
    }

    #[test]
    fn capture_examples() {
        let f = q4();
        assert_eq!(forward_capture_time(&f, Interval::new(0.49, 0.51), 10).unwrap(), 0);
        assert_eq!(forward_capture_time(&f, Interval::new(0.1, 0.11), 20).unwrap(), 6);
        let mono = MultimodalMap::polynomial(&[0.0, 0.0, 1.0], Interval::unit(), false).unwrap();
        assert!(matches!(
            forward_capture_time(&mono, Interval::new(0.2, 0.3), 50),
            Err(OrbitError::NotCaptured { .. })
        ));
    }

    #[test]
    fn attracting_cycle_fails_gate() {
        let f = MultimodalMap::quadratic(3.2).unwrap();
        let g = hypothesis_gate(&f, 2, 4096).unwrap();
        assert!(!g.passed());
        assert!(g.offending.iter().any(|p| p.period == 2 && p.class == PeriodicClass::Attractor));
        assert!(hypothesis_gate(&q4(), 4, 4096).unwrap().passed());
    }
}
