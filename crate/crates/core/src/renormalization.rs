//! Nice sets, renormalization intervals, basins with their gap
//! decomposition, and puncture sets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interval::Interval;
use crate::map_core::MultimodalMap;
use crate::orbit::{
    self, find_periodic_points_adaptive, hypothesis_gate, iterate_n, monotone_image, noncritical_orbit, Direction,
    OrbitError, PeriodicClass,
};

/// Grid for Λ and basin scans.
pub const SCAN_GRID: usize = 1 << 16;
/// Default depth for puncture-set probing.
pub const PUNCTURE_DEPTH: usize = 18;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenormError {
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error("map has no turning points")]
    NoTurningPoints,
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("resolution: {0}")]
    Resolution(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Eventually periodic orbit: a finite pre-chain followed by a cycle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitModel {
    pub chain: Vec<f64>,
    pub cycle: Vec<f64>,
}

impl OrbitModel {
    pub fn at(&self, j: usize) -> f64 {
        if j < self.chain.len() {
            self.chain[j]
        } else {
            self.cycle[(j - self.chain.len()) % self.cycle.len()]
        }
    }

    /// Largest one-step discrepancy `|f(model_j) − model_{j+1}|`.
    pub fn consistency(&self, map: &MultimodalMap) -> f64 {
        let n = self.chain.len() + self.cycle.len();
        (0..n).map(|j| (map.eval_unchecked(self.at(j)) - self.at(j + 1)).abs()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NiceComponent {
    pub turning_point: f64,
    pub interval: Interval,
    pub left: OrbitModel,
    pub right: OrbitModel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NiceSet {
    pub epsilon: f64,
    pub horizon: usize,
    pub components: Vec<NiceComponent>,
}

impl NiceSet {
    pub fn intervals(&self) -> Vec<Interval> {
        self.components.iter().map(|c| c.interval).collect()
    }

    fn hits(&self, x: f64) -> bool {
        self.components.iter().any(|c| {
            let tol = 1e-12 * c.interval.len().max(1e-300);
            x > c.interval.lo + tol && x < c.interval.hi - tol
        })
    }

    /// Re-checks that boundary orbits avoid the union for `horizon` steps and
    /// that each orbit model is consistent with `map`.
    pub fn recheck(&self, map: &MultimodalMap, horizon: usize) -> bool {
        self.components.iter().all(|c| {
            [&c.left, &c.right].iter().all(|m| {
                m.consistency(map) <= 1e-9 && (1..=horizon).all(|j| !self.hits(m.at(j)))
            })
        })
    }
}

const NICE_PERIOD_MAX: usize = 4;
const NICE_TREE_DEPTH: usize = 8;
const GRID_HORIZON: usize = 200;

fn gate(map: &MultimodalMap) -> Result<(), RenormError> {
    let g = hypothesis_gate(map, 8, orbit::DEFAULT_GRID)?;
    if !g.passed() {
        return Err(RenormError::Hypothesis(format!(
            "{} attracting or neutral periodic points up to period {}",
            g.offending.len(),
            g.period_max
        )));
    }
    Ok(())
}

/// Truncated Λ-complement components around each turning point.
pub fn build_nice_set(map: &MultimodalMap, epsilon: f64, horizon: usize) -> Result<NiceSet, RenormError> {
    let crit = map.critical_points();
    if crit.is_empty() {
        return Err(RenormError::NoTurningPoints);
    }
    let d = map.domain();
    if !(epsilon > 0.0) || crit.windows(2).any(|w| w[1] - w[0] <= 2.0 * epsilon) {
        return Err(RenormError::InvalidInput(format!("epsilon {epsilon} balls are not disjoint")));
    }
    if crit.iter().any(|&c| c - epsilon <= d.lo || c + epsilon >= d.hi) {
        return Err(RenormError::Resolution(format!("epsilon {epsilon} balls reach the domain boundary")));
    }
    gate(map)?;
    let near = |x: f64| crit.iter().any(|&c| (x - c).abs() < epsilon);

    // Λ candidates: noncritical preimages of repelling cycles avoiding B_ε(C_f).
    let periodic = find_periodic_points_adaptive(map, NICE_PERIOD_MAX, orbit::DEFAULT_GRID, orbit::MAX_GRID)?;
    let mut candidates: Vec<(f64, OrbitModel)> = Vec::new();
    for p in periodic.iter().filter(|p| p.class == PeriodicClass::Repellor) {
        let cycle = orbit::iterate(map, p.location, p.period - 1)?;
        if cycle.iter().any(|&x| near(x)) {
            continue;
        }
        for node in noncritical_orbit(map, p.location, NICE_TREE_DEPTH, Direction::Backward)? {
            if !node.noncritical {
                continue;
            }
            let chain = orbit::iterate(map, node.point, node.depth)?;
            if chain.iter().any(|&x| near(x)) {
                continue;
            }
            let chain = chain[..node.depth].to_vec();
            candidates.push((node.point, OrbitModel { chain, cycle: cycle.clone() }));
        }
    }

    let mut components = Vec::new();
    for &c in &crit {
        let left = candidates
            .iter()
            .filter(|(x, _)| *x < c)
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .cloned();
        let right = candidates
            .iter()
            .filter(|(x, _)| *x > c)
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .cloned();
        let (Some(l), Some(r)) = (left, right) else {
            return Err(RenormError::Resolution(format!("no Λ points on both sides of {c}")));
        };
        let iv = Interval::new(l.0, r.0);
        if iv.lo <= d.lo + map.domain_tol() || iv.hi >= d.hi - map.domain_tol() {
            return Err(RenormError::Resolution(format!("component {iv} around {c} reaches the domain boundary")));
        }
        components.push(NiceComponent { turning_point: c, interval: iv, left: l.1, right: r.1 });
    }

    // Grid points inside a component that survive the avoidance test make Λ ambiguous.
    let steps = horizon.min(GRID_HORIZON);
    let ambiguous = (0..=SCAN_GRID).into_par_iter().any(|k| {
        let x = d.at(k as f64 / SCAN_GRID as f64);
        if !components.iter().any(|c| c.interval.contains_interior(x)) || near(x) {
            return false;
        }
        let mut y = x;
        for _ in 0..steps {
            y = map.eval_unchecked(y);
            if near(y) {
                return false;
            }
        }
        true
    });
    if ambiguous {
        return Err(RenormError::Resolution("grid point inside a component avoids B_ε".into()));
    }
    let set = NiceSet { epsilon, horizon, components };
    if !set.recheck(map, horizon) {
        return Err(RenormError::Resolution("boundary orbits re-enter the candidate nice set".into()));
    }
    Ok(set)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenormalizationInterval {
    pub center: f64,
    pub j: Interval,
    pub n: usize,
    pub verified_depth: usize,
}

/// `f^n(closure(J))` via the critical points of `f^n` inside `J`.
pub fn iterate_image(map: &MultimodalMap, n: usize, j: Interval) -> Result<Interval, RenormError> {
    let r = map.restricted_iterate(n, j).map_err(OrbitError::from)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut pts = vec![j.lo, j.hi];
    pts.extend(r.critical_points());
    for x in pts {
        let y = iterate_n(map, x, n);
        lo = lo.min(y);
        hi = hi.max(y);
    }
    Ok(Interval::new(lo, hi))
}

/// Critical points of `f^n` on the whole domain with their `f^n` values.
struct IterateCritical {
    points: Vec<(f64, f64)>,
}

impl IterateCritical {
    fn new(map: &MultimodalMap, n: usize) -> Result<Self, RenormError> {
        let r = map.restricted_iterate(n, map.domain()).map_err(OrbitError::from)?;
        let points = r.critical_points().into_iter().map(|x| (x, iterate_n(map, x, n))).collect();
        Ok(IterateCritical { points })
    }

    fn image(&self, map: &MultimodalMap, n: usize, j: Interval) -> Interval {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let ends = [j.lo, j.hi].map(|x| iterate_n(map, x, n));
        let inner = self.points.iter().filter(|(x, _)| j.contains_interior(*x)).map(|p| p.1);
        for y in ends.into_iter().chain(inner) {
            lo = lo.min(y);
            hi = hi.max(y);
        }
        Interval::new(lo, hi)
    }
}

fn is_renormalization(
    map: &MultimodalMap,
    crit: &IterateCritical,
    c: f64,
    n: usize,
    j: Interval,
) -> Result<bool, RenormError> {
    let d = map.domain();
    let tol = 1e-9 * d.len();
    if !j.contains_interior(c) || j.contains_interval(&d, tol) || j.len() <= tol {
        return Ok(false);
    }
    for e in [j.lo, j.hi] {
        let y = iterate_n(map, e, n);
        if (y - j.lo).abs() > tol && (y - j.hi).abs() > tol {
            return Ok(false);
        }
    }
    if !j.contains_interval(&crit.image(map, n, j), tol) {
        return Ok(false);
    }
    let r = map.restricted_iterate(n, j).map_err(OrbitError::from)?;
    Ok(r.validate_multimodal().passed())
}

/// Maximal renormalization intervals per turning point, minimal period first.
pub fn find_renormalization_intervals(
    map: &MultimodalMap,
    n_max: usize,
    grid: usize,
) -> Result<Vec<RenormalizationInterval>, RenormError> {
    let periodic = find_periodic_points_adaptive(map, n_max, grid, orbit::MAX_GRID)?;
    let mut out: Vec<RenormalizationInterval> = Vec::new();
    for &c in &map.critical_points() {
        for n in 1..=n_max {
            let crit = IterateCritical::new(map, n)?;
            let qs: Vec<f64> = periodic.iter().filter(|p| n % p.period == 0).map(|p| p.location).collect();
            let mut pairs: Vec<(f64, f64)> = Vec::new();
            for &q in &qs {
                for &q2 in &qs {
                    if (q - c) * (q2 - c) < 0.0 {
                        pairs.push((q, q2));
                    }
                }
                // partners sharing an image with q after j steps
                for jj in 1..=n {
                    let target = iterate_n(map, q, jj);
                    for node in noncritical_orbit(map, target, jj, Direction::Backward)? {
                        if node.depth == jj && (node.point - c) * (q - c) < 0.0 {
                            pairs.push((q, node.point));
                        }
                    }
                }
            }
            let mut candidates: Vec<Interval> = pairs.into_iter().map(|(a, b)| Interval::new(a, b)).collect();
            candidates.sort_by(|a, b| b.len().total_cmp(&a.len()));
            candidates.dedup_by(|a, b| (a.lo - b.lo).abs() < 1e-12 && (a.hi - b.hi).abs() < 1e-12);
            for j in candidates {
                // n must be the minimal return time for this J
                if out.iter().any(|r| r.center == c && n % r.n == 0 && (r.j.lo - j.lo).abs() < 1e-9 && (r.j.hi - j.hi).abs() < 1e-9) {
                    continue;
                }
                if is_renormalization(map, &crit, c, n, j)? {
                    out.push(RenormalizationInterval {
                        center: c,
                        j,
                        n,
                        verified_depth: n * crate::map_core::VALIDATION_PERIOD_BOUND,
                    });
                    break;
                }
            }
        }
    }
    out.sort_by(|a, b| a.n.cmp(&b.n).then(a.center.total_cmp(&b.center)));
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub g: Interval,
    pub entry_time: usize,
    /// Index into the target components.
    pub landing: usize,
    pub certified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapDecomposition {
    pub target: Vec<Interval>,
    pub gaps: Vec<Gap>,
    pub basin_fraction: f64,
    /// Interval spanned by the critical values and their images.
    pub core: Interval,
    pub core_fraction: f64,
    /// Gap endpoints, each with the step at which it lands on the target boundary.
    pub boundary_points: Vec<(f64, usize)>,
}

type Key = Option<(usize, usize, Vec<usize>)>;

fn entry_key(map: &MultimodalMap, target: &[Interval], n_max: usize, x: f64) -> Key {
    let mut y = x;
    let mut laps = Vec::new();
    for m in 0..=n_max {
        if let Some(i) = target.iter().position(|j| j.contains_interior(y)) {
            return Some((m, i, laps));
        }
        if map.turning_index_at(y).is_some() {
            return None;
        }
        laps.push(map.branch_index(y));
        y = map.eval_unchecked(y);
    }
    None
}

/// Core interval spanned by the critical values and their images.
pub fn core_interval(map: &MultimodalMap) -> Interval {
    let mut vals = Vec::new();
    for c in map.critical_points() {
        let v = map.eval_unchecked(c);
        vals.push(v);
        vals.push(map.eval_unchecked(v));
    }
    if vals.is_empty() {
        return map.domain();
    }
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Interval::new(lo, hi)
}

/// Entry-time components of the basin of `target`, with boundaries refined
/// by bisection and each gap certified by pushing it forward.
pub fn compute_basin(map: &MultimodalMap, target: &[Interval], n_max: usize, grid: usize) -> GapDecomposition {
    let d = map.domain();
    let grid = grid.max(2);
    let xs: Vec<f64> = (0..=grid).map(|k| d.at(k as f64 / grid as f64)).collect();
    let keys: Vec<Key> = xs.par_iter().map(|&x| entry_key(map, target, n_max, x)).collect();
    let refine = |mut inside: f64, mut outside: f64, key: &Key| {
        loop {
            let mid = 0.5 * (inside + outside);
            if mid == inside || mid == outside {
                break inside;
            }
            if &entry_key(map, target, n_max, mid) == key {
                inside = mid;
            } else {
                outside = mid;
            }
        }
    };
    let mut gaps = Vec::new();
    let mut k = 0;
    while k <= grid {
        let Some(key) = keys[k].clone() else {
            k += 1;
            continue;
        };
        let start = k;
        while k < grid && keys[k + 1].as_ref() == Some(&key) {
            k += 1;
        }
        let lo = if start == 0 { xs[0] } else { refine(xs[start], xs[start - 1], &Some(key.clone())) };
        let hi = if k == grid { xs[grid] } else { refine(xs[k], xs[k + 1], &Some(key.clone())) };
        let (m, landing, _) = key;
        let g = Interval::new(lo, hi);
        let mut img = g;
        let mut certified = true;
        for _ in 0..m {
            match monotone_image(map, img) {
                Some(next) => img = next,
                None => {
                    certified = false;
                    break;
                }
            }
        }
        let slack = 1e-9 * d.len();
        certified = certified && target[landing].contains_interval(&img, slack);
        gaps.push(Gap { g, entry_time: m, landing, certified });
        k += 1;
    }
    let measure: f64 = gaps.iter().map(|g| g.g.len()).sum();
    let core = core_interval(map);
    let core_measure: f64 = gaps.iter().filter_map(|g| g.g.intersect(&core)).map(|i| i.len()).sum();
    let boundary_points = gaps
        .iter()
        .flat_map(|g| [g.g.lo, g.g.hi].map(|x| (x, g.entry_time)))
        .filter(|&(x, _)| x > d.lo && x < d.hi)
        .collect();
    GapDecomposition {
        target: target.to_vec(),
        gaps,
        basin_fraction: measure / d.len(),
        core,
        core_fraction: if core.len() > 0.0 { core_measure / core.len() } else { 1.0 },
        boundary_points,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PunctureSet {
    pub points: Vec<f64>,
    pub depth: usize,
    /// Turning points whose deep backward orbits avoid the interior of `J`.
    pub critical: Vec<f64>,
}

/// Relative margin used when probing the interior of `J`.
pub const PUNCTURE_MARGIN: f64 = 1e-4;

pub fn compute_puncture_set(map: &MultimodalMap, j: Interval, depth: usize) -> Result<PunctureSet, RenormError> {
    let margin = PUNCTURE_MARGIN * j.len();
    let core = Interval::new(j.lo + margin, j.hi - margin);
    let deep = depth.div_ceil(2);
    let mut points = Vec::new();
    let mut critical = Vec::new();
    for c in map.critical_points() {
        let nodes = noncritical_orbit(map, c, depth, Direction::Backward)?;
        let dense = nodes.iter().any(|n| n.noncritical && n.depth >= deep && core.contains_interior(n.point));
        if !dense {
            critical.push(c);
            points.extend(nodes.iter().filter(|n| n.noncritical).map(|n| n.point));
        }
    }
    points.sort_by(f64::total_cmp);
    points.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    Ok(PunctureSet { points, depth, critical })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(l: f64) -> MultimodalMap {
        MultimodalMap::quadratic(l).unwrap()
    }

    #[test]
    fn quadratic_36_has_one_period_two_renormalization() {
        let f = q(3.6);
        let r = find_renormalization_intervals(&f, 4, 4096).unwrap();
        assert_eq!(r.len(), 1, "{r:?}");
        let p = 1.0 - 1.0 / 3.6;
        assert_eq!(r[0].n, 2);
        assert!((r[0].j.hi - p).abs() < 1e-10 && (r[0].j.lo - (1.0 - p)).abs() < 1e-10);
        let f2 = f.restricted_iterate(2, r[0].j).unwrap();
        assert!(f2.validate_multimodal().passed());
        let img = iterate_image(&f, 2, r[0].j).unwrap();
        assert!((img.lo - 0.324).abs() < 1e-9);
    }

    #[test]
    fn full_quadratic_is_not_renormalizable() {
        assert!(find_renormalization_intervals(&q(4.0), 8, orbit::DEFAULT_GRID).unwrap().is_empty());
    }

    #[test]
    fn basin_of_period_two_interval() {
        let f = q(3.6);
        let r = &find_renormalization_intervals(&f, 4, 4096).unwrap()[0];
        let b = compute_basin(&f, &[r.j], 64, 1 << 14);
        assert!(b.core_fraction >= 0.99, "{}", b.core_fraction);
        assert!(b.gaps.iter().all(|g| g.certified));
        for &(x, m) in &b.boundary_points {
            let y = iterate_n(&f, x, m);
            let dist = (y - r.j.lo).abs().min((y - r.j.hi).abs());
            assert!(dist < 1e-6, "{x} {m} {y}");
        }
    }

    #[test]
    fn whole_domain_basin_is_trivial() {
        let f = q(4.0);
        let i = Interval::new(-1.0, 2.0);
        let b = compute_basin(&f, &[i], 8, 1024);
        assert_eq!(b.gaps.len(), 1);
        assert_eq!(b.gaps[0].entry_time, 0);
    }

    #[test]
    fn nice_set_for_full_quadratic() {
        let f = q(4.0);
        let n = build_nice_set(&f, 0.05, 10_000).unwrap();
        assert_eq!(n.components.len(), 1);
        assert!(n.components[0].interval.contains_interior(0.5));
        assert!(n.recheck(&f, 20_000));
        assert!(matches!(build_nice_set(&f, 0.4, 100), Err(RenormError::Resolution(_))));
        let mono = MultimodalMap::polynomial(&[0.0, 0.0, 1.0], Interval::unit(), false).unwrap();
        assert!(matches!(build_nice_set(&mono, 0.05, 100), Err(RenormError::NoTurningPoints)));
    }

    #[test]
    fn puncture_sets() {
        let f = q(4.0);
        let p = compute_puncture_set(&f, f.domain(), 18).unwrap();
        assert!(p.points.is_empty() && p.critical.is_empty());
        let p0 = compute_puncture_set(&f, f.domain(), 0).unwrap();
        assert!(p0.points.len() <= 1);
        // x + 4.8 x (x − 1)(x − 0.1): both critical chains escape towards 1
        let g = MultimodalMap::polynomial(&[0.0, 1.0 + 0.48, -5.28, 4.8], Interval::unit(), false).unwrap();
        assert_eq!(g.critical_points().len(), 2);
        let pg = compute_puncture_set(&g, g.domain(), 18).unwrap();
        assert_eq!(pg.critical.len(), 2);
        assert!(!pg.points.is_empty());
        assert!(pg.points.windows(2).all(|w| w[1] - w[0] > 1e-12));
    }
}
