//! Itineraries, kneading data and the conjugacy `h` built from matched
//! preimage trees of the turning points and the boundary.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interval::Interval;
use crate::map_core::MultimodalMap;

/// Breakpoints closer than this (relative to the domain) are merged.
pub const MERGE_TOL: f64 = 1e-15;
/// Hard limit on refinement levels.
pub const LEVEL_CAP: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConjugacyError {
    #[error("kneading mismatch: {0}")]
    KneadingMismatch(String),
    #[error("turning point counts differ: {f} vs {g}")]
    AmbiguousCorrespondence { f: usize, g: usize },
    #[error("cannot resolve scale {scale:e} near {p} within {levels} levels")]
    ScaleUnderflow { p: f64, scale: f64, levels: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Symbol {
    Lap(usize),
    Critical(usize),
}

/// Renders an itinerary; unimodal maps use `L`, `R`, `C`.
pub fn format_itinerary(laps: usize, word: &[Symbol]) -> String {
    let parts: Vec<String> = word
        .iter()
        .map(|s| match (laps, s) {
            (2, Symbol::Lap(0)) => "L".to_string(),
            (2, Symbol::Lap(_)) => "R".to_string(),
            (2, Symbol::Critical(_)) => "C".to_string(),
            (_, Symbol::Lap(i)) => format!("I{i}"),
            (_, Symbol::Critical(i)) => format!("C{i}"),
        })
        .collect();
    parts.join(" ")
}

pub fn symbol_of(map: &MultimodalMap, x: f64) -> Symbol {
    match map.turning_index_at(x) {
        Some(i) => Symbol::Critical(i),
        None => Symbol::Lap(map.branch_index(x)),
    }
}

/// Symbols of `x, f(x), …, f^{depth−1}(x)`.
pub fn itinerary(map: &MultimodalMap, x: f64, depth: usize) -> Vec<Symbol> {
    let mut out = Vec::with_capacity(depth);
    let mut y = map.domain().clamp(x);
    for _ in 0..depth {
        out.push(symbol_of(map, y));
        y = map.eval_unchecked(y);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDatum {
    pub point: f64,
    pub image: f64,
    pub fixed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KneadingData {
    pub laps: usize,
    /// Itinerary of each critical value.
    pub critical_values: Vec<Vec<Symbol>>,
    pub boundary: [BoundaryDatum; 2],
}

impl KneadingData {
    pub fn render(&self) -> Vec<String> {
        self.critical_values.iter().map(|w| format_itinerary(self.laps, w)).collect()
    }
}

pub fn kneading_data(map: &MultimodalMap, depth: usize) -> KneadingData {
    let critical_values = map
        .critical_points()
        .iter()
        .map(|&c| itinerary(map, map.eval_unchecked(c), depth))
        .collect();
    let d = map.domain();
    let datum = |x: f64| {
        let image = map.eval_unchecked(x);
        BoundaryDatum { point: x, image, fixed: (image - x).abs() <= 1e-12 * d.len() }
    };
    KneadingData { laps: map.branches().len(), critical_values, boundary: [datum(d.lo), datum(d.hi)] }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Preserving,
    Reversing,
}

impl Orientation {
    fn lap(self, laps: usize, i: usize) -> usize {
        match self {
            Orientation::Preserving => i,
            Orientation::Reversing => laps - 1 - i,
        }
    }

    fn symbol(self, laps: usize, s: Symbol) -> Symbol {
        match s {
            Symbol::Lap(i) => Symbol::Lap(self.lap(laps, i)),
            Symbol::Critical(i) => Symbol::Critical(self.lap(laps - 1, i)),
        }
    }
}

fn orientation_mismatch(f: &MultimodalMap, g: &MultimodalMap, o: Orientation, depth: usize) -> Option<String> {
    let laps = f.branches().len();
    for i in 0..laps {
        if f.branches()[i].increasing != g.branches()[o.lap(laps, i)].increasing {
            return Some(format!("lap {i} monotonicity differs"));
        }
    }
    let kf = kneading_data(f, depth);
    let kg = kneading_data(g, depth);
    let (gb0, gb1) = match o {
        Orientation::Preserving => (&kg.boundary[0], &kg.boundary[1]),
        Orientation::Reversing => (&kg.boundary[1], &kg.boundary[0]),
    };
    if kf.boundary[0].fixed != gb0.fixed || kf.boundary[1].fixed != gb1.fixed {
        return Some("boundary fixed-point behaviour differs".into());
    }
    let tp = f.critical_points().len();
    for i in 0..tp {
        let wf: Vec<Symbol> = kf.critical_values[i].iter().map(|&s| o.symbol(laps, s)).collect();
        let wg = &kg.critical_values[o.lap(tp.max(1), i).min(tp - 1)];
        if let Some(k) = wf.iter().zip(wg).position(|(a, b)| a != b) {
            return Some(format!(
                "critical value {i} itineraries diverge at symbol {k}: {} vs {}",
                format_itinerary(laps, &wf),
                format_itinerary(laps, wg)
            ));
        }
    }
    None
}

/// Orientation under which the kneading data agree to `depth`.
pub fn detect_orientation(f: &MultimodalMap, g: &MultimodalMap, depth: usize) -> Result<Orientation, ConjugacyError> {
    let (nf, ng) = (f.critical_points().len(), g.critical_points().len());
    if nf != ng {
        return Err(ConjugacyError::AmbiguousCorrespondence { f: nf, g: ng });
    }
    let pres = orientation_mismatch(f, g, Orientation::Preserving, depth);
    if pres.is_none() {
        return Ok(Orientation::Preserving);
    }
    let rev = orientation_mismatch(f, g, Orientation::Reversing, depth);
    if rev.is_none() {
        return Ok(Orientation::Reversing);
    }
    Err(ConjugacyError::KneadingMismatch(format!(
        "preserving: {}; reversing: {}",
        pres.unwrap_or_default(),
        rev.unwrap_or_default()
    )))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    pub x: f64,
    pub y: f64,
    /// Preimage level at which the pair first appears.
    pub depth: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjugacyTable {
    pub breakpoints: Vec<Breakpoint>,
    pub depth: usize,
    pub orientation: Orientation,
}

impl ConjugacyTable {
    pub fn identity(domain: Interval) -> Self {
        ConjugacyTable {
            breakpoints: vec![
                Breakpoint { x: domain.lo, y: domain.lo, depth: 0 },
                Breakpoint { x: domain.hi, y: domain.hi, depth: 0 },
            ],
            depth: 0,
            orientation: Orientation::Preserving,
        }
    }

    pub fn domain(&self) -> Interval {
        Interval::new(self.breakpoints[0].x, self.breakpoints.last().unwrap().x)
    }

    /// Piecewise-linear interpolation; exact at breakpoints.
    pub fn eval(&self, x: f64) -> f64 {
        let b = &self.breakpoints;
        let x = self.domain().clamp(x);
        let i = b.partition_point(|p| p.x < x);
        if i < b.len() && b[i].x == x {
            return b[i].y;
        }
        if i == 0 {
            return b[0].y;
        }
        if i >= b.len() {
            return b[b.len() - 1].y;
        }
        let (l, r) = (b[i - 1], b[i]);
        let t = (x - l.x) / (r.x - l.x);
        l.y + t * (r.y - l.y)
    }

    /// Largest cell extent, measured on both sides of the pairing.
    pub fn max_cell_width(&self) -> f64 {
        self.breakpoints
            .windows(2)
            .map(|w| (w[1].x - w[0].x).max((w[1].y - w[0].y).abs()))
            .fold(0.0, f64::max)
    }

    /// Largest cell extent among cells meeting `w`.
    pub fn max_cell_width_in(&self, w: Interval) -> (f64, f64) {
        self.breakpoints
            .windows(2)
            .filter(|c| c[1].x >= w.lo && c[0].x <= w.hi)
            .fold((0.0, 0.0), |(mx, my), c| (mx.max(c[1].x - c[0].x), f64::max(my, (c[1].y - c[0].y).abs())))
    }

    pub fn monotonicity_violations(&self) -> usize {
        let sign = match self.orientation {
            Orientation::Preserving => 1.0,
            Orientation::Reversing => -1.0,
        };
        self.breakpoints
            .windows(2)
            .filter(|w| !(w[1].x > w[0].x) || !(sign * (w[1].y - w[0].y) > 0.0))
            .count()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,depth\n");
        for b in &self.breakpoints {
            s.push_str(&format!("{:.17e},{:.17e},{}\n", b.x, b.y, b.depth));
        }
        s
    }

    /// Breakpoints with depth at most `depth`.
    pub fn truncated(&self, depth: usize) -> ConjugacyTable {
        ConjugacyTable {
            breakpoints: self.breakpoints.iter().copied().filter(|b| b.depth <= depth).collect(),
            depth: depth.min(self.depth),
            orientation: self.orientation,
        }
    }
}

pub fn eval_conjugacy(table: &ConjugacyTable, x: f64) -> f64 {
    table.eval(x)
}

/// Matched preimage trees of `f` and `g`, deepened on demand.
#[derive(Clone, Debug)]
pub struct Conjugacy {
    pub f: Arc<MultimodalMap>,
    pub g: Arc<MultimodalMap>,
    pub orientation: Orientation,
    base: Arc<ConjugacyTable>,
}

impl Conjugacy {
    pub fn new(f: &MultimodalMap, g: &MultimodalMap, depth: usize) -> Result<Self, ConjugacyError> {
        let orientation = detect_orientation(f, g, depth.max(1))?;
        let mut c = Conjugacy {
            f: Arc::new(f.clone()),
            g: Arc::new(g.clone()),
            orientation,
            base: Arc::new(ConjugacyTable { breakpoints: Vec::new(), depth: 0, orientation }),
        };
        let pts = c.pairs_in(f.domain(), depth)?;
        c.base = Arc::new(c.finish(pts, depth)?);
        Ok(c)
    }

    pub fn table(&self) -> &ConjugacyTable {
        &self.base
    }

    fn level0(&self) -> Vec<Breakpoint> {
        let (df, dg) = (self.f.domain(), self.g.domain());
        let (ga, gb) = match self.orientation {
            Orientation::Preserving => (dg.lo, dg.hi),
            Orientation::Reversing => (dg.hi, dg.lo),
        };
        let cf = self.f.critical_points();
        let mut cg = self.g.critical_points();
        if self.orientation == Orientation::Reversing {
            cg.reverse();
        }
        let mut out = vec![Breakpoint { x: df.lo, y: ga, depth: 0 }];
        out.extend(cf.iter().zip(&cg).map(|(&x, &y)| Breakpoint { x, y, depth: 0 }));
        out.push(Breakpoint { x: df.hi, y: gb, depth: 0 });
        out
    }

    /// Pairs of level `≤ level` whose `x` lies in `w`.
    fn pairs_in(&self, w: Interval, level: usize) -> Result<Vec<Breakpoint>, ConjugacyError> {
        let tol = 1e-12 * self.f.domain().len();
        let mut out: Vec<Breakpoint> =
            self.level0().into_iter().filter(|b| w.contains_with_tol(b.x, tol)).collect();
        if level == 0 {
            return Ok(out);
        }
        let cover = w.contains_interval(&self.f.domain(), tol);
        if cover && level <= self.base.depth && !self.base.breakpoints.is_empty() {
            return Ok(self.base.truncated(level).breakpoints);
        }
        let laps = self.f.branches().len();
        let pulled: Vec<Result<Vec<Breakpoint>, ConjugacyError>> = (0..laps)
            .into_par_iter()
            .map(|i| {
                let lap = self.f.branches()[i].interval;
                let Some(part) = w.intersect(&lap) else { return Ok(Vec::new()) };
                let img = Interval::new(self.f.eval_unchecked(part.lo), self.f.eval_unchecked(part.hi));
                let img = Interval::new(img.lo - tol, img.hi + tol);
                let gi = self.orientation.lap(laps, i);
                let parents = self.pairs_in(img, level - 1)?;
                let mut res = Vec::with_capacity(parents.len());
                for p in parents {
                    let xs = self.f.solve_on_branch(i, p.x);
                    let ys = self.g.solve_on_branch(gi, p.y);
                    match (xs, ys) {
                        (Some(x), Some(y)) => {
                            if part.contains_with_tol(x, tol) {
                                res.push(Breakpoint { x, y, depth: p.depth + 1 });
                            }
                        }
                        (None, None) => {}
                        _ => {
                            return Err(ConjugacyError::KneadingMismatch(format!(
                                "pair ({}, {}) has a preimage on lap {i} for only one map",
                                p.x, p.y
                            )))
                        }
                    }
                }
                Ok(res)
            })
            .collect();
        for r in pulled {
            out.extend(r?);
        }
        Ok(out)
    }

    fn finish(&self, mut pts: Vec<Breakpoint>, depth: usize) -> Result<ConjugacyTable, ConjugacyError> {
        pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.depth.cmp(&b.depth)));
        let merge = MERGE_TOL * self.f.domain().len();
        let mut out: Vec<Breakpoint> = Vec::with_capacity(pts.len());
        for p in pts {
            if let Some(last) = out.last_mut() {
                if p.x - last.x <= merge {
                    if p.depth < last.depth {
                        *last = p;
                    }
                    continue;
                }
            }
            out.push(p);
        }
        let t = ConjugacyTable { breakpoints: out, depth, orientation: self.orientation };
        if t.monotonicity_violations() > 0 {
            return Err(ConjugacyError::KneadingMismatch(format!(
                "{} order violations between matched breakpoints",
                t.monotonicity_violations()
            )));
        }
        Ok(t)
    }

    /// Snapshot deepened near `p` until every cell meeting `B_scale(p)` is
    /// at most `scale / 16` wide on the `x` side and `|h(B)| / 16` on the `y` side.
    pub fn refined_near(&self, p: f64, scale: f64) -> Result<ConjugacyTable, ConjugacyError> {
        self.refined_near_from(p, scale, self.base.depth)
    }

    /// As [`Conjugacy::refined_near`], starting the level search after `from`.
    pub fn refined_near_from(&self, p: f64, scale: f64, from: usize) -> Result<ConjugacyTable, ConjugacyError> {
        let d = self.f.domain();
        let w = Interval::new(d.clamp(p - scale), d.clamp(p + scale));
        let target = |t: &ConjugacyTable| {
            let (wx, wy) = t.max_cell_width_in(w);
            let span = (t.eval(w.hi) - t.eval(w.lo)).abs();
            wx <= scale / 16.0 && wy <= span / 16.0
        };
        if target(&self.base) {
            return Ok((*self.base).clone());
        }
        let outer = Interval::new(d.clamp(p - 2.0 * scale), d.clamp(p + 2.0 * scale));
        for level in from.max(self.base.depth) + 1..=LEVEL_CAP {
            let mut pts = self.pairs_in(outer, level)?;
            pts.extend(self.base.breakpoints.iter().copied().filter(|b| !outer.contains(b.x)));
            let t = self.finish(pts, level)?;
            if target(&t) {
                return Ok(t);
            }
        }
        Err(ConjugacyError::ScaleUnderflow { p, scale, levels: LEVEL_CAP })
    }
}

pub fn build_conjugacy(f: &MultimodalMap, g: &MultimodalMap, depth: usize) -> Result<ConjugacyTable, ConjugacyError> {
    Ok(Conjugacy::new(f, g, depth)?.base.as_ref().clone())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub samples: usize,
    pub sup_residual: f64,
    pub monotonicity_violations: usize,
    pub max_cell_width: f64,
}

/// `sup |ĥ(f(x)) − g(ĥ(x))|` over a uniform sample grid.
pub fn verify_conjugacy(table: &ConjugacyTable, f: &MultimodalMap, g: &MultimodalMap, samples: usize) -> ResidualReport {
    let d = f.domain();
    let n = samples.max(2);
    let sup_residual = (0..n)
        .into_par_iter()
        .map(|k| {
            let x = d.at(k as f64 / (n - 1) as f64);
            (table.eval(f.eval_unchecked(x)) - g.eval_unchecked(table.eval(x))).abs()
        })
        .reduce(|| 0.0, f64::max);
    ResidualReport {
        samples: n,
        sup_residual,
        monotonicity_violations: table.monotonicity_violations(),
        max_cell_width: table.max_cell_width(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderStatus {
    Preserved,
    Violated,
    HypothesisViolation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalOrderRecord {
    pub c_f: f64,
    pub c_g: f64,
    pub declared: (f64, f64),
    pub fitted: (f64, f64),
    pub status: OrderStatus,
}

pub fn check_critical_order(f: &MultimodalMap, g: &MultimodalMap, table: &ConjugacyTable) -> Vec<CriticalOrderRecord> {
    let cg = g.turning_points_declared();
    f.turning_points_declared()
        .iter()
        .map(|t| {
            let y = table.eval(t.location);
            let u = cg
                .iter()
                .min_by(|a, b| (a.location - y).abs().total_cmp(&(b.location - y).abs()))
                .copied()
                .unwrap_or(crate::map_core::TurningPoint { location: y, order: f64::NAN });
            let ff = f.fit_order(t.location, t.order);
            let fg = g.fit_order(u.location, u.order);
            let status = if !ff.non_flat() || !fg.non_flat() {
                OrderStatus::HypothesisViolation
            } else if (ff.fitted() - fg.fitted()).abs() <= 2.0 * crate::map_core::ORDER_BAND && t.order == u.order {
                OrderStatus::Preserved
            } else {
                OrderStatus::Violated
            };
            CriticalOrderRecord {
                c_f: t.location,
                c_g: u.location,
                declared: (t.order, u.order),
                fitted: (ff.fitted(), fg.fitted()),
                status,
            }
        })
        .collect()
}

/// Cells of the depth-`n` partition with the address of each cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionLevel {
    pub depth: usize,
    pub cells: Vec<Interval>,
    pub addresses: Vec<Vec<Symbol>>,
}

pub fn partition_level(f: &MultimodalMap, depth: usize) -> Result<PartitionLevel, ConjugacyError> {
    let t = build_conjugacy(f, f, depth)?;
    let cells: Vec<Interval> = t.breakpoints.windows(2).map(|w| Interval::new(w[0].x, w[1].x)).collect();
    let addresses = cells.iter().map(|c| itinerary(f, c.mid(), depth + 1)).collect();
    Ok(PartitionLevel { depth, cells, addresses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_core::Diffeo;

    fn q4() -> MultimodalMap {
        MultimodalMap::quadratic(4.0).unwrap()
    }

    #[test]
    fn itinerary_examples() {
        let f = q4();
        assert_eq!(format_itinerary(2, &itinerary(&f, 0.3, 4)), "L R R R");
        assert_eq!(format_itinerary(2, &itinerary(&f, 0.5, 3)), "C R L");
        let t = MultimodalMap::tent(2.0).unwrap();
        assert_eq!(format_itinerary(2, &itinerary(&t, 2.0 / 3.0, 3)), "R R R");
    }

    #[test]
    fn kneading_examples() {
        let kq = kneading_data(&q4(), 4);
        let kt = kneading_data(&MultimodalMap::tent(2.0).unwrap(), 4);
        assert_eq!(kq.render(), vec!["R L L L"]);
        assert_eq!(kt.render(), kq.render());
        let k36 = kneading_data(&MultimodalMap::quadratic(3.6).unwrap(), 8);
        assert_ne!(k36.critical_values, kneading_data(&q4(), 8).critical_values);
    }

    #[test]
    fn self_conjugacy_is_identity() {
        let f = q4();
        let t = build_conjugacy(&f, &f, 8).unwrap();
        assert!(t.breakpoints.iter().all(|b| b.x == b.y));
        assert_eq!(t.eval(0.123), 0.123);
        let r = verify_conjugacy(&t, &f, &f, 1000);
        assert!(r.sup_residual < 1e-2 && r.monotonicity_violations == 0);
    }

    #[test]
    fn tent_to_quadratic_matches_closed_form() {
        let t = MultimodalMap::tent(2.0).unwrap();
        let table = build_conjugacy(&t, &q4(), 12).unwrap();
        let h = |x: f64| (std::f64::consts::FRAC_PI_2 * x).sin().powi(2);
        let err = table.breakpoints.iter().map(|b| (b.y - h(b.x)).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-3, "{err}");
        assert!((table.eval(0.5) - 0.5).abs() < 1e-6);
        assert_eq!(table.eval(0.0), 0.0);
        let r = verify_conjugacy(&table, &t, &q4(), 10_000);
        assert!(r.sup_residual <= 5.0 * r.max_cell_width, "{r:?}");
    }

    #[test]
    fn reflected_pair_is_order_reversing() {
        let f = q4();
        let g = MultimodalMap::conjugate(&f, Diffeo::Reflect { domain: Interval::unit() }).unwrap();
        let t = build_conjugacy(&f, &g, 8).unwrap();
        assert_eq!(t.orientation, Orientation::Reversing);
        for b in &t.breakpoints {
            assert!((b.y - (1.0 - b.x)).abs() < 1e-12);
        }
    }

    #[test]
    fn non_conjugate_pair_is_rejected() {
        let r = build_conjugacy(&q4(), &MultimodalMap::quadratic(3.6).unwrap(), 8);
        assert!(matches!(r, Err(ConjugacyError::KneadingMismatch(_))));
        let r2 = MultimodalMap::polynomial(&[0.0, -1.5, 0.0, 1.0], Interval::new(-2.5f64.sqrt(), 2.5f64.sqrt()), true)
            .unwrap();
        assert!(matches!(build_conjugacy(&q4(), &r2, 4), Err(ConjugacyError::AmbiguousCorrespondence { .. })));
    }

    #[test]
    fn lazy_refinement_resolves_small_scales() {
        let f = q4();
        let phi = Diffeo::SineBump { domain: Interval::unit(), amplitude: 0.1 };
        let g = MultimodalMap::conjugate(&f, phi.clone()).unwrap();
        let c = Conjugacy::new(&f, &g, 8).unwrap();
        let t = c.refined_near(0.3, 1e-5).unwrap();
        let (wx, _) = t.max_cell_width_in(Interval::new(0.3 - 1e-5, 0.3 + 1e-5));
        assert!(wx <= 1e-5 / 16.0);
        let q = (t.eval(0.3 + 1e-5) - t.eval(0.3 - 1e-5)) / 2e-5;
        assert!((q - phi.jet(0.3).d1).abs() < 1e-4);
    }

    #[test]
    fn critical_order_checks() {
        let f = q4();
        let g = MultimodalMap::conjugate(&f, Diffeo::SineBump { domain: Interval::unit(), amplitude: 0.1 }).unwrap();
        let t = build_conjugacy(&f, &g, 6).unwrap();
        assert_eq!(check_critical_order(&f, &g, &t)[0].status, OrderStatus::Preserved);
        let quartic = MultimodalMap::polynomial(&[0.0, 8.0, -24.0, 32.0, -16.0], Interval::unit(), false).unwrap();
        let t = build_conjugacy(&f, &quartic, 6).unwrap();
        assert_eq!(check_critical_order(&f, &quartic, &t)[0].status, OrderStatus::Violated);
        let tent = MultimodalMap::tent(2.0).unwrap();
        let t = build_conjugacy(&tent, &f, 6).unwrap();
        assert_eq!(check_critical_order(&tent, &f, &t)[0].status, OrderStatus::HypothesisViolation);
    }

    #[test]
    fn partition_addresses_are_distinct() {
        let p = partition_level(&q4(), 4).unwrap();
        assert_eq!(p.cells.len(), 32);
        for w in p.addresses.windows(2) {
            assert_ne!(w[0], w[1]);
        }
    }
}
