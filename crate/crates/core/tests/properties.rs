use std::f64::consts::PI;
use std::sync::OnceLock;

use proptest::prelude::*;

use interval_conjugacy::conjugacy::{build_conjugacy, itinerary, ConjugacyTable};
use interval_conjugacy::map_core::Diffeo;
use interval_conjugacy::orbit::{
    find_periodic_points, forward_capture_time, iterate_n, noncritical_orbit, orbit_derivative, Direction,
    PeriodicClass,
};
use interval_conjugacy::regularity::{lrd, lrd_chain};
use interval_conjugacy::renormalization::find_renormalization_intervals;
use interval_conjugacy::report::hexfloat;
use interval_conjugacy::{Interval, MultimodalMap};

fn q4() -> MultimodalMap {
    MultimodalMap::quadratic(4.0).unwrap()
}

fn phi(x: f64) -> f64 {
    x + 0.1 * (PI * x).sin()
}

fn phi_pair() -> &'static (MultimodalMap, MultimodalMap, ConjugacyTable) {
    static PAIR: OnceLock<(MultimodalMap, MultimodalMap, ConjugacyTable)> = OnceLock::new();
    PAIR.get_or_init(|| {
        let f = q4();
        let g = MultimodalMap::conjugate(&f, Diffeo::SineBump { domain: Interval::unit(), amplitude: 0.1 }).unwrap();
        let t = build_conjugacy(&f, &g, 9).unwrap();
        (f, g, t)
    })
}

fn triple() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.0..0.9f64, 0.01..0.1f64, 0.25..4.0f64).prop_map(|(x, len, r)| (x, x + len / (1.0 + r), x + len))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn lrd_ignores_affine_post_composition((x, y, z) in triple(), c in 0.3..3.0f64, a in 0.2..5.0f64, b in -1.0..1.0f64) {
        let h = |t: f64| t.powf(c);
        let l1 = lrd(h, x, y, z).unwrap();
        let l2 = lrd(|t| a * h(t) + b, x, y, z).unwrap();
        prop_assert!((l1 - l2).abs() <= 1e-9);
    }

    #[test]
    fn lrd_chain_slack_is_nonnegative((x, y, z) in triple(), c1 in 0.3..3.0f64, c2 in 0.3..3.0f64) {
        let (_, slack) = lrd_chain(|t: f64| t.powf(c1), |t: f64| (c2 * t).exp(), x, y, z).unwrap();
        prop_assert!(slack >= -1e-9);
    }

    #[test]
    fn backward_orbits_push_forward_to_the_root(lambda in 3.5..4.0f64, p in 0.05..0.95f64) {
        let f = MultimodalMap::quadratic(lambda).unwrap();
        let y = f.eval(p).unwrap();
        for node in noncritical_orbit(&f, y, 4, Direction::Backward).unwrap() {
            prop_assert!((iterate_n(&f, node.point, node.depth) - y).abs() <= 1e-9, "node {:?}", node);
            prop_assert_eq!(node.branch_chain.len(), node.depth);
        }
    }

    #[test]
    fn capture_time_is_monotone_under_inclusion(lo in 0.0..0.45f64, len in 1e-4..0.05f64, cut in 0.1..0.9f64) {
        let f = q4();
        let outer = Interval::new(lo, lo + len);
        let inner = Interval::new(lo + 0.5 * cut * len, lo + cut * len);
        let (a, b) = (forward_capture_time(&f, outer, 60), forward_capture_time(&f, inner, 60));
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert!(a <= b);
        }
    }

    #[test]
    fn table_tracks_the_smooth_conjugacy(x in 0.0..1.0f64) {
        let (f, g, t) = phi_pair();
        let w = t.max_cell_width();
        prop_assert!((t.eval(x) - phi(x)).abs() <= w);
        prop_assert!((t.eval(f.eval(x).unwrap()) - g.eval(t.eval(x)).unwrap()).abs() <= 8.0 * w);
    }

    #[test]
    fn conjugacy_preserves_itineraries(x in 0.0..1.0f64) {
        let (f, g, _) = phi_pair();
        prop_assert_eq!(itinerary(f, x, 8), itinerary(g, phi(x), 8));
    }

    #[test]
    fn truncation_keeps_breakpoints(k in 1usize..6) {
        let (_, _, t) = phi_pair();
        let coarse = t.truncated(t.depth - k);
        prop_assert!(coarse.breakpoints.len() < t.breakpoints.len());
        for b in &coarse.breakpoints {
            prop_assert!((t.eval(b.x) - b.y).abs() <= 1e-12);
        }
        prop_assert_eq!(coarse.monotonicity_violations(), 0);
    }

    #[test]
    fn periodic_points_close_up(lambda in 3.0..4.0f64) {
        let f = MultimodalMap::quadratic(lambda).unwrap();
        for p in find_periodic_points(&f, 3, 4096).unwrap() {
            prop_assert!((iterate_n(&f, p.location, p.period) - p.location).abs() <= 1e-9);
            prop_assert_eq!(p.class, PeriodicClass::of(orbit_derivative(&f, p.location, p.period)));
        }
    }

    #[test]
    fn schwarzian_is_negative_off_the_turning_point(lambda in 2.5..4.0f64, x in 0.0..1.0f64) {
        prop_assume!((x - 0.5).abs() > 1e-3);
        let f = MultimodalMap::quadratic(lambda).unwrap();
        prop_assert!(f.schwarzian(x).unwrap() < 0.0);
    }

    #[test]
    fn hexfloat_round_trips(x in any::<f64>()) {
        prop_assume!(!x.is_nan());
        prop_assert_eq!(hexfloat::parse(&hexfloat::format(x)).unwrap().to_bits(), x.to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn renormalization_interval_is_invariant(u in 0.0..1.0f64) {
        static J: OnceLock<(MultimodalMap, Interval)> = OnceLock::new();
        let (f, j) = J.get_or_init(|| {
            let f = MultimodalMap::quadratic(3.6).unwrap();
            let j = find_renormalization_intervals(&f, 4, 1 << 14).unwrap()[0].j;
            (f, j)
        });
        let x = j.at(u);
        prop_assert!(j.contains_with_tol(iterate_n(f, x, 2), 1e-12));
        prop_assert!(!j.contains_interior(f.eval(x).unwrap()));
    }
}
