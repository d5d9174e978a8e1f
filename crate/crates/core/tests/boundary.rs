use proptest::prelude::*;

use svcheck::boundary::{
    admissibility_region, black_hole_bounds, parametric_bound, photon_surface_bounds, BoundaryData, Region,
    EQUALITY_TOL,
};
use svcheck::levelsets::boundary_data_at;
use svcheck::robinson::RobinsonParams;
use svcheck::solutions::schwarzschild;
use svcheck::Error;

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(50)
}

/// Schwarzschild data at the level `f0`, distorted by the given factors.
fn distorted(n: usize, m: f64, f0: f64, area: f64, scalar: f64, h: f64) -> BoundaryData {
    let e = schwarzschild(n, m).unwrap();
    let mut b = boundary_data_at(&e, f0).unwrap();
    b.area *= area;
    b.total_scalar *= scalar * area;
    b.mean_curv = b.mean_curv.map(|v| v * h);
    b.mass = None;
    b
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn parametric_slack_splits_into_extremal_slacks(
        n in 3usize..=5,
        f0 in 0.0f64..0.9,
        p in 1.1f64..4.0,
        alpha in 0.0f64..2.0,
        beta in 0.0f64..2.0,
        area in 0.8f64..1.2, scalar in 0.8f64..1.2, h in 0.9f64..1.1,
    ) {
        let b = distorted(n, 1.0, f0, area, scalar, h);
        let (c, d) = (alpha - beta, -alpha * f0 * f0 + beta);
        let slack = |c: f64, d: f64| {
            parametric_bound(&b, &RobinsonParams::new(n, p, c, d).unwrap(), EQUALITY_TOL).unwrap().slack
        };
        let combined = alpha * slack(1.0, -f0 * f0) + beta * slack(-1.0, 1.0);
        let s = slack(c, d);
        prop_assert!((s - combined).abs() <= 1e-9 * (1.0 + s.abs().max(combined.abs())), "{s} vs {combined}");
    }

    #[test]
    fn horizon_parametric_matches_mass_bounds(
        n in 3usize..=5,
        p in 1.1f64..4.0,
        area in 0.7f64..1.3, scalar in 0.7f64..1.3,
    ) {
        let b = distorted(n, 1.0, 0.0, area, scalar, 1.0);
        let bh = black_hole_bounds(&b, EQUALITY_TOL).unwrap();
        let lower = bh.iter().find(|r| r.name == "mass_lower").unwrap();
        let upper = bh.iter().find(|r| r.name == "mass_upper").unwrap();
        let green = parametric_bound(&b, &RobinsonParams::new(n, p, 1.0, 0.0).unwrap(), EQUALITY_TOL).unwrap();
        let red = parametric_bound(&b, &RobinsonParams::new(n, p, -1.0, 1.0).unwrap(), EQUALITY_TOL).unwrap();
        if lower.slack.abs() > 1e-6 {
            prop_assert_eq!(green.slack > 0.0, lower.slack > 0.0);
        }
        if upper.slack.abs() > 1e-6 {
            prop_assert_eq!(red.slack > 0.0, upper.slack > 0.0);
        }
    }

    #[test]
    fn mass_sign_follows_boundary_value(n in 3usize..=5, m in 0.3f64..3.0, w in 0.0f64..1.0) {
        let e = schwarzschild(n, m).unwrap();
        let prof = e.profile.clone().unwrap();
        let r = prof.r_lo + w * (prof.r_hi - prof.r_lo);
        let b = boundary_data_at(&e, prof.lapse(r)).unwrap();
        prop_assert!(b.smarr_mass() > 0.0);
        let e = schwarzschild(n, -m).unwrap();
        let prof = e.profile.clone().unwrap();
        let r = prof.r_lo + w * (prof.r_hi - prof.r_lo);
        let b = boundary_data_at(&e, prof.lapse(r)).unwrap();
        prop_assert!(b.f0 > 1.0 && b.smarr_mass() < 0.0);
    }

    #[test]
    fn satisfied_iff_slack_above_tolerance(n in 3usize..=5, area in 0.5f64..1.5, scalar in 0.5f64..1.5) {
        let b = distorted(n, 1.0, 0.0, area, scalar, 1.0);
        for r in black_hole_bounds(&b, EQUALITY_TOL).unwrap() {
            let scale = r.lhs.abs().max(r.rhs.abs()).max(f64::MIN_POSITIVE);
            let tol = if r.name == "positive_mass" { 0.0 } else { EQUALITY_TOL };
            prop_assert_eq!(r.satisfied, r.slack >= -tol * scale);
        }
    }
}

#[test]
fn regions_from_examples() {
    assert_eq!(admissibility_region(0.0, 1.0, 0.0).unwrap(), Region::GreenEdge);
    assert_eq!(admissibility_region(0.0, -0.5, 1.0).unwrap(), Region::Interior);
    assert_eq!(admissibility_region(0.0, 0.0, -1.0).unwrap(), Region::Outside);
    assert_eq!(admissibility_region(0.5, 1.0, -0.25).unwrap(), Region::GreenEdge);
    assert_eq!(admissibility_region(0.9, -2.0, 1.0).unwrap(), Region::Outside);
    assert_eq!(admissibility_region(1.0, 1.0, 1.0).unwrap_err(), Error::ZeroMass);
}

#[test]
fn missing_mean_curvature_fails_loudly() {
    let e = schwarzschild(3, 1.0).unwrap();
    let mut b = boundary_data_at(&e, 0.5).unwrap();
    b.mean_curv = None;
    let err = photon_surface_bounds(&b, EQUALITY_TOL).unwrap_err();
    assert!(err.to_string().contains("mean_curv"));
    let params = RobinsonParams::new(3, 2.0, 0.0, 1.0).unwrap();
    assert!(parametric_bound(&b, &params, EQUALITY_TOL).is_err());
}

#[test]
fn origin_is_degenerate_equality_without_rigidity() {
    let e = schwarzschild(3, 1.0).unwrap();
    let b = boundary_data_at(&e, 0.0).unwrap();
    let r = parametric_bound(&b, &RobinsonParams::new(3, 2.0, 0.0, 0.0).unwrap(), EQUALITY_TOL).unwrap();
    assert!(r.equality_within && !r.rigidity);
}

#[test]
fn schwarzschild_data_gives_equality_for_every_cd() {
    let e = schwarzschild(4, 2.0).unwrap();
    for f0 in [0.0, 0.3, 0.7] {
        let b = boundary_data_at(&e, f0).unwrap();
        for (c, d) in [(1.0, -f0 * f0), (-1.0, 1.0), (0.5, 1.0)] {
            let r = parametric_bound(&b, &RobinsonParams::new(4, 2.5, c, d).unwrap(), EQUALITY_TOL).unwrap();
            assert!(r.satisfied && r.equality_within && r.rigidity, "{f0} {c} {d}: {r:?}");
        }
    }
}

#[test]
fn horizon_warnings() {
    let e = schwarzschild(3, 1.0).unwrap();
    let mut b = boundary_data_at(&e, 0.0).unwrap();
    assert!(b.warnings().is_empty());
    b.mean_curv = Some(0.1);
    assert_eq!(b.warnings().len(), 1);
    assert!(black_hole_bounds(&b, EQUALITY_TOL).is_ok());
}
