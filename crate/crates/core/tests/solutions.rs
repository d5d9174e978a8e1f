use proptest::prelude::*;

use svcheck::geometry::evaluate_stack;
use svcheck::solutions::{default_bump, from_key, perturb, schwarzschild, EinsteinFactor};
use svcheck::static_vacuum::{t_tensor, vacuum_residual};

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(24)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn schwarzschild_equals_type4_unit_scale(n in 3usize..=5, m in 0.5f64..2.0, w in 0.0f64..1.0) {
        let a = schwarzschild(n, m).unwrap();
        let b = from_key(&format!("type4:n={n}:a=1:b={}", -2.0 * m)).unwrap();
        let pb = b.profile.clone().unwrap();
        let r = pb.r_lo + w * (pb.r_hi - pb.r_lo);
        let sa = evaluate_stack(&a.metric, &a.point_at_radius(r, 0.1)).unwrap();
        let sb = evaluate_stack(&b.metric, &b.point_at_radius(r, -0.3)).unwrap();
        let pairs = [
            (sa.f, sb.f),
            (sa.norm2_grad_f, sb.norm2_grad_f),
            (sa.ricci_norm2(), sb.ricci_norm2()),
            (sa.ric_ff(), sb.ric_ff()),
            (sa.norm2_hess_f, sb.norm2_hess_f),
            (sa.lap_norm2_grad_f, sb.lap_norm2_grad_f),
        ];
        for (u, v) in pairs {
            prop_assert!((u - v).abs() <= 1e-10 * u.abs().max(v.abs()), "{u} vs {v}");
        }
    }

    #[test]
    fn perturbation_residual_scales_linearly(n in 3usize..=4, k in 2i32..5) {
        let base = schwarzschild(n, 1.0).unwrap();
        let bump = default_bump(&base);
        let worst = |eps: f64| {
            let e = perturb(&base, eps, bump).unwrap();
            e.sample_points(8, 11)
                .iter()
                .map(|p| {
                    let s = evaluate_stack(&e.metric, p).unwrap();
                    vacuum_residual(&s, s.f).max()
                })
                .fold(0.0, f64::max)
        };
        let eps = 10f64.powi(-k);
        let ratio = worst(eps) / worst(eps / 10.0);
        prop_assert!((8.0..=12.0).contains(&ratio), "{ratio}");
    }
}

#[test]
fn perturbation_turns_on_t() {
    let base = schwarzschild(3, 1.0).unwrap();
    let p = base.sample_points(4, 3);
    let t0 = p
        .iter()
        .map(|x| t_tensor(&evaluate_stack(&base.metric, x).unwrap()).norm2)
        .fold(0.0, f64::max);
    let e = perturb(&base, 1e-2, default_bump(&base)).unwrap();
    let t1 = p
        .iter()
        .map(|x| t_tensor(&evaluate_stack(&e.metric, x).unwrap()).norm2)
        .fold(0.0, f64::max);
    assert!(t0 <= 1e-16 && t1 > 1e-12, "{t0} {t1}");
}

#[test]
fn einstein_factors_are_einstein() {
    let factors = [
        EinsteinFactor::round_sphere(2, 1.0),
        EinsteinFactor::round_sphere(3, 1.0),
        EinsteinFactor::flat_torus(3, 1.0),
        EinsteinFactor::hyperbolic(2, -1.0).unwrap(),
        EinsteinFactor::product_of_spheres(vec![(2, 1.0 / 3f64.sqrt()), (2, 1.0 / 3f64.sqrt())]).unwrap(),
    ];
    for f in factors {
        let (lo, hi) = f.chart_box();
        let pts: Vec<Vec<f64>> = (0..5)
            .map(|k| lo.iter().zip(&hi).map(|(a, b)| a + (b - a) * (0.2 + 0.15 * k as f64) * 0.8).collect())
            .collect();
        assert!(f.einstein_residual(&pts).unwrap() <= 1e-10, "{f:?}");
    }
    assert!(EinsteinFactor::product_of_spheres(vec![(2, 1.0), (2, 0.5)]).is_err());
}

#[test]
fn table_violations_are_rejected() {
    for key in [
        "type2:n=3:a=0.5:b=1",
        "type3:n=3:a=0.4:b=-1",
        "type4:n=3:a=1:b=0",
        "type4:n=3:a=-1:b=1",
        "kasner:a=0.5:b=0.5:c=0.1",
        "type4:n=5:a=0.5:b=1:sigma=s2xs2:extra=1",
        "nosuch:n=3",
    ] {
        assert!(from_key(key).is_err(), "{key}");
    }
    assert!(schwarzschild(3, 0.0).is_err());
}
