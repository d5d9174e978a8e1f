use proptest::prelude::*;

use svcheck::geometry::evaluate_stack;
use svcheck::solutions::{from_key, standard_keys};
use svcheck::static_vacuum::{
    checked, kato_slack, ricci_eigenvalue_lambda, ricci_structure_residual, t_tensor, EPS_CRIT,
};

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(24)
}

fn type_keys() -> Vec<String> {
    standard_keys().into_iter().filter(|k| k.starts_with("type")).collect()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn t_contracted_with_gradient_vanishes_on_warped_families(key in 0usize..32, seed in any::<u64>()) {
        let keys = type_keys();
        let e = from_key(&keys[key % keys.len()]).unwrap();
        let s = evaluate_stack(&e.metric, &e.sample_points(1, seed)[0]).unwrap();
        let t = t_tensor(&s);
        let scale = 1.0 + s.ricci_norm2().sqrt() * s.norm2_grad_f;
        prop_assert!(t.contract_last(&s.grad_f).max_abs() <= 1e-10 * scale);
        prop_assert!(t.antisymmetry_residual() <= 1e-12 * scale);
    }

    #[test]
    fn ricci_structure_when_t_vanishes(key in 0usize..64, seed in any::<u64>()) {
        let keys = standard_keys();
        let e = from_key(&keys[key % keys.len()]).unwrap();
        let s = evaluate_stack(&e.metric, &e.sample_points(1, seed)[0]).unwrap();
        if t_tensor(&s).norm2 <= 1e-14 {
            let lam = ricci_eigenvalue_lambda(&s, 1e-8, EPS_CRIT).unwrap().lambda().unwrap();
            prop_assert!(ricci_structure_residual(&s, lam) <= 1e-8);
        }
    }

    #[test]
    fn refined_kato_holds(key in 0usize..64, seed in any::<u64>()) {
        let keys = standard_keys();
        let e = from_key(&keys[key % keys.len()]).unwrap();
        let s = evaluate_stack(&e.metric, &e.sample_points(1, seed)[0]).unwrap();
        let slack = kato_slack(&s, EPS_CRIT).unwrap();
        prop_assert!(slack >= -1e-12 * s.norm2_hess_f.max(f64::MIN_POSITIVE), "{slack}");
    }

    #[test]
    fn type4_unit_scale_conserved_ratio(n in 3usize..=5, m in 0.5f64..3.0, t in 0.0f64..1.0, u in 0.0f64..1.0) {
        let key = format!("type4:n={n}:a=1:b={}", -2.0 * m);
        let e = from_key(&key).unwrap();
        let prof = e.profile.clone().unwrap();
        let class = e.classification().unwrap();
        let at = |w: f64| {
            let r = prof.r_lo + w * (prof.r_hi - prof.r_lo);
            let s = evaluate_stack(&e.metric, &e.point_at_radius(r, 0.2)).unwrap();
            class.conserved(s.f, s.norm2_grad_f)
        };
        let (a, b) = (at(t), at(u));
        prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(b.abs()));
    }
}

#[test]
fn every_catalog_entry_is_confirmed_before_use() {
    for key in standard_keys() {
        checked(from_key(&key).unwrap()).unwrap_or_else(|e| panic!("{key}: {e}"));
    }
}
