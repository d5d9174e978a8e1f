use proptest::prelude::*;

use svcheck::jets::{elementary, Elementary, Jet3, JetError};

type Term = (f64, Vec<u32>);

/// `∂_{idx} (c·Π x_i^{e_i})` at `x`.
fn monomial_derivative(term: &Term, idx: &[usize], x: &[f64]) -> f64 {
    let (c, e) = term;
    let mut e: Vec<i64> = e.iter().map(|&v| v as i64).collect();
    let mut coef = *c;
    for &i in idx {
        coef *= e[i] as f64;
        e[i] -= 1;
        if coef == 0.0 {
            return 0.0;
        }
    }
    coef * x.iter().zip(&e).map(|(xi, &k)| xi.powi(k as i32)).product::<f64>()
}

fn polynomial() -> impl Strategy<Value = (usize, Vec<Term>, Vec<f64>)> {
    (1usize..=5).prop_flat_map(|n| {
        let exps = proptest::collection::vec(0u32..=3, n).prop_filter("degree ≤ 3", |e| e.iter().sum::<u32>() <= 3);
        let terms = proptest::collection::vec((-3.0f64..3.0, exps), 1..8);
        let x = proptest::collection::vec(-1.5f64..1.5, n);
        (Just(n), terms, x)
    })
}

fn eval_poly(terms: &[Term], x: &[f64]) -> Jet3 {
    let xs = Jet3::coordinates(x).unwrap();
    let mut acc = Jet3::constant(x.len(), 0.0);
    for (c, e) in terms {
        let mut t = Jet3::constant(x.len(), *c);
        for (i, &k) in e.iter().enumerate() {
            for _ in 0..k {
                t = t * xs[i];
            }
        }
        acc += t;
    }
    acc
}

fn check_slot(terms: &[Term], idx: &[usize], x: &[f64], got: f64) -> Result<(), TestCaseError> {
    let parts: Vec<f64> = terms.iter().map(|t| monomial_derivative(t, idx, x)).collect();
    let exact: f64 = parts.iter().sum();
    let scale: f64 = parts.iter().map(|v| v.abs()).sum::<f64>().max(1e-300);
    prop_assert!((got - exact).abs() <= 1e-13 * scale, "slot {idx:?}: {got} vs {exact}");
    Ok(())
}

proptest! {
    #[test]
    fn cubic_polynomials_are_exact((n, terms, x) in polynomial()) {
        let j = eval_poly(&terms, &x);
        check_slot(&terms, &[], &x, j.value())?;
        for a in 0..n {
            check_slot(&terms, &[a], &x, j.grad(a))?;
            for b in 0..n {
                check_slot(&terms, &[a, b], &x, j.hess(a, b))?;
                for c in 0..n {
                    check_slot(&terms, &[a, b, c], &x, j.third(a, b, c))?;
                }
            }
        }
    }

    #[test]
    fn mul_matches_square(x in -3.0f64..3.0, y in -3.0f64..3.0) {
        let v = Jet3::coordinates(&[x, y]).unwrap();
        let u = v[0] * v[1] + v[0].sin();
        let a = u * u;
        let b = u.powi(2).unwrap();
        for i in 0..2 {
            prop_assert!((a.grad(i) - b.grad(i)).abs() <= 1e-12 * (1.0 + a.grad(i).abs()));
            for k in 0..2 {
                prop_assert!((a.hess(i, k) - b.hess(i, k)).abs() <= 1e-12 * (1.0 + a.hess(i, k).abs()));
                prop_assert!((a.third(i, k, 0) - b.third(i, k, 0)).abs() <= 1e-12 * (1.0 + a.third(i, k, 0).abs()));
            }
        }
    }

    #[test]
    fn exp_inverts_ln(x in 0.2f64..3.0, y in 0.2f64..3.0) {
        let v = Jet3::coordinates(&[x, y]).unwrap();
        let u = v[0] * v[1] + v[1] * v[1] * v[1];
        let w = u.ln().unwrap().exp();
        prop_assert!((w.value() - u.value()).abs() <= 1e-13 * u.value());
        for i in 0..2 {
            prop_assert!((w.grad(i) - u.grad(i)).abs() <= 1e-12 * (1.0 + u.grad(i).abs()));
            for k in 0..2 {
                prop_assert!((w.hess(i, k) - u.hess(i, k)).abs() <= 1e-11 * (1.0 + u.hess(i, k).abs()));
                for l in 0..2 {
                    prop_assert!((w.third(i, k, l) - u.third(i, k, l)).abs() <= 1e-10 * (1.0 + u.third(i, k, l).abs()));
                }
            }
        }
    }
}

/// A composed test function of up to three variables.
fn composed(which: usize, x: &[Jet3]) -> Result<Jet3, JetError> {
    let (a, b, c) = (x[0], x[1], x[2]);
    match which {
        0 => Ok((a * b).sin().exp() + (a * a + 1.0).sqrt()? * (b + 2.0).ln()?),
        1 => (a * c + 3.0).div(&(b * b + 1.0))?.powf(1.5),
        2 => Ok((a.cos() * c).exp() * b.sin() - c * c * c),
        _ => elementary(Elementary::Pow, &[b * b + 1.0, a * 0.5 + c]),
    }
}

fn value_at(which: usize, x: &[f64]) -> f64 {
    composed(which, &Jet3::coordinates(x).unwrap()).unwrap().value()
}

/// Richardson-extrapolated central difference of `g` along `e_i`.
fn richardson(g: impl Fn(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let d = |h: f64| {
        let mut p = x.to_vec();
        let mut m = x.to_vec();
        p[i] += h;
        m[i] -= h;
        (g(&p) - g(&m)) / (2.0 * h)
    };
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #[test]
    fn composed_functions_match_finite_differences(
        which in 0usize..4,
        x in proptest::collection::vec(-0.8f64..0.8, 3),
    ) {
        let jet = composed(which, &Jet3::coordinates(&x).unwrap()).unwrap();
        let h = 1e-4;
        for i in 0..3 {
            let fd = richardson(|p| value_at(which, p), &x, i, h);
            prop_assert!(close(jet.grad(i), fd, 1e-6), "grad {i}: {} vs {fd}", jet.grad(i));
            for k in 0..3 {
                let fd = richardson(|p| composed(which, &Jet3::coordinates(p).unwrap()).unwrap().grad(k), &x, i, h);
                prop_assert!(close(jet.hess(k, i), fd, 1e-6), "hess {k}{i}: {} vs {fd}", jet.hess(k, i));
                for l in 0..3 {
                    let fd = richardson(
                        |p| composed(which, &Jet3::coordinates(p).unwrap()).unwrap().hess(k, l),
                        &x, i, h,
                    );
                    prop_assert!(close(jet.third(k, l, i), fd, 1e-6), "third {k}{l}{i}: {} vs {fd}", jet.third(k, l, i));
                }
            }
        }
    }
}

#[test]
fn sqrt_example() {
    let r = Jet3::lift_coordinate(0, &[4.0]).unwrap();
    let s = (1.0 - r.recip().unwrap() * 2.0).sqrt().unwrap();
    assert!((s.value() - 0.5f64.sqrt()).abs() <= 1e-15);
    assert!((s.grad(0) - (1.0 / 16.0) / 0.5f64.sqrt()).abs() <= 1e-15);
}

#[test]
fn domain_violations_are_errors() {
    let x = Jet3::lift_coordinate(0, &[-1.0]).unwrap();
    assert!(x.sqrt().is_err());
    assert!(x.ln().is_err());
    let z = Jet3::lift_coordinate(0, &[0.0]).unwrap();
    assert!(z.recip().is_err());
    assert!(elementary(Elementary::Sqrt, &[x, x]).is_err());
}
