//! Static vacuum residuals, the T-tensor and its identities, and the Ricci
//! eigenvalue on the lapse gradient.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{dot, lower, norm2_t3, CurvatureStack, Tensor};
use crate::solutions::CatalogEntry;

/// Default critical-point guard on `|∇f|`.
pub const EPS_CRIT: f64 = 1e-8;
/// Default tolerance for the vacuum precondition, relative to `1 + max|∇²f|`.
pub const VACUUM_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VacuumResidual {
    /// max-abs of `∇²f − f·Ric`
    pub hessian_residual: f64,
    /// `|Δf|`
    pub laplace_residual: f64,
    /// `|R|`
    pub scalar_residual: f64,
}

impl VacuumResidual {
    pub fn max(&self) -> f64 {
        self.hessian_residual
            .max(self.laplace_residual)
            .max(self.scalar_residual)
    }
}

pub fn vacuum_residual(stack: &CurvatureStack, f_value: f64) -> VacuumResidual {
    let hess = stack
        .hess_f
        .zip_with(&stack.ricci, |h, r| h - f_value * r)
        .max_abs();
    VacuumResidual {
        hessian_residual: hess,
        laplace_residual: stack.lap_f.abs(),
        scalar_residual: stack.r_scalar.abs(),
    }
}

/// Fail with a precondition error unless the stack is vacuum to `tol`.
pub fn require_vacuum(stack: &CurvatureStack, tol: f64) -> Result<()> {
    let r = vacuum_residual(stack, stack.f);
    let scale = 1.0 + stack.hess_f.max_abs();
    if r.max() > tol * scale {
        return Err(Error::Precondition {
            check: "static vacuum",
            detail: format!(
                "residuals (hessian {:.3e}, laplace {:.3e}, scalar {:.3e}) exceed {:.1e} at {:?}",
                r.hessian_residual, r.laplace_residual, r.scalar_residual, tol * scale, stack.point
            ),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TTensor {
    /// `T_{ijk}` with all indices lowered.
    pub components: Tensor<3>,
    /// Full triple contraction `T_{ijk}T^{ijk}`.
    pub norm2: f64,
}

impl TTensor {
    /// Max-abs of `T_{ijk} + T_{jik}`.
    pub fn antisymmetry_residual(&self) -> f64 {
        let t = &self.components;
        t.indices()
            .map(|[i, j, k]| (t[[i, j, k]] + t[[j, i, k]]).abs())
            .fold(0.0, f64::max)
    }

    /// `T(·, ·, ∇f)` as a 2-tensor.
    pub fn contract_last(&self, v: &[f64]) -> Tensor<2> {
        let n = self.components.dim();
        Tensor::from_fn(n, |[i, j]| (0..n).map(|k| self.components[[i, j, k]] * v[k]).sum())
    }
}

pub fn t_tensor(stack: &CurvatureStack) -> TTensor {
    let n = stack.n;
    let nf = n as f64;
    let ric = &stack.ricci;
    let g = &stack.g;
    let df = &stack.df;
    let rdf = stack.ric_grad_f();
    let a = (nf - 1.0) / (nf - 2.0);
    let b = 1.0 / (nf - 2.0);
    let components = Tensor::from_fn(n, |[i, j, k]| {
        a * (ric[[i, k]] * df[j] - ric[[j, k]] * df[i]) - b * (rdf[i] * g[[j, k]] - rdf[j] * g[[i, k]])
    });
    let norm2 = norm2_t3(&stack.g_inv, &components);
    TTensor { components, norm2 }
}

/// `|T|²` from Ricci and `∇f` alone.
pub fn t_norm_closed_form(stack: &CurvatureStack) -> f64 {
    let nf = stack.n as f64;
    let ngf = dot(&stack.df, &stack.grad_f);
    let rdf = stack.ric_grad_f();
    let rdf_up = crate::geometry::raise(&stack.g_inv, &rdf);
    let rdf2 = dot(&rdf, &rdf_up);
    2.0 * (nf - 1.0) / ((nf - 2.0) * (nf - 2.0))
        * ((nf - 1.0) * stack.ricci_norm2() * ngf - nf * rdf2 + 2.0 * stack.r_scalar * stack.ric_ff())
}

/// Both sides of the `f²|T|²` identity and their difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// `(n−2)²/(n−1)·f²|T|²` against the expression in `|∇f|²` and its
/// derivatives. Requires vacuum to `vacuum_tol`.
pub fn lemma_t_norm_identity(stack: &CurvatureStack, f_value: f64, vacuum_tol: f64) -> Result<IdentityReport> {
    require_vacuum(stack, vacuum_tol)?;
    if f_value == 0.0 {
        return Err(Error::LapseValue {
            f: f_value,
            reason: "identity divides by f",
        });
    }
    let nf = stack.n as f64;
    let t = t_tensor(stack);
    let lhs = (nf - 2.0) * (nf - 2.0) / (nf - 1.0) * f_value * f_value * t.norm2;
    let n2 = stack.norm2_grad_f;
    let flow = dot(&lower(&stack.g, &stack.grad_norm2_grad_f), &stack.grad_f);
    let rhs = (nf - 1.0) * n2 * (stack.lap_norm2_grad_f - flow / f_value)
        - 0.5 * nf * stack.norm2_grad_norm2();
    Ok(IdentityReport {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    })
}

pub fn lemma_t_norm_identity_residual(stack: &CurvatureStack, f_value: f64, vacuum_tol: f64) -> Result<f64> {
    Ok(lemma_t_norm_identity(stack, f_value, vacuum_tol)?.residual)
}

/// The three terms of `f·C = W(·,·,·,∇f) + T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CottonWeylT {
    pub f_cotton: Tensor<3>,
    pub weyl_grad_f: Tensor<3>,
    pub t: Tensor<3>,
    pub residual: f64,
}

pub fn cotton_weyl_t(stack: &CurvatureStack, f_value: f64, vacuum_tol: f64) -> Result<CottonWeylT> {
    require_vacuum(stack, vacuum_tol)?;
    let n = stack.n;
    let f_cotton = stack.cotton.scaled(f_value);
    let weyl_grad_f = Tensor::from_fn(n, |[i, j, k]| {
        (0..n).map(|l| stack.weyl[[i, j, k, l]] * stack.grad_f[l]).sum()
    });
    let t = t_tensor(stack).components;
    let residual = f_cotton
        .indices()
        .map(|idx| (f_cotton[idx] - weyl_grad_f[idx] - t[idx]).abs())
        .fold(0.0, f64::max);
    Ok(CottonWeylT {
        f_cotton,
        weyl_grad_f,
        t,
        residual,
    })
}

pub fn cotton_weyl_t_residual(stack: &CurvatureStack, f_value: f64, vacuum_tol: f64) -> Result<f64> {
    Ok(cotton_weyl_t(stack, f_value, vacuum_tol)?.residual)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Eigen {
    Eigenvalue { lambda: f64, deviation: f64 },
    NotEigenvector { rayleigh: f64, deviation: f64 },
}

impl Eigen {
    pub fn lambda(&self) -> Option<f64> {
        match self {
            Eigen::Eigenvalue { lambda, .. } => Some(*lambda),
            Eigen::NotEigenvector { .. } => None,
        }
    }
}

/// Rayleigh quotient `Ric(∇f,∇f)/|∇f|²`, accepted when
/// `|Ric(∇f)^♯ − λ∇f| ≤ tol·|Ric|·|∇f|`.
pub fn ricci_eigenvalue_lambda(stack: &CurvatureStack, tol: f64, eps_crit: f64) -> Result<Eigen> {
    let n2 = stack.norm2_grad_f;
    if n2.sqrt() <= eps_crit {
        return Err(Error::CriticalPoint { norm: n2.sqrt() });
    }
    let lambda = stack.ric_ff() / n2;
    let rdf_up = crate::geometry::raise(&stack.g_inv, &stack.ric_grad_f());
    let diff: Vec<f64> = rdf_up
        .iter()
        .zip(&stack.grad_f)
        .map(|(a, b)| a - lambda * b)
        .collect();
    let deviation = dot(&lower(&stack.g, &diff), &diff).max(0.0).sqrt();
    if deviation <= tol * stack.ricci_norm2().sqrt() * n2.sqrt() {
        Ok(Eigen::Eigenvalue { lambda, deviation })
    } else {
        Ok(Eigen::NotEigenvector {
            rayleigh: lambda,
            deviation,
        })
    }
}

/// Max-abs of `|∇f|²Ric + (λ|∇f|²/(n−1))g − (nλ/(n−1)) df⊗df`.
pub fn ricci_structure_residual(stack: &CurvatureStack, lambda: f64) -> f64 {
    let nf = stack.n as f64;
    let n2 = stack.norm2_grad_f;
    let df = &stack.df;
    stack
        .ricci
        .indices()
        .map(|[i, j]| {
            (n2 * stack.ricci[[i, j]] + lambda * n2 / (nf - 1.0) * stack.g[[i, j]]
                - nf * lambda / (nf - 1.0) * df[i] * df[j])
                .abs()
        })
        .fold(0.0, f64::max)
}

/// `|∇²f|² − (n/(n−1))|∇|∇f||²`, using `|∇|∇f|| = |∇|∇f|²|/(2|∇f|)`.
pub fn kato_slack(stack: &CurvatureStack, eps_crit: f64) -> Result<f64> {
    let n2 = stack.norm2_grad_f;
    if n2.sqrt() <= eps_crit {
        return Err(Error::CriticalPoint { norm: n2.sqrt() });
    }
    let nf = stack.n as f64;
    let grad_norm2 = stack.norm2_grad_norm2() / (4.0 * n2);
    Ok(stack.norm2_hess_f - nf / (nf - 1.0) * grad_norm2)
}

/// Confirm an entry's expected flags at sampled points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryCheck {
    pub key: String,
    pub max_vacuum_residual: f64,
    pub max_t_norm2: f64,
    pub vacuum_confirmed: bool,
    pub t_zero_confirmed: bool,
}

pub fn validate_entry(entry: &CatalogEntry, count: usize, seed: u64) -> Result<EntryCheck> {
    let mut vac: f64 = 0.0;
    let mut tn: f64 = 0.0;
    let mut rel_vac: f64 = 0.0;
    for p in entry.sample_points(count, seed) {
        let s = crate::geometry::evaluate_stack(&entry.metric, &p)?;
        let r = vacuum_residual(&s, s.f).max();
        vac = vac.max(r);
        rel_vac = rel_vac.max(r / (1.0 + s.hess_f.max_abs()));
        tn = tn.max(t_tensor(&s).norm2);
    }
    let vacuum_confirmed = (rel_vac <= 1e-9) == entry.expected.vacuum;
    let t_zero_confirmed = !entry.expected.t_zero || tn <= 1e-16;
    Ok(EntryCheck {
        key: entry.key.clone(),
        max_vacuum_residual: vac,
        max_t_norm2: tn,
        vacuum_confirmed,
        t_zero_confirmed,
    })
}

/// Serve an entry only after its expected flags were confirmed.
pub fn checked(entry: CatalogEntry) -> Result<CatalogEntry> {
    let c = validate_entry(&entry, 6, 0xC0FFEE)?;
    if !(c.vacuum_confirmed && c.t_zero_confirmed) {
        return Err(Error::Precondition {
            check: "catalog self-consistency",
            detail: format!(
                "{}: vacuum residual {:.3e}, |T|² {:.3e} contradict the expected flags",
                c.key, c.max_vacuum_residual, c.max_t_norm2
            ),
        });
    }
    Ok(entry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{evaluate_stack, ChartedMetric, Domain};
    use crate::jets::Jet3;
    use crate::solutions::{from_key, schwarzschild, tampered_lapse};
    use approx::assert_relative_eq;

    #[test]
    fn euclidean_unit_lapse_is_exactly_vacuum() {
        let m = ChartedMetric::diagonal(
            "flat",
            3,
            Domain::boxed(vec![-1.0; 3], vec![1.0; 3]),
            |x| Ok(vec![Jet3::constant(x.len(), 1.0); x.len()]),
            |x| Ok(Jet3::constant(x.len(), 1.0)),
        )
        .unwrap();
        let s = evaluate_stack(&m, &[0.1, 0.2, 0.3]).unwrap();
        let r = vacuum_residual(&s, 1.0);
        assert_eq!(r.max(), 0.0);
        assert_eq!(t_norm_closed_form(&s), 0.0);
    }

    #[test]
    fn schwarzschild_radial_quantities() {
        let e = schwarzschild(3, 1.0).unwrap();
        let s = evaluate_stack(&e.metric, &e.point_at_radius(4.0, 0.1)).unwrap();
        assert_relative_eq!(s.norm2_grad_f, 1.0 / 256.0, max_relative = 1e-12);
        assert!(vacuum_residual(&s, s.f).max() <= 1e-12);
        let lam = ricci_eigenvalue_lambda(&s, 1e-9, EPS_CRIT).unwrap().lambda().unwrap();
        assert_relative_eq!(lam, -1.0 / 32.0, max_relative = 1e-12);
        assert!(ricci_structure_residual(&s, lam) <= 1e-12);
    }

    #[test]
    fn schwarzschild_five_dim() {
        let e = schwarzschild(5, 2.0).unwrap();
        let s = evaluate_stack(&e.metric, &e.point_at_radius(3.0, -0.2)).unwrap();
        assert!(vacuum_residual(&s, s.f).max() <= 1e-9);
        assert!(t_tensor(&s).norm2 <= 1e-18);
    }

    #[test]
    fn tampered_lapse_fails() {
        let e = tampered_lapse(3, 1.0).unwrap();
        let s = evaluate_stack(&e.metric, &e.point_at_radius(4.0, 0.0)).unwrap();
        assert!(vacuum_residual(&s, s.f).hessian_residual > 1e-2);
        assert!(lemma_t_norm_identity(&s, s.f, VACUUM_TOL).is_err());
    }

    #[test]
    fn type2_lambda() {
        let e = from_key("type2:n=3:a=0.5").unwrap();
        let s = evaluate_stack(&e.metric, &e.point_at_radius(2.0, 0.0)).unwrap();
        let lam = ricci_eigenvalue_lambda(&s, 1e-9, EPS_CRIT).unwrap().lambda().unwrap();
        assert_relative_eq!(lam, 0.125, max_relative = 1e-12);
    }

    #[test]
    fn kasner_t_nonzero() {
        let e = from_key("kasner:a=2/3:b=2/3:c=-1/3").unwrap();
        let s = evaluate_stack(&e.metric, &[0.5, 0.1, -0.2]).unwrap();
        assert!(vacuum_residual(&s, s.f).max() <= 1e-12);
        let t = t_tensor(&s);
        assert!(t.norm2 > 1e-3);
        assert_relative_eq!(t.norm2, t_norm_closed_form(&s), max_relative = 1e-10);
        let c = cotton_weyl_t(&s, s.f, VACUUM_TOL).unwrap();
        assert!(c.residual <= 1e-10);
        let l = lemma_t_norm_identity(&s, s.f, VACUUM_TOL).unwrap();
        assert!(l.lhs.abs() > 1e-3);
        assert!(l.residual <= 1e-9 * l.lhs.abs());
    }

    #[test]
    fn kasner4_weyl_cotton() {
        let e = from_key("kasner:a=1/2:b=1/2:c=1/2:e=-1/2").unwrap();
        let s = evaluate_stack(&e.metric, &[0.6, 0.1, -0.2, 0.3]).unwrap();
        let c = cotton_weyl_t(&s, s.f, VACUUM_TOL).unwrap();
        assert!(c.weyl_grad_f.max_abs() > 1e-2 && c.t.max_abs() > 1e-2);
        assert!(c.residual <= 1e-10);
        assert!(crate::geometry::weyl_cotton_relation_residual(&s).unwrap() <= 1e-9);
    }

    #[test]
    fn catalog_entries_validate() {
        for key in crate::solutions::standard_keys() {
            let e = from_key(&key).unwrap();
            checked(e).unwrap();
        }
        for key in crate::solutions::negative_control_keys() {
            let e = from_key(&key).unwrap();
            let c = validate_entry(&e, 6, 1).unwrap();
            assert!(c.vacuum_confirmed, "{key}: {c:?}");
        }
    }
}
