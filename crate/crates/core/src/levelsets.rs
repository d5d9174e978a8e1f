//! Level-set functionals on warped catalog entries: the Smarr integral, the
//! monotone functionals `H_p^{c,d}` and `U_p`, and the asymptotic constant.
//!
//! Levels are parametrized by the closed-form radius `r(f)`; on these
//! entries every integrand is constant on a level, so surface integrals
//! reduce to integrand × area.

use gauss_quad::GaussLegendre;
use serde::Serialize;

use crate::boundary::BoundaryData;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::geometry::{dot, evaluate_stack, lower, CurvatureStack};
use crate::jets::Jet3;
use crate::robinson::{p_threshold, RobinsonParams, F_of, G_of};
use crate::solutions::{sphere_area, CatalogEntry, EinsteinFactor, EinsteinKind, WarpedProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum CrossSectionRule {
    Exact,
    /// Product Gauss–Legendre in hyperspherical angles.
    GaussLegendre { nodes: usize },
}

fn gl(nodes: usize) -> Result<GaussLegendre> {
    GaussLegendre::new(nodes.max(2))
        .map_err(|e| Error::InvalidParameter(format!("Gauss–Legendre rule: {e}")))
}

/// `|S^k(ρ)|` by product Gauss–Legendre in hyperspherical angles.
fn sphere_area_gl(k: usize, radius: f64, nodes: usize) -> Result<f64> {
    let rule = gl(nodes)?;
    let mut total = 2.0 * std::f64::consts::PI;
    for power in 1..k {
        total *= rule.integrate(0.0, std::f64::consts::PI, |t| t.sin().powi(power as i32));
    }
    Ok(total * radius.powi(k as i32))
}

/// Area of the cross-section; the hyperbolic chart is taken per unit area.
pub fn sigma_area(sigma: &EinsteinFactor, rule: CrossSectionRule) -> Result<f64> {
    match (rule, &sigma.kind) {
        (CrossSectionRule::GaussLegendre { nodes }, EinsteinKind::RoundSphere { radius }) => {
            sphere_area_gl(sigma.n_sigma, *radius, nodes)
        }
        (CrossSectionRule::GaussLegendre { nodes }, EinsteinKind::ProductOfSpheres { factors }) => factors
            .iter()
            .map(|(d, rho)| sphere_area_gl(*d, *rho, nodes))
            .product(),
        _ => Ok(sigma.reference_area().unwrap_or(1.0)),
    }
}

/// `F_p^{c,d}(m)`.
pub fn asymptotic_constant(n: usize, p: f64, c: f64, d: f64, m: f64) -> f64 {
    let nf = n as f64;
    let e = (nf - 1.0) * (p - 1.0) / (nf - 2.0);
    4.0 * (nf - 2.0).powf(p) / (2f64.powf(e) * (p - 1.0)) * sphere_area(n - 1) * (c + d) * m.abs().powf(p - e)
}

/// `μ_p = (p−1)(2|m|)^{(n−1)(p−1)/(n−2)}`.
pub fn mu_p(n: usize, p: f64, m: f64) -> f64 {
    let nf = n as f64;
    (p - 1.0) * (2.0 * m.abs()).powf((nf - 1.0) * (p - 1.0) / (nf - 2.0))
}

/// Geometry of one level set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelData {
    pub f: f64,
    pub r: f64,
    pub area: f64,
    /// `|∇f|` on the level.
    pub norm_grad: f64,
    /// `ν(f)` for the unit normal toward increasing `r`.
    pub kappa: f64,
    /// Mean curvature for `ν = ±∇f/|∇f|` (`+` below 1, `−` above 1).
    pub mean_curvature: f64,
    /// `H/f`, finite at `f = 0`.
    pub h_over_f: f64,
    /// Scalar curvature of the level.
    pub section_scalar: f64,
}

#[derive(Debug, Clone)]
pub struct LevelSetQuadrature {
    pub entry: CatalogEntry,
    pub profile: WarpedProfile,
    pub rule: CrossSectionRule,
    pub mode: Execution,
    sigma_area: f64,
}

impl LevelSetQuadrature {
    pub fn new(entry: &CatalogEntry, rule: CrossSectionRule) -> Result<Self> {
        let profile = entry.profile.clone().ok_or_else(|| {
            Error::Unsupported(format!("{} is not a warped entry with closed-form levels", entry.key))
        })?;
        let sigma_area = sigma_area(&profile.sigma, rule)?;
        Ok(Self {
            entry: entry.clone(),
            profile,
            rule,
            mode: Execution::default(),
            sigma_area,
        })
    }

    pub fn with_mode(mut self, mode: Execution) -> Self {
        self.mode = mode;
        self
    }

    pub fn n(&self) -> usize {
        self.profile.n
    }

    /// Smarr mass of the entry.
    pub fn mass(&self) -> f64 {
        match self.entry.family {
            crate::solutions::Family::Schwarzschild { m, .. } => m,
            _ => {
                let p = &self.profile;
                let r = 0.5 * (p.r_lo + p.r_hi);
                p.normal_derivative(r) * self.area_at(r)
                    / ((p.n as f64 - 2.0) * sphere_area(p.n - 1))
            }
        }
    }

    fn area_at(&self, r: f64) -> f64 {
        if self.profile.flat {
            self.sigma_area
        } else {
            self.sigma_area * r.powi(self.n() as i32 - 1)
        }
    }

    pub fn radius(&self, f: f64) -> Result<f64> {
        let r = self.profile.radius_at(f)?;
        let dom = self.entry.metric.domain();
        let (mut lo, hi) = (dom.lo()[0], dom.hi()[0]);
        let p = &self.profile;
        // the profile extends down to its horizon even when the chart box stops short
        if !p.flat && p.s > 0.0 && p.b < 0.0 {
            lo = lo.min((-p.b / p.s).powf(1.0 / (p.n as f64 - 2.0)));
        }
        if !(r.is_finite() && r >= lo * (1.0 - 1e-14) && r < hi) {
            return Err(Error::LapseValue {
                f,
                reason: "not a level of this entry",
            });
        }
        Ok(r)
    }

    pub fn level(&self, f: f64) -> Result<LevelData> {
        if (f - 1.0).abs() < 1e-14 {
            return Err(Error::LapseValue {
                f,
                reason: "the level f = 1 is excluded",
            });
        }
        let p = &self.profile;
        let r = self.radius(f)?;
        let kappa = p.normal_derivative(r);
        if kappa == 0.0 {
            return Err(Error::CriticalPoint { norm: 0.0 });
        }
        let along = if f < 1.0 { kappa.signum() } else { -kappa.signum() };
        let (mean_curvature, h_over_f) = if p.flat {
            (0.0, 0.0)
        } else {
            let nf = p.n as f64;
            let h = along * p.mean_curvature(r);
            // u = f/a, so H/f = (n−1)/(a r) up to orientation
            (h, along * (nf - 1.0) / (p.a * r))
        };
        Ok(LevelData {
            f,
            r,
            area: self.area_at(r),
            norm_grad: kappa.abs(),
            kappa,
            mean_curvature,
            h_over_f,
            section_scalar: p.section_scalar(r),
        })
    }

    /// A stack on the level `f` (fails on the horizon, which is not in the
    /// open chart).
    pub fn stack_on_level(&self, f: f64, shift: f64) -> Result<CurvatureStack> {
        let r = self.radius(f)?;
        evaluate_stack(&self.entry.metric, &self.entry.point_at_radius(r, shift))
    }
}

/// Smarr integral `∫ ν(f) dS` with `ν` toward increasing `r`.
pub fn smarr_integral(entry: &CatalogEntry, f_level: f64) -> Result<f64> {
    let q = LevelSetQuadrature::new(entry, CrossSectionRule::Exact)?;
    let l = q.level(f_level)?;
    Ok(l.kappa * l.area)
}

/// Smarr integrand read off a curvature stack: `ν(f)` with
/// `ν = g^{r·}/√g^{rr}`.
pub fn smarr_integral_from_stack(entry: &CatalogEntry, f_level: f64, shift: f64) -> Result<f64> {
    let q = LevelSetQuadrature::new(entry, CrossSectionRule::Exact)?;
    let s = q.stack_on_level(f_level, shift)?;
    let nu_f = s.grad_f[0] / s.g_inv[[0, 0]].sqrt();
    Ok(nu_f * q.level(f_level)?.area)
}

/// Which side of `f = 1` a trace lives on.
fn side(f0: f64, levels: &[f64]) -> Result<f64> {
    if !(f0 >= 0.0) || (f0 - 1.0).abs() < 1e-14 {
        return Err(if (f0 - 1.0).abs() < 1e-14 {
            Error::ZeroMass
        } else {
            Error::LapseValue {
                f: f0,
                reason: "boundary value must lie in [0,1) ∪ (1,∞)",
            }
        });
    }
    let below = f0 < 1.0;
    for &f in levels {
        if (f < 1.0) != below || (f - 1.0).abs() < 1e-14 {
            return Err(Error::LapseValue {
                f,
                reason: "levels must lie on the same side of 1 as the boundary value",
            });
        }
    }
    Ok(if below { 1.0 } else { -1.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneTrace {
    pub f_values: Vec<f64>,
    pub r_values: Vec<f64>,
    pub area: Vec<f64>,
    pub kappa: Vec<f64>,
    /// `H_p^{c,d}` by the mean-curvature form.
    pub h_values: Vec<f64>,
    /// `H_p^{c,d}` by the surface-integral form from a curvature stack,
    /// `None` on the horizon.
    pub h_values_surface: Vec<Option<f64>>,
    /// Largest gap between two angular samples of the stack integrand.
    pub cross_section_gap: f64,
    pub u_values: Vec<f64>,
    pub u_prime_values: Vec<f64>,
    pub params: RobinsonParams,
    pub f0: f64,
    pub mass: f64,
    /// `−F_p^{c,d}(m)`
    pub limit: f64,
}

impl MonotoneTrace {
    /// Nondecreasing in `f` below 1, nonincreasing above, up to `tol`
    /// relative to the trace scale.
    pub fn is_monotone(&self, tol: f64) -> bool {
        let sign = if self.f0 < 1.0 { 1.0 } else { -1.0 };
        let scale = self.h_values.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
        let mut idx: Vec<usize> = (0..self.f_values.len()).collect();
        idx.sort_by(|&a, &b| self.f_values[a].total_cmp(&self.f_values[b]));
        idx.windows(2)
            .all(|w| sign * (self.h_values[w[1]] - self.h_values[w[0]]) >= -tol * scale)
    }

    pub fn max_deviation_from_limit(&self) -> f64 {
        self.h_values
            .iter()
            .fold(0.0, |m, v| m.max((v - self.limit).abs()))
    }

    /// Max-abs over levels of the surface/mean-curvature gap, relative.
    pub fn route_gap(&self) -> f64 {
        self.h_values
            .iter()
            .zip(&self.h_values_surface)
            .filter_map(|(a, b)| b.map(|b| (a - b).abs() / a.abs().max(b.abs()).max(1e-300)))
            .fold(0.0, f64::max)
    }
}

/// `H_p^{c,d}` per level by the mean-curvature form.
pub fn h_functional(params: &RobinsonParams, sign: f64, l: &LevelData) -> Result<f64> {
    let fc = F_of(l.f, params)?;
    let gc = G_of(l.f, params)?;
    let ng = l.norm_grad;
    Ok(l.area * ng.powf(params.p - 1.0) * (-2.0 * fc * l.h_over_f + sign * gc * ng))
}

/// `H_p^{c,d}` per level by the surface-integral form, sampled at two
/// angular positions; returns the value and the gap between the samples.
pub fn h_functional_surface(
    q: &LevelSetQuadrature,
    params: &RobinsonParams,
    sign: f64,
    l: &LevelData,
) -> Result<(f64, f64)> {
    let one = |shift: f64| -> Result<f64> {
        let s = q.stack_on_level(l.f, shift)?;
        let f = s.f;
        let n2 = s.norm2_grad_f;
        let flow = dot(&lower(&s.g, &s.grad_norm2_grad_f), &s.grad_f);
        let fc = F_of(f, params)?;
        let gc = G_of(f, params)?;
        Ok(sign * (fc / f * n2.powf((params.p - 4.0) / 2.0) * flow + gc * n2.powf(params.p / 2.0)))
    };
    let a = one(0.0)?;
    let b = one(0.7)?;
    Ok((a * l.area, (a - b).abs() / a.abs().max(b.abs()).max(1e-300)))
}

/// `U_p` and its derivative by the level-set displays.
pub fn u_functional(q: &LevelSetQuadrature, p: f64, mass: f64, l: &LevelData) -> (f64, f64) {
    let nf = q.n() as f64;
    let e = (nf - 1.0) * (p - 1.0) / (nf - 2.0);
    let f = l.f;
    let om = 1.0 - f * f;
    let k = (2.0 * mass.abs() / om.abs()).powf(e);
    let ng = l.norm_grad;
    let u = k * l.area * ng.powf(p);
    let corr = 2.0 * (nf - 1.0) * f * ng / ((nf - 2.0) * om);
    let up = if f < 1.0 {
        -(p - 1.0) * k * l.area * ng.powf(p - 1.0) * (l.mean_curvature - corr)
    } else {
        (p - 1.0) * k * l.area * ng.powf(p - 1.0) * (l.mean_curvature + corr)
    };
    (u, up)
}

/// `U_p` as a jet in the level value, through the closed-form `r(f)`.
pub fn u_jet(q: &LevelSetQuadrature, p: f64, mass: f64, f: f64) -> Result<Jet3> {
    let prof = &q.profile;
    let nf = q.n() as f64;
    let e = (nf - 1.0) * (p - 1.0) / (nf - 2.0);
    let fj = Jet3::lift_coordinate(0, &[f])?;
    let r = prof.radius_of_level(&fj)?;
    let (area, ng) = if prof.flat {
        (Jet3::constant(1, q.sigma_area), Jet3::constant(1, prof.a))
    } else {
        let coef = (nf - 2.0) * prof.a * prof.b.abs() / 2.0;
        (r.powi(q.n() as i32 - 1)? * q.sigma_area, r.powf(1.0 - nf)? * coef)
    };
    let om = 1.0 - fj * fj;
    let om_abs = if om.value() > 0.0 { om } else { -om };
    let k = om_abs.powf(-e)? * (2.0 * mass.abs()).powf(e);
    Ok(k * area * ng.powf(p)?)
}

fn check_params(q: &LevelSetQuadrature, params: &RobinsonParams, f0: f64) -> Result<()> {
    if params.n != q.n() {
        return Err(Error::DimensionMismatch {
            expected: q.n(),
            got: params.n,
        });
    }
    let adm = params.admissibility(f0);
    if !adm.admissible() {
        return Err(Error::InvalidParameter(format!(
            "(c, d) = ({}, {}) is {} for f0 = {f0}",
            params.c,
            params.d,
            crate::boundary::admissibility_region(f0, params.c, params.d)
                .map(|r| r.to_string())
                .unwrap_or_else(|_| "undefined".into())
        )));
    }
    Ok(())
}

/// The monotone functional along `levels`, with `U_p` and `U_p′` alongside.
pub fn monotone_trace(
    q: &LevelSetQuadrature,
    params: &RobinsonParams,
    f0: f64,
    levels: &[f64],
) -> Result<MonotoneTrace> {
    check_params(q, params, f0)?;
    let sign = side(f0, levels)?;
    let mass = q.mass();
    let rows = exec::map(q.mode, levels, |&f| -> Result<_> {
        let l = q.level(f)?;
        let h = h_functional(params, sign, &l)?;
        // the surface route needs the level inside the open chart
        let surf = if f == 0.0 || l.r <= q.entry.metric.domain().lo()[0] {
            None
        } else {
            Some(h_functional_surface(q, params, sign, &l)?)
        };
        let (u, up) = u_functional(q, params.p, mass, &l);
        Ok((l, h, surf, u, up))
    });
    let mut t = MonotoneTrace {
        f_values: Vec::new(),
        r_values: Vec::new(),
        area: Vec::new(),
        kappa: Vec::new(),
        h_values: Vec::new(),
        h_values_surface: Vec::new(),
        cross_section_gap: 0.0,
        u_values: Vec::new(),
        u_prime_values: Vec::new(),
        params: *params,
        f0,
        mass,
        limit: -asymptotic_constant(q.n(), params.p, params.c, params.d, mass),
    };
    for row in rows {
        let (l, h, surf, u, up) = row?;
        t.f_values.push(l.f);
        t.r_values.push(l.r);
        t.area.push(l.area);
        t.kappa.push(l.kappa);
        t.h_values.push(h);
        t.h_values_surface.push(surf.map(|s| s.0));
        t.cross_section_gap = t.cross_section_gap.max(surf.map_or(0.0, |s| s.1));
        t.u_values.push(u);
        t.u_prime_values.push(up);
    }
    Ok(t)
}

#[allow(non_snake_case)]
pub fn monotone_H(entry: &CatalogEntry, params: &RobinsonParams, f0: f64, levels: &[f64]) -> Result<MonotoneTrace> {
    monotone_trace(&LevelSetQuadrature::new(entry, CrossSectionRule::Exact)?, params, f0, levels)
}

/// `(U_p, U_p′)` along `levels`.
#[allow(non_snake_case)]
pub fn agostiniani_U(entry: &CatalogEntry, p: f64, f0: f64, levels: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let q = LevelSetQuadrature::new(entry, CrossSectionRule::Exact)?;
    let n = q.n();
    if p < p_threshold(n) {
        return Err(Error::InvalidParameter(format!("p = {p} below the threshold {}", p_threshold(n))));
    }
    side(f0, levels)?;
    let m = q.mass();
    let mut u = Vec::with_capacity(levels.len());
    let mut up = Vec::with_capacity(levels.len());
    for &f in levels {
        let (a, b) = u_functional(&q, p, m, &q.level(f)?);
        u.push(a);
        up.push(b);
    }
    Ok((u, up))
}

/// Relative gap between `U_p′` from its display and from jet
/// differentiation of `U_p` along `f`.
pub fn u_prime_jet_gap(q: &LevelSetQuadrature, p: f64, f: f64) -> Result<f64> {
    let m = q.mass();
    let (u, up) = u_functional(q, p, m, &q.level(f)?);
    let jet = u_jet(q, p, m, f)?.grad(0);
    // U′ vanishes identically on Schwarzschild, so scale by U as well
    Ok((up - jet).abs() / up.abs().max(jet.abs()).max(u.abs()).max(1e-300))
}

/// Residual of `μ_p H_p^{c,d} = 2(cf²+d)(1−f²)U_p′/f − 4(c+d)U_p`,
/// relative to the largest term.
pub fn h_u_relation_residual(trace: &MonotoneTrace, n: usize) -> f64 {
    let mu = mu_p(n, trace.params.p, trace.mass);
    let (c, d) = (trace.params.c, trace.params.d);
    let mut worst: f64 = 0.0;
    for i in 0..trace.f_values.len() {
        let f = trace.f_values[i];
        if f == 0.0 {
            continue;
        }
        let lhs = mu * trace.h_values[i];
        let a = 2.0 * (c * f * f + d) * (1.0 - f * f) / f * trace.u_prime_values[i];
        let b = 4.0 * (c + d) * trace.u_values[i];
        // on Schwarzschild with c + d = 0 all three terms vanish; 4(|c|+|d|)U_p sets the scale
        let natural = 4.0 * (c.abs() + d.abs()) * trace.u_values[i].abs();
        let scale = lhs.abs().max(a.abs()).max(b.abs()).max(natural).max(1e-300);
        worst = worst.max((lhs - (a - b)).abs() / scale);
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondDerivativeAtHorizon {
    /// From the horizon integral of `R_{∂M}` and `|∇f|`.
    pub formula: f64,
    /// Extrapolation of `U_p′(f)/f` to `f = 0`.
    pub extrapolated: f64,
    /// `μ_p H_p^{c,d}(0)`
    pub mu_h: f64,
    /// `2d U_p″(0) − 4(c+d) U_p(0)`
    pub rhs: f64,
}

/// `U_p″(0)` on an entry with a horizon, by the horizon formula and by
/// Neville extrapolation of `U_p′(f)/f`, with the `f0 = 0` relation.
pub fn u_second_at_horizon(q: &LevelSetQuadrature, params: &RobinsonParams) -> Result<SecondDerivativeAtHorizon> {
    check_params(q, params, 0.0)?;
    let n = q.n();
    let nf = n as f64;
    let p = params.p;
    let m = q.mass();
    let e = (nf - 1.0) * (p - 1.0) / (nf - 2.0);
    let h0 = q.level(0.0)?;
    let ng = h0.norm_grad;
    let formula = -(p - 1.0) / 2.0
        * (2.0 * m).powf(e)
        * h0.area
        * ng.powf(p - 2.0)
        * (h0.section_scalar - 4.0 * (nf - 1.0) * ng * ng / (nf - 2.0));
    let hs: Vec<f64> = (0..5).map(|k| 0.04 / 2f64.powi(k)).collect();
    let mut table: Vec<f64> = Vec::with_capacity(hs.len());
    for &h in &hs {
        let (_, up) = u_functional(q, p, m, &q.level(h)?);
        table.push(up / h);
    }
    // Neville at 0
    for k in 1..hs.len() {
        for i in (k..hs.len()).rev() {
            table[i] = (hs[i - k] * table[i] - hs[i] * table[i - 1]) / (hs[i - k] - hs[i]);
        }
    }
    let extrapolated = table[hs.len() - 1];
    let hval = h_functional(params, 1.0, &h0)?;
    let (u0, _) = u_functional(q, p, m, &h0);
    Ok(SecondDerivativeAtHorizon {
        formula,
        extrapolated,
        mu_h: mu_p(n, p, m) * hval,
        rhs: 2.0 * params.d * formula - 4.0 * (params.c + params.d) * u0,
    })
}

/// Mean curvature of a level by the Hessian form and by the warped-product
/// form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanCurvature {
    pub from_hessian: f64,
    pub from_profile: f64,
}

pub fn mean_curvature_level(entry: &CatalogEntry, f_level: f64) -> Result<MeanCurvature> {
    let q = LevelSetQuadrature::new(entry, CrossSectionRule::Exact)?;
    let l = q.level(f_level)?;
    let s = q.stack_on_level(f_level, 0.3)?;
    let hff = crate::geometry::quad(&s.hess_f, &s.grad_f, &s.grad_f);
    let sign = if f_level < 1.0 { -1.0 } else { 1.0 };
    Ok(MeanCurvature {
        from_hessian: sign * hff / s.norm2_grad_f.powf(1.5),
        from_profile: l.mean_curvature,
    })
}

/// Boundary data of the level `f` of a warped entry, with `ν` toward
/// increasing `r`.
pub fn boundary_data_at(entry: &CatalogEntry, f_level: f64) -> Result<BoundaryData> {
    let q = LevelSetQuadrature::new(entry, CrossSectionRule::Exact)?;
    let l = q.level(f_level)?;
    let outward_h = if q.profile.flat { 0.0 } else { q.profile.mean_curvature(l.r) };
    Ok(BoundaryData {
        n: q.n(),
        f0: f_level,
        kappa: l.kappa,
        area: l.area,
        total_scalar: l.section_scalar * l.area,
        mean_curv: Some(outward_h),
        tracefree_norm2_integral: 0.0,
        mass: Some(q.mass()),
    })
}
