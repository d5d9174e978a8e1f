//! The F/G coefficients, the Z field and its divergence identity, and the
//! H/S/H̄ tensors with the conformal Killing field built from the lapse.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{dot, lower, norm2_t3, raise, CurvatureStack, Tensor};
use crate::jets::{Jet3, JetError};
use crate::static_vacuum::{require_vacuum, t_tensor, EPS_CRIT};

/// `p_n = 2 − 1/(n−1)`.
pub fn p_threshold(n: usize) -> f64 {
    2.0 - 1.0 / (n as f64 - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Regime {
    /// `p ≥ p_n`: the divergence is nonnegative where `F(f) ≥ 0`.
    pub sign_definite: bool,
    /// `p ≥ 3`: the divergence extends continuously over critical points.
    pub continuous: bool,
    /// `1 < p < p_n`: only the integrated inequality is available.
    pub inequality_only: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Admissibility {
    pub c_plus_d_nonneg: bool,
    pub c_f0_sq_plus_d_nonneg: bool,
}

impl Admissibility {
    pub fn admissible(&self) -> bool {
        self.c_plus_d_nonneg && self.c_f0_sq_plus_d_nonneg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RobinsonParams {
    pub n: usize,
    pub p: f64,
    pub c: f64,
    pub d: f64,
    pub regime: Regime,
}

impl RobinsonParams {
    pub fn new(n: usize, p: f64, c: f64, d: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter(format!("n = {n} must be at least 3")));
        }
        if !(p > 1.0) || !p.is_finite() || !c.is_finite() || !d.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "need finite c, d and p > 1 (got p = {p}, c = {c}, d = {d})"
            )));
        }
        let pn = p_threshold(n);
        Ok(Self {
            n,
            p,
            c,
            d,
            regime: Regime {
                sign_definite: p >= pn,
                continuous: p >= 3.0,
                inequality_only: p < pn,
            },
        })
    }

    pub fn p_n(&self) -> f64 {
        p_threshold(self.n)
    }

    /// `(n−1)(p−1)/(n−2) − 1`.
    pub fn exponent(&self) -> f64 {
        let nf = self.n as f64;
        (nf - 1.0) * (self.p - 1.0) / (nf - 2.0) - 1.0
    }

    pub fn admissibility(&self, f0: f64) -> Admissibility {
        Admissibility {
            c_plus_d_nonneg: self.c + self.d >= 0.0,
            c_f0_sq_plus_d_nonneg: self.c * f0 * f0 + self.d >= 0.0,
        }
    }

    pub fn with_cd(&self, c: f64, d: f64) -> Self {
        Self { c, d, ..*self }
    }
}

fn check_t(t: f64) -> Result<()> {
    if !(t >= 0.0) || t == 1.0 || !t.is_finite() {
        return Err(Error::LapseValue {
            f: t,
            reason: "F and G are defined on [0,1) ∪ (1,∞)",
        });
    }
    Ok(())
}

/// `|1 − t²|` as a jet, with the sign of `1 − t²`.
fn one_minus_sq(t: &Jet3) -> (Jet3, f64) {
    let q = 1.0 - *t * *t;
    if q.value() > 0.0 {
        (q, 1.0)
    } else {
        (-q, -1.0)
    }
}

pub fn f_jet(t: &Jet3, params: &RobinsonParams) -> std::result::Result<Jet3, JetError> {
    let (q, _) = one_minus_sq(t);
    Ok((*t * *t * params.c + params.d) * q.powf(-params.exponent())?)
}

pub fn g_jet(t: &Jet3, params: &RobinsonParams) -> std::result::Result<Jet3, JetError> {
    let e = params.exponent();
    let (q, sign) = one_minus_sq(t);
    let pm1 = params.p - 1.0;
    let first = f_jet(t, params)? * q.recip()? * (4.0 * e * sign / pm1);
    let second = q.powf(-e)? * (4.0 * params.c / pm1);
    Ok(first - second)
}

#[allow(non_snake_case)]
pub fn F_of(t: f64, params: &RobinsonParams) -> Result<f64> {
    check_t(t)?;
    Ok(f_jet(&Jet3::constant(1, t), params)?.value())
}

#[allow(non_snake_case)]
pub fn G_of(t: f64, params: &RobinsonParams) -> Result<f64> {
    check_t(t)?;
    Ok(g_jet(&Jet3::constant(1, t), params)?.value())
}

/// Residuals of the first-order system satisfied by `(F, G)`, with the
/// derivatives taken by jet differentiation.
#[allow(non_snake_case)]
pub fn FG_ode_residual(t: f64, params: &RobinsonParams) -> Result<(f64, f64)> {
    check_t(t)?;
    let tj = Jet3::lift_coordinate(0, &[t])?;
    let fj = f_jet(&tj, params)?;
    let gj = g_jet(&tj, params)?;
    let nf = params.n as f64;
    let e = params.exponent();
    let q = 1.0 - t * t;
    let rhs_f = 4.0 * e * t * fj.value() / q - 0.5 * (params.p - 1.0) * t * gj.value();
    let rhs_g = 8.0 * (nf - 1.0) / (nf - 2.0) * e * t * fj.value() / (q * q);
    Ok(((fj.grad(0) - rhs_f).abs(), (gj.grad(0) - rhs_g).abs()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZFieldSample {
    /// `Z` with its index raised.
    pub z: Vec<f64>,
    pub div_z: f64,
    /// `|∇f|^{p−3}F(f)·(n−2)²f|T|²/(n−1)²`
    pub rhs_t_term: f64,
    /// `|∇f|^{p−3}F(f)·((p−p_n)/(2f))|∇|∇f|² + …|²`
    pub rhs_grad_term: f64,
    /// `|∇f|²·div Z`
    pub lhs: f64,
    pub f: f64,
    pub f_coeff: f64,
    /// `|∇f|²/√det g` times the summed magnitudes of the product-rule terms
    /// in `∂_i(√det g Z^i)`: the size of what cancels on the left-hand side.
    pub lhs_term_scale: f64,
    /// `|Ric|` at the point.
    pub ricci_norm: f64,
}

/// Relative size of the cancellation floor against `lhs_term_scale`.
pub const TERM_FLOOR_REL: f64 = 1e-8;

impl ZFieldSample {
    pub fn rhs_total(&self) -> f64 {
        self.rhs_t_term + self.rhs_grad_term
    }

    /// `max(1e-6·(|Ric|+1), TERM_FLOOR_REL·lhs_term_scale)`; both sides are
    /// rounding noise below it.
    pub fn floor(&self) -> f64 {
        (1e-6 * (self.ricci_norm + 1.0)).max(TERM_FLOOR_REL * self.lhs_term_scale)
    }

    /// `|LHS − RHS| / max(|LHS|, |RHS|, floor)`.
    pub fn residual(&self) -> f64 {
        let rhs = self.rhs_total();
        (self.lhs - rhs).abs() / self.lhs.abs().max(rhs.abs()).max(self.floor())
    }
}

fn guard_lapse(stack: &CurvatureStack, f_value: f64) -> Result<()> {
    if f_value <= 0.0 {
        return Err(Error::LapseValue {
            f: f_value,
            reason: "the lapse must be positive",
        });
    }
    if (f_value - 1.0).abs() < 1e-12 {
        return Err(Error::LapseValue {
            f: f_value,
            reason: "the level f = 1 is excluded",
        });
    }
    let norm = stack.norm2_grad_f.sqrt();
    if norm <= EPS_CRIT {
        return Err(Error::CriticalPoint { norm });
    }
    Ok(())
}

/// `Z^i` as jets (order 1) for the divergence, with the size of the
/// product-rule terms of `Σ_i ∂_i(√det g Z^i)`.
fn z_jets(stack: &CurvatureStack, params: &RobinsonParams) -> std::result::Result<(Vec<Jet3>, f64), JetError> {
    let n = stack.n;
    let j = &stack.jets;
    let f = j.f;
    let nn = j.norm2_grad_f;
    let sd = j.sqrt_det;
    let df: Vec<Jet3> = (0..n).map(|i| f.partial(i)).collect();
    let dn: Vec<Jet3> = (0..n).map(|i| nn.partial(i)).collect();
    let fcoef = f_jet(&f, params)?.div(&f)? * nn.powf((params.p - 3.0) / 2.0)?;
    let gcoef = g_jet(&f, params)? * nn.powf((params.p - 1.0) / 2.0)?;
    let mut size = 0.0;
    let z = (0..n)
        .map(|a| {
            let mut s = Jet3::constant(n, 0.0).truncate(1);
            for b in 0..n {
                let gi = j.g_inv[a * n + b];
                let x = fcoef * dn[b] + gcoef * df[b];
                s += gi * x;
                let inner = (fcoef.grad(a) * dn[b].value()).abs()
                    + (fcoef.value() * dn[b].grad(a)).abs()
                    + (gcoef.grad(a) * df[b].value()).abs()
                    + (gcoef.value() * df[b].grad(a)).abs();
                size += (sd.grad(a) * gi.value() * x.value()).abs()
                    + (sd.value() * gi.grad(a) * x.value()).abs()
                    + (sd.value() * gi.value()).abs() * inner;
            }
            s
        })
        .collect();
    Ok((z, size / sd.value().abs()))
}

/// `div V = ∂_i(√det g V^i)/√det g` for jet components `V^i`.
fn divergence(stack: &CurvatureStack, v: &[Jet3]) -> f64 {
    let sd = stack.jets.sqrt_det;
    let total: f64 = v.iter().enumerate().map(|(i, vi)| (sd * *vi).grad(i)).sum();
    total / sd.value()
}

/// `Z`, its divergence by direct expansion, and the two curvature terms of
/// the right-hand side.
pub fn z_field_sample(
    stack: &CurvatureStack,
    f_value: f64,
    params: &RobinsonParams,
    vacuum_tol: f64,
) -> Result<ZFieldSample> {
    if params.n != stack.n {
        return Err(Error::DimensionMismatch {
            expected: stack.n,
            got: params.n,
        });
    }
    guard_lapse(stack, f_value)?;
    require_vacuum(stack, vacuum_tol)?;
    let (zj, div_size) = z_jets(stack, params)?;
    let div_z = divergence(stack, &zj);
    let z: Vec<f64> = zj.iter().map(|j| j.value()).collect();

    let nf = stack.n as f64;
    let f = f_value;
    let n2 = stack.norm2_grad_f;
    let fc = F_of(f, params)?;
    let weight = n2.powf((params.p - 3.0) / 2.0) * fc;
    let t2 = t_tensor(stack).norm2;
    let rhs_t_term = weight * (nf - 2.0) * (nf - 2.0) * f / ((nf - 1.0) * (nf - 1.0)) * t2;
    // ∇|∇f|² = 2f·Ric(∇f, ·)^♯ in vacuum
    let rdf = raise(&stack.g_inv, &stack.ric_grad_f());
    let k = 4.0 * (nf - 1.0) / (nf - 2.0) * f * n2 / (1.0 - f * f);
    let v: Vec<f64> = (0..stack.n)
        .map(|i| 2.0 * f * rdf[i] + k * stack.grad_f[i])
        .collect();
    let v2 = dot(&lower(&stack.g, &v), &v);
    let rhs_grad_term = weight * (params.p - params.p_n()) / (2.0 * f) * v2;
    Ok(ZFieldSample {
        z,
        div_z,
        rhs_t_term,
        rhs_grad_term,
        lhs: n2 * div_z,
        f,
        f_coeff: fc,
        lhs_term_scale: n2 * div_size,
        ricci_norm: stack.ricci_norm2().sqrt(),
    })
}

/// [`ZFieldSample::residual`] at one point.
pub fn robinson_identity_residual(
    stack: &CurvatureStack,
    f_value: f64,
    params: &RobinsonParams,
    vacuum_tol: f64,
) -> Result<f64> {
    Ok(z_field_sample(stack, f_value, params, vacuum_tol)?.residual())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NozawaTensors {
    pub h: Tensor<2>,
    pub s: Tensor<3>,
    /// `H̄` from the gradient of `|∇f|^{−1}`.
    pub hbar: Vec<f64>,
    /// `H̄ = −H(∇f,·)^♯/|∇f|²`.
    pub hbar_from_h: Vec<f64>,
    /// `H̄` from `∇|∇f|²` and `∇f`.
    pub hbar_from_norm: Vec<f64>,
    /// Max-abs gap among the three `H̄` evaluations.
    pub hbar_gap: f64,
}

impl NozawaTensors {
    /// Max-abs of `S + ((n−2)f/((n−1)|∇f|²))·T`.
    pub fn s_t_residual(&self, stack: &CurvatureStack, f_value: f64) -> f64 {
        let nf = stack.n as f64;
        let k = (nf - 2.0) * f_value / ((nf - 1.0) * stack.norm2_grad_f);
        let t = t_tensor(stack).components;
        self.s
            .indices()
            .map(|idx| (self.s[idx] + k * t[idx]).abs())
            .fold(0.0, f64::max)
    }

    pub fn hbar_norm(&self, g: &Tensor<2>) -> f64 {
        dot(&lower(g, &self.hbar), &self.hbar).max(0.0).sqrt()
    }
}

pub fn h_tensor(stack: &CurvatureStack, f_value: f64) -> Tensor<2> {
    let nf = stack.n as f64;
    let f = f_value;
    let q = 1.0 - f * f;
    let a = 2.0 / (nf - 2.0) * f * stack.norm2_grad_f / q;
    let b = 2.0 * nf / (nf - 2.0) * f / q;
    Tensor::from_fn(stack.n, |[i, j]| {
        stack.hess_f[[i, j]] - a * stack.g[[i, j]] + b * stack.df[i] * stack.df[j]
    })
}

pub fn nozawa_tensors(stack: &CurvatureStack, f_value: f64) -> Result<NozawaTensors> {
    guard_lapse(stack, f_value)?;
    let n = stack.n;
    let nf = n as f64;
    let f = f_value;
    let n2 = stack.norm2_grad_f;
    let q = 1.0 - f * f;
    let h = h_tensor(stack, f);
    let hdf = raise(
        &stack.g_inv,
        &(0..n)
            .map(|i| (0..n).map(|j| h[[i, j]] * stack.grad_f[j]).sum())
            .collect::<Vec<f64>>(),
    );
    let hbar_from_h: Vec<f64> = hdf.iter().map(|v| -v / n2).collect();
    // ∇(|∇f|^{−1})/|∇f|^{−1} = −∇|∇f|²/(2|∇f|²), from the jet of |∇f|^{−1}
    let inv_norm = stack.jets.norm2_grad_f.powf(-0.5)?;
    let d_inv: Vec<f64> = (0..n).map(|i| inv_norm.grad(i)).collect();
    let d_inv_up = raise(&stack.g_inv, &d_inv);
    let k = 2.0 * (nf - 1.0) / (nf - 2.0) * f / q;
    let hbar: Vec<f64> = (0..n)
        .map(|i| d_inv_up[i] / inv_norm.value() - k * stack.grad_f[i])
        .collect();
    let k2 = 4.0 * (nf - 1.0) / (nf - 2.0) * f * n2 / q;
    let hbar_from_norm: Vec<f64> = (0..n)
        .map(|i| -(stack.grad_norm2_grad_f[i] + k2 * stack.grad_f[i]) / (2.0 * n2))
        .collect();
    let hbar_gap = (0..n)
        .map(|i| {
            (hbar[i] - hbar_from_h[i])
                .abs()
                .max((hbar[i] - hbar_from_norm[i]).abs())
        })
        .fold(0.0, f64::max);
    let hb_low = lower(&stack.g, &hbar);
    let s = Tensor::from_fn(n, |[x, y, z]| {
        (stack.df[x] * h[[y, z]] - stack.df[y] * h[[x, z]]) / n2
            - (hb_low[x] * stack.g[[y, z]] - hb_low[y] * stack.g[[x, z]]) / (nf - 1.0)
    });
    Ok(NozawaTensors {
        h,
        s,
        hbar,
        hbar_from_h,
        hbar_from_norm,
        hbar_gap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConformalKilling {
    /// max-abs of `L_ζ g − (2/n)(div ζ) g`
    pub traceless_lie: f64,
    /// max-abs of `L_ζ g − (2/n)(div ζ) g − (2/(1−f²)^{n/(n−2)}) H`
    pub residual: f64,
    pub h_max: f64,
}

/// Signed power `sign(x)|x|^k`.
fn signed_pow(x: &Jet3, k: f64) -> std::result::Result<Jet3, JetError> {
    if x.value() >= 0.0 {
        x.powf(k)
    } else {
        Ok(-(-*x).powf(k)?)
    }
}

/// The Lie derivative of `g` along `ζ = ∇f/(1−f²)^{n/(n−2)}` in partial form.
pub fn conformal_killing(stack: &CurvatureStack, f_value: f64) -> Result<ConformalKilling> {
    guard_lapse(stack, f_value)?;
    let n = stack.n;
    let nf = n as f64;
    let j = &stack.jets;
    let f = j.f;
    let scale = signed_pow(&(1.0 - f * f), nf / (nf - 2.0))?;
    let inv_scale = scale.recip()?;
    let df: Vec<Jet3> = (0..n).map(|i| f.partial(i)).collect();
    let zeta: Vec<Jet3> = (0..n)
        .map(|a| {
            let mut s = Jet3::constant(n, 0.0).truncate(2);
            for b in 0..n {
                s += j.g_inv[a * n + b] * df[b];
            }
            s * inv_scale
        })
        .collect();
    let div = divergence(stack, &zeta);
    let lie = Tensor::from_fn(n, |[a, b]| {
        let mut s = 0.0;
        for k in 0..n {
            s += zeta[k].value() * j.g[a * n + b].grad(k)
                + j.g[k * n + b].value() * zeta[k].grad(a)
                + j.g[a * n + k].value() * zeta[k].grad(b);
        }
        s
    });
    let h = h_tensor(stack, f_value);
    let c = 2.0 / scale.value();
    let mut traceless: f64 = 0.0;
    let mut residual: f64 = 0.0;
    for [a, b] in lie.indices() {
        let tl = lie[[a, b]] - 2.0 / nf * div * stack.g[[a, b]];
        traceless = traceless.max(tl.abs());
        residual = residual.max((tl - c * h[[a, b]]).abs());
    }
    Ok(ConformalKilling {
        traceless_lie: traceless,
        residual,
        h_max: h.max_abs(),
    })
}

pub fn conformal_killing_residual(stack: &CurvatureStack, f_value: f64) -> Result<f64> {
    Ok(conformal_killing(stack, f_value)?.residual)
}

/// `div Z` against the S/H̄ form `|∇f|^{p−1}(F/f)(|S|² + k|H̄|²)` with
/// `k = 2((n−1)(p−1)−(n−2))/(n−1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NozawaDivergence {
    pub div_z: f64,
    pub rhs: f64,
    pub s_norm2: f64,
    pub hbar_norm2: f64,
    /// `|div Z − rhs| / max(|div Z|, |rhs|, floor)`; the floor is that of
    /// [`ZFieldSample::floor`] divided by `|∇f|²`.
    pub residual: f64,
}

pub fn nozawa_divergence(
    stack: &CurvatureStack,
    f_value: f64,
    params: &RobinsonParams,
    vacuum_tol: f64,
) -> Result<NozawaDivergence> {
    let z = z_field_sample(stack, f_value, params, vacuum_tol)?;
    let nt = nozawa_tensors(stack, f_value)?;
    let nf = stack.n as f64;
    let s_norm2 = norm2_t3(&stack.g_inv, &nt.s);
    let hbar_norm2 = nt.hbar_norm(&stack.g).powi(2);
    let k = 2.0 * ((nf - 1.0) * (params.p - 1.0) - (nf - 2.0)) / (nf - 1.0);
    let n2 = stack.norm2_grad_f;
    let rhs = n2.powf((params.p - 1.0) / 2.0) * z.f_coeff / f_value * (s_norm2 + k * hbar_norm2);
    let floor = z.floor() / n2;
    let residual = (z.div_z - rhs).abs() / z.div_z.abs().max(rhs.abs()).max(floor);
    Ok(NozawaDivergence {
        div_z: z.div_z,
        rhs,
        s_norm2,
        hbar_norm2,
        residual,
    })
}
