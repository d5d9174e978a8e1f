//! Exact-solution catalog.
//!
//! Warped entries use coordinates `(r, y_1, …, y_{n−1})` with the radial
//! coordinate first. Schwarzschild in its polar chart uses hyperspherical
//! angles; the Type families use stereographic or ball charts for the cross
//! section, so comparing the two is a genuine change of chart.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{evaluate_stack, ChartedMetric, Domain};
use crate::jets::{Jet3, JetError};

/// `|S^k|` for the unit k-sphere.
pub fn sphere_area(k: usize) -> f64 {
    let h = (k as f64 + 1.0) / 2.0;
    2.0 * PI.powf(h) / statrs::function::gamma::gamma(h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EinsteinKind {
    RoundSphere { radius: f64 },
    FlatTorus { side: f64 },
    /// Poincaré ball of constant curvature `curvature < 0`.
    Hyperbolic { curvature: f64 },
    /// Product of round spheres given as `(dimension, radius)`.
    ProductOfSpheres { factors: Vec<(usize, f64)> },
}

/// Einstein cross-section with an explicit conformally flat chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EinsteinFactor {
    pub kind: EinsteinKind,
    pub n_sigma: usize,
    pub r_sigma: f64,
}

impl EinsteinFactor {
    pub fn round_sphere(n_sigma: usize, radius: f64) -> Self {
        let k = n_sigma as f64;
        Self {
            kind: EinsteinKind::RoundSphere { radius },
            n_sigma,
            r_sigma: k * (k - 1.0) / (radius * radius),
        }
    }

    pub fn flat_torus(n_sigma: usize, side: f64) -> Self {
        Self {
            kind: EinsteinKind::FlatTorus { side },
            n_sigma,
            r_sigma: 0.0,
        }
    }

    pub fn hyperbolic(n_sigma: usize, curvature: f64) -> Result<Self> {
        if curvature >= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "hyperbolic factor needs negative curvature, got {curvature}"
            )));
        }
        let k = n_sigma as f64;
        Ok(Self {
            kind: EinsteinKind::Hyperbolic { curvature },
            n_sigma,
            r_sigma: k * (k - 1.0) * curvature,
        })
    }

    /// Product of spheres; Einstein only when every factor has the same
    /// `(d_i − 1)/ρ_i²`.
    pub fn product_of_spheres(factors: Vec<(usize, f64)>) -> Result<Self> {
        let ratios: Vec<f64> = factors
            .iter()
            .map(|(d, rho)| (*d as f64 - 1.0) / (rho * rho))
            .collect();
        if factors.iter().any(|(d, _)| *d < 2)
            || ratios.iter().any(|r| (r - ratios[0]).abs() > 1e-12 * ratios[0].abs())
        {
            return Err(Error::InvalidParameter(
                "product of spheres is not Einstein for these radii".into(),
            ));
        }
        let n_sigma: usize = factors.iter().map(|(d, _)| d).sum();
        Ok(Self {
            kind: EinsteinKind::ProductOfSpheres { factors },
            n_sigma,
            r_sigma: n_sigma as f64 * ratios[0],
        })
    }

    /// Diagonal of σ in its chart.
    pub fn diag(&self, y: &[Jet3]) -> std::result::Result<Vec<Jet3>, JetError> {
        let n = y[0].dim();
        let conformal = |ys: &[Jet3], scale: f64, sign: f64| -> std::result::Result<Jet3, JetError> {
            let mut q = Jet3::constant(n, 1.0);
            for v in ys {
                q += *v * *v * sign;
            }
            Ok(q.powi(-2)? * (4.0 * scale))
        };
        match &self.kind {
            EinsteinKind::RoundSphere { radius } => {
                let w = conformal(y, radius * radius, 1.0)?;
                Ok(vec![w; y.len()])
            }
            EinsteinKind::FlatTorus { .. } => Ok(vec![Jet3::constant(n, 1.0); y.len()]),
            EinsteinKind::Hyperbolic { curvature } => {
                let w = conformal(y, -1.0 / curvature, -1.0)?;
                Ok(vec![w; y.len()])
            }
            EinsteinKind::ProductOfSpheres { factors } => {
                let mut out = Vec::with_capacity(y.len());
                let mut off = 0;
                for (d, rho) in factors {
                    let w = conformal(&y[off..off + d], rho * rho, 1.0)?;
                    out.extend(std::iter::repeat(w).take(*d));
                    off += d;
                }
                Ok(out)
            }
        }
    }

    /// Chart box for σ and an extra predicate (ball charts).
    pub fn chart_box(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.kind {
            EinsteinKind::FlatTorus { side } => (vec![0.0; self.n_sigma], vec![*side; self.n_sigma]),
            EinsteinKind::Hyperbolic { .. } => (vec![-0.55; self.n_sigma], vec![0.55; self.n_sigma]),
            _ => (vec![-1.5; self.n_sigma], vec![1.5; self.n_sigma]),
        }
    }

    /// Total area of σ; `None` for the non-compact hyperbolic chart.
    pub fn reference_area(&self) -> Option<f64> {
        match &self.kind {
            EinsteinKind::RoundSphere { radius } => {
                Some(sphere_area(self.n_sigma) * radius.powi(self.n_sigma as i32))
            }
            EinsteinKind::FlatTorus { side } => Some(side.powi(self.n_sigma as i32)),
            EinsteinKind::Hyperbolic { .. } => None,
            EinsteinKind::ProductOfSpheres { factors } => Some(
                factors
                    .iter()
                    .map(|(d, rho)| sphere_area(*d) * rho.powi(*d as i32))
                    .product(),
            ),
        }
    }

    /// σ alone as a chart (unit lapse), for curvature checks of the factor.
    pub fn chart(&self) -> Result<ChartedMetric> {
        let (lo, hi) = self.chart_box();
        let me = self.clone();
        ChartedMetric::diagonal(
            format!("sigma:{}", self.tag()),
            self.n_sigma,
            Domain::boxed(lo, hi),
            move |y| me.diag(y),
            |y| Ok(Jet3::constant(y.len(), 1.0)),
        )
    }

    /// Max-abs of `Ric_σ − (R_σ/n_σ)σ` at the given chart points.
    pub fn einstein_residual(&self, points: &[Vec<f64>]) -> Result<f64> {
        let chart = self.chart()?;
        let k = self.n_sigma as f64;
        let mut worst: f64 = 0.0;
        for y in points {
            let s = evaluate_stack(&chart, y)?;
            let dev = s.ricci.zip_with(&s.g, |r, g| r - self.r_sigma / k * g).max_abs();
            worst = worst.max(dev).max((s.r_scalar - self.r_sigma).abs());
        }
        Ok(worst)
    }

    fn tag(&self) -> &'static str {
        match self.kind {
            EinsteinKind::RoundSphere { .. } => "sphere",
            EinsteinKind::FlatTorus { .. } => "torus",
            EinsteinKind::Hyperbolic { .. } => "hyperbolic",
            EinsteinKind::ProductOfSpheres { .. } => "s2xs2",
        }
    }
}

/// Gaussian bump in the first coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: f64,
    pub width: f64,
}

impl Bump {
    pub fn eval(&self, x0: &Jet3) -> Jet3 {
        let z = (*x0 - self.center) * (1.0 / self.width);
        (-(z * z)).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Schwarzschild { n: usize, m: f64 },
    SchwarzschildIsotropic { n: usize, m: f64 },
    Type1 { n: usize, a: f64, sigma: EinsteinFactor },
    Type2 { n: usize, a: f64, sigma: EinsteinFactor },
    Type3 { n: usize, a: f64, b: f64, sigma: EinsteinFactor },
    Type4 { n: usize, a: f64, b: f64, sigma: EinsteinFactor },
    Kasner { exponents: Vec<f64> },
    TamperedLapse { n: usize, m: f64 },
    Perturbed { base: Box<Family>, epsilon: f64, bump: Bump },
}

/// Classification data of a T-flat family: type, lapse scale `a` and `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Classification {
    pub kind: u8,
    pub n: usize,
    pub a: f64,
    pub b: f64,
}

impl Classification {
    /// Radial closed form of the Ricci eigenvalue on ∇f.
    pub fn lambda_radial(&self, r: f64) -> f64 {
        let nf = self.n as f64;
        match self.kind {
            1 => 0.0,
            2 => (nf - 1.0) * (nf - 2.0) / (2.0 * r.powf(nf)),
            _ => (nf - 1.0) * (nf - 2.0) * self.b / (2.0 * r.powf(nf)),
        }
    }

    /// Ricci eigenvalue expressed through `f` and `|∇f|²`.
    pub fn lambda_from_gradient(&self, f: f64, norm2: f64) -> f64 {
        let nf = self.n as f64;
        let c = 2.0 * (nf - 1.0) * norm2 / (nf - 2.0);
        let a2 = self.a * self.a;
        match self.kind {
            1 => 0.0,
            2 => c / (f * f),
            3 => c / (f * f + a2),
            _ => c / (f * f - a2),
        }
    }

    /// The quantity conserved along the flow of ∇f.
    pub fn conserved(&self, f: f64, norm2: f64) -> f64 {
        let nf = self.n as f64;
        let e = 2.0 * (nf - 1.0) / (nf - 2.0);
        let a2 = self.a * self.a;
        match self.kind {
            1 => norm2,
            2 => norm2 / f.powf(2.0 * e),
            3 => norm2 / (f * f + a2).powf(e),
            _ => norm2 / (f * f - a2).abs().powf(e),
        }
    }
}

/// Radial profile of a warped entry `g = dr²/u² + r²σ`, `f = a·u`, with
/// `u² = s + b·r^{2−n}` (or `g = dh² + σ`, `f = a·h` for Type 1).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WarpedProfile {
    pub n: usize,
    pub a: f64,
    pub flat: bool,
    pub s: f64,
    pub b: f64,
    pub sigma: EinsteinFactor,
    pub r_lo: f64,
    pub r_hi: f64,
}

impl WarpedProfile {
    fn e(&self) -> i32 {
        2 - self.n as i32
    }

    pub fn u2(&self, r: f64) -> f64 {
        self.s + self.b * r.powi(self.e())
    }

    pub fn lapse(&self, r: f64) -> f64 {
        if self.flat {
            self.a * r
        } else {
            self.a * self.u2(r).max(0.0).sqrt()
        }
    }

    /// `r` on the level `{f = level}` as a jet in the level value.
    pub fn radius_of_level(&self, level: &Jet3) -> std::result::Result<Jet3, JetError> {
        if self.flat {
            return Ok(*level * (1.0 / self.a));
        }
        let u = *level * (1.0 / self.a);
        let denom = u * u - self.s;
        (denom.recip()? * self.b).powf(1.0 / (self.n as f64 - 2.0))
    }

    pub fn radius_at(&self, level: f64) -> Result<f64> {
        Ok(self.radius_of_level(&Jet3::constant(1, level))?.value())
    }

    /// `ν(f)` with `ν` the unit normal toward increasing `r`.
    pub fn normal_derivative(&self, r: f64) -> f64 {
        if self.flat {
            return self.a;
        }
        let nf = self.n as f64;
        -(nf - 2.0) * self.a * self.b / (2.0 * r.powf(nf - 1.0))
    }

    /// Mean curvature of `{r = const}` with respect to `ν`.
    pub fn mean_curvature(&self, r: f64) -> f64 {
        if self.flat {
            return 0.0;
        }
        (self.n as f64 - 1.0) * self.u2(r).max(0.0).sqrt() / r
    }

    /// Area of `{r = const}`; hyperbolic sections are taken per unit σ-area.
    pub fn area(&self, r: f64) -> f64 {
        let base = self.sigma.reference_area().unwrap_or(1.0);
        if self.flat {
            base
        } else {
            base * r.powi(self.n as i32 - 1)
        }
    }

    /// Scalar curvature of `{r = const}`.
    pub fn section_scalar(&self, r: f64) -> f64 {
        if self.flat {
            self.sigma.r_sigma
        } else {
            self.sigma.r_sigma / (r * r)
        }
    }

    /// Mass read off from the Smarr constant.
    pub fn smarr_mass(&self) -> f64 {
        let nf = self.n as f64;
        let r = 0.5 * (self.r_lo + self.r_hi);
        self.normal_derivative(r) * self.area(r) / ((nf - 2.0) * sphere_area(self.n - 1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Expected {
    pub t_zero: bool,
    pub vacuum: bool,
    pub lambda: Option<Classification>,
}

/// A catalog metric with its family data and expected properties.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub key: String,
    pub family: Family,
    pub metric: ChartedMetric,
    pub expected: Expected,
    pub profile: Option<WarpedProfile>,
    /// Box used for random sampling (narrower than the chart domain).
    pub sampling: Domain,
}

impl fmt::Display for CatalogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key)
    }
}

impl CatalogEntry {
    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        self.sampling.sample(count, seed)
    }

    /// A chart point on the level `{r = const}` (angles at their box centre,
    /// optionally shifted).
    pub fn point_at_radius(&self, r: f64, shift: f64) -> Vec<f64> {
        let (lo, hi) = (self.metric.domain().lo(), self.metric.domain().hi());
        let mut x: Vec<f64> = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| 0.5 * (a + b) + shift * (b - a) * 0.2)
            .collect();
        x[0] = r;
        x
    }

    pub fn classification(&self) -> Option<Classification> {
        self.expected.lambda
    }
}

fn round_sphere_angles(n_sigma: usize, r2: Jet3, theta: &[Jet3]) -> Vec<Jet3> {
    // dθ₁² + sin²θ₁ dθ₂² + sin²θ₁ sin²θ₂ dθ₃² + …
    let mut out = Vec::with_capacity(n_sigma);
    let mut w = r2;
    for i in 0..n_sigma {
        out.push(w);
        if i + 1 < n_sigma {
            let s = theta[i].sin();
            w = w * s * s;
        }
    }
    out
}

fn angle_box(n_sigma: usize) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![0.35; n_sigma];
    let mut hi = vec![PI - 0.35; n_sigma];
    lo[n_sigma - 1] = 0.0;
    hi[n_sigma - 1] = 2.0 * PI;
    (lo, hi)
}

fn check_dim(n: usize) -> Result<()> {
    if !(3..=crate::jets::MAX_DIM).contains(&n) {
        return Err(Error::InvalidParameter(format!("dimension n = {n} must lie in 3..=6")));
    }
    Ok(())
}

fn radial_window(n: usize, m: f64) -> (f64, f64) {
    let scale = (2.0 * m.abs()).powf(1.0 / (n as f64 - 2.0));
    if m > 0.0 {
        (1.1 * scale, 10.0 * scale)
    } else {
        (0.2 * scale, 10.0 * scale)
    }
}

fn schwarzschild_polar(n: usize, m: f64, label: String, tampered: bool) -> Result<ChartedMetric> {
    let e = 2 - n as i32;
    let r_h = if m > 0.0 { (2.0 * m).powf(1.0 / (n as f64 - 2.0)) } else { 0.0 };
    let (mut lo, mut hi) = angle_box(n - 1);
    lo.insert(0, r_h);
    hi.insert(0, 1e9);
    let domain = Domain::boxed(lo, hi);
    ChartedMetric::diagonal(
        label,
        n,
        domain,
        move |x| {
            let h = 1.0 - x[0].powi(e)? * (2.0 * m);
            let mut d = vec![h.recip()?];
            d.extend(round_sphere_angles(n - 1, x[0] * x[0], &x[1..]));
            Ok(d)
        },
        move |x| {
            let h = 1.0 - x[0].powi(e)? * (2.0 * m);
            if tampered {
                Ok(h)
            } else {
                h.sqrt()
            }
        },
    )
}

/// Schwarzschild in polar coordinates with hyperspherical angles.
pub fn schwarzschild(n: usize, m: f64) -> Result<CatalogEntry> {
    check_dim(n)?;
    if m == 0.0 {
        return Err(Error::ZeroMass);
    }
    let key = format!("schwarzschild:n={n}:m={m}");
    let metric = schwarzschild_polar(n, m, key.clone(), false)?;
    let (r_lo, r_hi) = radial_window(n, m);
    let (mut lo, mut hi) = angle_box(n - 1);
    lo.insert(0, r_lo);
    hi.insert(0, r_hi);
    Ok(CatalogEntry {
        key,
        family: Family::Schwarzschild { n, m },
        metric,
        expected: Expected {
            t_zero: true,
            vacuum: true,
            lambda: Some(Classification { kind: 4, n, a: 1.0, b: -2.0 * m }),
        },
        profile: Some(WarpedProfile {
            n,
            a: 1.0,
            flat: false,
            s: 1.0,
            b: -2.0 * m,
            sigma: EinsteinFactor::round_sphere(n - 1, 1.0),
            r_lo,
            r_hi,
        }),
        sampling: Domain::boxed(lo, hi),
    })
}

/// Isotropic radius `ρ` of the areal radius `r` (positive mass).
pub fn isotropic_radius(n: usize, m: f64, r: f64) -> f64 {
    // r = ρ ψ^{2/(n−2)}, ψ = 1 + m/(2ρ^{n−2}); with q = ρ^{(n−2)/2}:
    // r^{(n−2)/2} = q + m/(2q)
    let k = (n as f64 - 2.0) / 2.0;
    let rk = r.powf(k);
    let q = 0.5 * (rk + (rk * rk - 2.0 * m).sqrt());
    q.powf(1.0 / k)
}

/// Schwarzschild in isotropic Cartesian coordinates (positive mass).
pub fn schwarzschild_isotropic(n: usize, m: f64) -> Result<CatalogEntry> {
    check_dim(n)?;
    if m <= 0.0 {
        return Err(Error::InvalidParameter("isotropic chart implemented for m > 0".into()));
    }
    let key = format!("schwarzschild-isotropic:n={n}:m={m}");
    let rho_h = (m / 2.0).powf(1.0 / (n as f64 - 2.0));
    let e = 2 - n as i32;
    let conf = 4.0 / (n as f64 - 2.0);
    let domain = Domain::boxed(vec![-1e6; n], vec![1e6; n])
        .with_predicate(move |x| x.iter().map(|v| v * v).sum::<f64>().sqrt() > rho_h);
    let rho = |x: &[Jet3]| -> std::result::Result<Jet3, JetError> {
        let mut q = Jet3::constant(x[0].dim(), 0.0);
        for v in x {
            q += *v * *v;
        }
        q.sqrt()
    };
    let metric = ChartedMetric::diagonal(
        key.clone(),
        n,
        domain,
        move |x| {
            let psi = 1.0 + rho(x)?.powi(e)? * (m / 2.0);
            Ok(vec![psi.powf(conf)?; x.len()])
        },
        move |x| {
            let t = rho(x)?.powi(e)? * (m / 2.0);
            (1.0 - t).div(&(1.0 + t))
        },
    )?;
    let s = 6.0 * rho_h;
    let sampling = Domain::boxed(vec![-s; n], vec![s; n]).with_predicate(move |x| {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        r > 1.3 * rho_h && r < s
    });
    Ok(CatalogEntry {
        key,
        family: Family::SchwarzschildIsotropic { n, m },
        metric,
        expected: Expected {
            t_zero: true,
            vacuum: true,
            lambda: Some(Classification { kind: 4, n, a: 1.0, b: -2.0 * m }),
        },
        profile: None,
        sampling,
    })
}

/// Schwarzschild metric with the lapse `1 − 2m/r^{n−2}` (square root
/// dropped); a negative control.
pub fn tampered_lapse(n: usize, m: f64) -> Result<CatalogEntry> {
    let mut base = schwarzschild(n, m)?;
    base.key = format!("tampered:n={n}:m={m}");
    base.metric = schwarzschild_polar(n, m, base.key.clone(), true)?;
    base.family = Family::TamperedLapse { n, m };
    base.expected = Expected {
        t_zero: false,
        vacuum: false,
        lambda: None,
    };
    base.profile = None;
    Ok(base)
}

fn table_violation(row: &str, detail: String) -> Error {
    Error::InvalidParameter(format!("{row}: {detail}"))
}

/// Warped families of the T-flat classification (kinds 1–4).
pub fn type_family(
    kind: u8,
    n: usize,
    a: f64,
    b: f64,
    sigma: EinsteinFactor,
    interval: (f64, f64),
) -> Result<CatalogEntry> {
    check_dim(n)?;
    let row = format!("type {kind}");
    if a <= 0.0 {
        return Err(table_violation(&row, format!("a = {a} must be positive")));
    }
    if sigma.n_sigma != n - 1 {
        return Err(table_violation(&row, format!("cross-section dimension {} != n − 1", sigma.n_sigma)));
    }
    let nf = n as f64;
    let (r_lo, r_hi) = interval;
    if !(r_lo < r_hi) {
        return Err(table_violation(&row, format!("empty interval ({r_lo}, {r_hi})")));
    }
    let tol = 1e-10 * (1.0 + sigma.r_sigma.abs());
    let target_rs = match kind {
        1 | 2 => 0.0,
        3 => -(nf - 1.0) * (nf - 2.0),
        4 => (nf - 1.0) * (nf - 2.0),
        _ => return Err(Error::InvalidParameter(format!("unknown type {kind}"))),
    };
    if (sigma.r_sigma - target_rs).abs() > tol {
        return Err(table_violation(
            &row,
            format!("cross-section scalar curvature {} but {} required", sigma.r_sigma, target_rs),
        ));
    }
    let (s, flat) = match kind {
        1 => (0.0, true),
        2 => {
            if b != 0.0 {
                return Err(table_violation(&row, format!("b = {b} must be 0")));
            }
            (0.0, false)
        }
        3 => {
            if b <= 0.0 {
                return Err(table_violation(&row, format!("b = {b} must be positive")));
            }
            let top = b.powf(1.0 / (nf - 2.0));
            if r_lo <= 0.0 || r_hi >= top {
                return Err(table_violation(
                    &row,
                    format!("interval ({r_lo}, {r_hi}) not inside (0, {top})"),
                ));
            }
            (-1.0, false)
        }
        _ => {
            if b == 0.0 {
                return Err(table_violation(&row, "b must be nonzero".into()));
            }
            let bottom = if b < 0.0 { (-b).powf(1.0 / (nf - 2.0)) } else { 0.0 };
            if r_lo <= bottom {
                return Err(table_violation(
                    &row,
                    format!("interval ({r_lo}, {r_hi}) not inside ({bottom}, ∞)"),
                ));
            }
            (1.0, false)
        }
    };
    if kind == 1 && r_lo <= 0.0 {
        return Err(table_violation(&row, "the lapse a·h needs h > 0".into()));
    }
    let b_eff = if kind == 2 { 1.0 } else { b };
    let key = match kind {
        1 | 2 => format!("type{kind}:n={n}:a={a}:sigma={}", sigma.tag()),
        _ => format!("type{kind}:n={n}:a={a}:b={b}:sigma={}", sigma.tag()),
    };
    let (ylo, yhi) = sigma.chart_box();
    let mut lo = vec![r_lo];
    lo.extend(&ylo);
    let mut hi = vec![r_hi];
    hi.extend(&yhi);
    let ball = matches!(sigma.kind, EinsteinKind::Hyperbolic { .. });
    let mut domain = Domain::boxed(lo.clone(), hi.clone());
    let mut sampling = Domain::boxed(lo, hi);
    if ball {
        let pred = |x: &[f64]| x[1..].iter().map(|v| v * v).sum::<f64>() < 0.8;
        domain = domain.with_predicate(pred);
        sampling = sampling.with_predicate(pred);
    }
    let e = 2 - n as i32;
    let sig = sigma.clone();
    let metric = ChartedMetric::diagonal(
        key.clone(),
        n,
        domain,
        move |x| {
            let mut d = Vec::with_capacity(x.len());
            let w = if flat {
                d.push(Jet3::constant(x.len(), 1.0));
                Jet3::constant(x.len(), 1.0)
            } else {
                let u2 = x[0].powi(e)? * b_eff + s;
                d.push(u2.recip()?);
                x[0] * x[0]
            };
            d.extend(sig.diag(&x[1..])?.into_iter().map(|v| v * w));
            Ok(d)
        },
        move |x| {
            if flat {
                Ok(x[0] * a)
            } else if kind == 2 {
                Ok(x[0].powf(-(nf - 2.0) / 2.0)? * a)
            } else {
                Ok((x[0].powi(e)? * b_eff + s).sqrt()? * a)
            }
        },
    )?;
    Ok(CatalogEntry {
        key,
        family: match kind {
            1 => Family::Type1 { n, a, sigma: sigma.clone() },
            2 => Family::Type2 { n, a, sigma: sigma.clone() },
            3 => Family::Type3 { n, a, b, sigma: sigma.clone() },
            _ => Family::Type4 { n, a, b, sigma: sigma.clone() },
        },
        metric,
        expected: Expected {
            t_zero: true,
            vacuum: true,
            lambda: Some(Classification { kind, n, a, b }),
        },
        profile: Some(WarpedProfile {
            n,
            a,
            flat,
            s,
            b: b_eff,
            sigma,
            r_lo,
            r_hi,
        }),
        sampling,
    })
}

fn kasner_chart(exponents: &[f64], key: String) -> Result<ChartedMetric> {
    let n = exponents.len();
    let ex = exponents.to_vec();
    let mut lo = vec![-1.0; n];
    let mut hi = vec![1.0; n];
    lo[0] = 0.0;
    hi[0] = 1.0;
    ChartedMetric::diagonal(
        key,
        n,
        Domain::boxed(lo, hi),
        move |x| {
            let mut d = vec![Jet3::constant(x.len(), 1.0)];
            for e in &ex[1..] {
                d.push(x[0].powf(2.0 * e)?);
            }
            Ok(d)
        },
        {
            let a = exponents[0];
            move |x| x[0].powf(a)
        },
    )
}

fn kasner_sampling(n: usize) -> Domain {
    let mut lo = vec![-1.0; n];
    let mut hi = vec![1.0; n];
    lo[0] = 0.25;
    hi[0] = 0.85;
    Domain::boxed(lo, hi)
}

fn kasner_key(exponents: &[f64]) -> String {
    let names = ["a", "b", "c", "e", "g", "h"];
    let parts: Vec<String> = exponents
        .iter()
        .zip(names)
        .map(|(v, k)| format!("{k}={v}"))
        .collect();
    format!("kasner:{}", parts.join(":"))
}

/// Kasner-type vacuum: `g = dx² + Σ x^{2p_i} dy_i²`, `f = x^a`, with
/// exponents `(a, p_1, …)` summing to 1 with squares summing to 1.
pub fn kasner(exponents: &[f64]) -> Result<CatalogEntry> {
    let n = exponents.len();
    check_dim(n)?;
    let sum: f64 = exponents.iter().sum();
    let sq: f64 = exponents.iter().map(|v| v * v).sum();
    if (sum - 1.0).abs() > 1e-12 || (sq - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "Kasner exponents must satisfy Σ = 1 and Σ² = 1 (got {sum}, {sq})"
        )));
    }
    let a = exponents[0];
    if a.abs() < 1e-12 || (a - 1.0).abs() < 1e-12 {
        return Err(Error::InvalidParameter(format!("Kasner lapse exponent a = {a} excluded")));
    }
    let mut entry = kasner_unchecked(exponents)?;
    entry.expected.vacuum = true;
    Ok(entry)
}

/// Kasner chart without the exponent constraints (negative controls).
pub fn kasner_unchecked(exponents: &[f64]) -> Result<CatalogEntry> {
    let n = exponents.len();
    check_dim(n)?;
    let key = kasner_key(exponents);
    Ok(CatalogEntry {
        metric: kasner_chart(exponents, key.clone())?,
        key,
        family: Family::Kasner {
            exponents: exponents.to_vec(),
        },
        expected: Expected {
            t_zero: false,
            vacuum: false,
            lambda: None,
        },
        profile: None,
        sampling: kasner_sampling(n),
    })
}

/// Add `ε·bump(x₀)` to `g₀₀`.
pub fn perturb(base: &CatalogEntry, epsilon: f64, bump: Bump) -> Result<CatalogEntry> {
    let key = format!("perturbed:eps={epsilon}:{}", base.key);
    let metric = base
        .metric
        .clone()
        .map_components(move |x, mut c| {
            c[0] += bump.eval(&x[0]) * epsilon;
            Ok(c)
        })
        .with_label(key.clone());
    for p in base.sample_points(16, 0x5eed) {
        if !metric.is_positive_definite_at(&p)? {
            return Err(Error::NotPositiveDefinite { label: key, point: p });
        }
    }
    let unchanged = epsilon == 0.0;
    Ok(CatalogEntry {
        key,
        family: Family::Perturbed {
            base: Box::new(base.family.clone()),
            epsilon,
            bump,
        },
        metric,
        expected: Expected {
            t_zero: unchanged && base.expected.t_zero,
            vacuum: unchanged && base.expected.vacuum,
            lambda: None,
        },
        profile: None,
        sampling: base.sampling.clone(),
    })
}

/// Default Gaussian bump centred in the sampling window of `base`.
pub fn default_bump(base: &CatalogEntry) -> Bump {
    let (lo, hi) = (base.sampling.lo()[0], base.sampling.hi()[0]);
    Bump {
        center: 0.5 * (lo + hi),
        width: 0.25 * (hi - lo),
    }
}

fn parse_number(s: &str) -> Result<f64> {
    let bad = || Error::InvalidParameter(format!("cannot parse number `{s}`"));
    if let Some((p, q)) = s.split_once('/') {
        let p: f64 = p.trim().parse().map_err(|_| bad())?;
        let q: f64 = q.trim().parse().map_err(|_| bad())?;
        return Ok(p / q);
    }
    s.trim().parse().map_err(|_| bad())
}

fn sigma_for(tag: &str, n_sigma: usize) -> Result<EinsteinFactor> {
    match tag {
        "sphere" => Ok(EinsteinFactor::round_sphere(n_sigma, 1.0)),
        "torus" | "flat" => Ok(EinsteinFactor::flat_torus(n_sigma, 1.0)),
        "hyperbolic" => EinsteinFactor::hyperbolic(n_sigma, -1.0),
        "s2xs2" if n_sigma == 4 => {
            let rho = 1.0 / 3f64.sqrt();
            EinsteinFactor::product_of_spheres(vec![(2, rho), (2, rho)])
        }
        _ => Err(Error::InvalidParameter(format!(
            "unknown cross-section `{tag}` for dimension {n_sigma}"
        ))),
    }
}

/// Default radial window for a Type family.
pub fn default_interval(kind: u8, n: usize, b: f64) -> (f64, f64) {
    let top = |b: f64| b.abs().powf(1.0 / (n as f64 - 2.0));
    match kind {
        1 => (0.2, 1.5),
        2 => (1.0, 4.0),
        3 => (0.25 * top(b), 0.9 * top(b)),
        _ if b < 0.0 => (1.2 * top(b), 6.0 * top(b)),
        _ => (0.5 * top(b), 4.0 * top(b)),
    }
}

/// Resolve an entry key such as `schwarzschild:n=3:m=1`,
/// `type4:n=5:a=0.5:b=-4:sigma=s2xs2`, `kasner:a=2/3:b=2/3:c=-1/3` or
/// `perturbed:eps=0.001:schwarzschild:n=3:m=1`.
pub fn from_key(key: &str) -> Result<CatalogEntry> {
    let key = key.trim();
    let (family, rest) = key.split_once(':').unwrap_or((key, ""));
    if family == "perturbed" {
        let (eps_part, base_key) = rest
            .split_once(':')
            .ok_or_else(|| Error::InvalidParameter(format!("malformed key `{key}`")))?;
        let eps = eps_part
            .strip_prefix("eps=")
            .ok_or_else(|| Error::InvalidParameter(format!("malformed key `{key}`")))?;
        let base = from_key(base_key)?;
        let bump = default_bump(&base);
        return perturb(&base, parse_number(eps)?, bump);
    }
    let mut params: Vec<(String, String)> = Vec::new();
    for part in rest.split(':').filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::InvalidParameter(format!("malformed key segment `{part}`")))?;
        params.push((k.to_string(), v.to_string()));
    }
    let allowed: &[&str] = match family {
        "schwarzschild" | "schwarzschild-isotropic" | "tampered" => &["n", "m"],
        "kasner" => &["a", "b", "c", "e", "g", "h", "unchecked"],
        "type1" | "type2" | "type3" | "type4" => &["n", "a", "b", "sigma", "rlo", "rhi"],
        _ => &[],
    };
    for (k, _) in &params {
        if !allowed.is_empty() && !allowed.contains(&k.as_str()) {
            return Err(Error::InvalidParameter(format!("unknown parameter `{k}` in key `{key}`")));
        }
        if params.iter().filter(|(other, _)| other == k).count() > 1 {
            return Err(Error::InvalidParameter(format!("repeated parameter `{k}` in key `{key}`")));
        }
    }
    let get = |name: &str| params.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str());
    let num = |name: &str| -> Result<Option<f64>> { get(name).map(parse_number).transpose() };
    let req = |name: &str| -> Result<f64> {
        num(name)?.ok_or_else(|| Error::InvalidParameter(format!("key `{key}` lacks `{name}`")))
    };
    let dim = || -> Result<usize> {
        let v = req("n")?;
        if v.fract() != 0.0 || v < 0.0 {
            return Err(Error::InvalidParameter(format!("n = {v}")));
        }
        Ok(v as usize)
    };
    match family {
        "schwarzschild" => schwarzschild(dim()?, req("m")?),
        "schwarzschild-isotropic" => schwarzschild_isotropic(dim()?, req("m")?),
        "tampered" => tampered_lapse(dim()?, req("m")?),
        "kasner" => {
            let mut ex = Vec::new();
            for name in ["a", "b", "c", "e", "g", "h"] {
                if let Some(v) = num(name)? {
                    ex.push(v);
                }
            }
            if get("unchecked").is_some() {
                kasner_unchecked(&ex)
            } else {
                kasner(&ex)
            }
        }
        "type1" | "type2" | "type3" | "type4" => {
            let kind = family.as_bytes()[4] - b'0';
            let n = dim()?;
            let b = num("b")?.unwrap_or(0.0);
            let default_sigma = match kind {
                1 | 2 => "torus",
                3 => "hyperbolic",
                _ => "sphere",
            };
            let sigma = sigma_for(get("sigma").unwrap_or(default_sigma), n - 1)?;
            let (dlo, dhi) = default_interval(kind, n, b);
            let interval = (num("rlo")?.unwrap_or(dlo), num("rhi")?.unwrap_or(dhi));
            type_family(kind, n, num("a")?.unwrap_or(1.0), b, sigma, interval)
        }
        _ => Err(Error::InvalidParameter(format!("unknown catalog family in key `{key}`"))),
    }
}

/// Keys of the standard catalog.
pub fn standard_keys() -> Vec<String> {
    let mut keys = Vec::new();
    for n in 3..=5 {
        for m in [1.0, 2.0, -1.0] {
            keys.push(format!("schwarzschild:n={n}:m={m}"));
        }
    }
    keys.extend(
        [
            "type1:n=3:a=0.5",
            "type2:n=3:a=0.5",
            "type3:n=3:a=0.4:b=1",
            "type3:n=4:a=0.25:b=1",
            "type4:n=3:a=1:b=-2",
            "type4:n=4:a=0.5:b=1",
            "type4:n=5:a=0.5:b=-4:sigma=s2xs2",
            "kasner:a=2/3:b=2/3:c=-1/3",
            "kasner:a=1/2:b=1/2:c=1/2:e=-1/2",
        ]
        .map(String::from),
    );
    keys
}

/// Keys of the negative-control entries.
pub fn negative_control_keys() -> Vec<String> {
    [
        "tampered:n=3:m=1",
        "perturbed:eps=0.001:schwarzschild:n=3:m=1",
        "perturbed:eps=0.01:schwarzschild:n=4:m=1",
        "kasner:a=2/3:b=0.667666666666666:c=-1/3:unchecked=1",
    ]
    .map(String::from)
    .to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area(1), 2.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(sphere_area(2), 4.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(sphere_area(3), 2.0 * PI * PI, max_relative = 1e-14);
    }

    #[test]
    fn horizon_and_photon_radii() {
        let s = schwarzschild(3, 1.0).unwrap();
        assert_eq!(s.metric.domain().lo()[0], 2.0);
        let p = s.profile.unwrap();
        assert_relative_eq!(p.lapse(3.0), (1.0f64 / 3.0).sqrt(), max_relative = 1e-15);
        let s5 = schwarzschild(5, 2.0).unwrap();
        assert_relative_eq!(s5.metric.domain().lo()[0], 4f64.powf(1.0 / 3.0), max_relative = 1e-15);
        let neg = schwarzschild(3, -1.0).unwrap();
        let f = neg.metric.lapse_value(&neg.point_at_radius(2.0, 0.0)).unwrap();
        assert_relative_eq!(f, 2f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn zero_mass_rejected() {
        assert_eq!(schwarzschild(3, 0.0).unwrap_err(), Error::ZeroMass);
    }

    #[test]
    fn type3_interval_check() {
        let h = EinsteinFactor::hyperbolic(2, -1.0).unwrap();
        assert!(type_family(3, 3, 1.0, 1.0, h.clone(), (0.2, 0.9)).is_ok());
        assert!(type_family(3, 3, 1.0, 1.0, h, (0.2, 1.5)).is_err());
    }

    #[test]
    fn type_tables_enforced() {
        let sph = EinsteinFactor::round_sphere(2, 1.0);
        assert!(type_family(2, 3, 1.0, 0.5, EinsteinFactor::flat_torus(2, 1.0), (1.0, 2.0)).is_err());
        assert!(type_family(3, 3, 1.0, 1.0, sph.clone(), (0.2, 0.9)).is_err());
        assert!(type_family(4, 3, 1.0, 0.0, sph.clone(), (1.0, 2.0)).is_err());
        assert!(type_family(4, 3, 1.0, -2.0, sph, (1.5, 3.0)).is_err());
    }

    #[test]
    fn kasner_constraints() {
        assert!(kasner(&[2.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0]).is_ok());
        assert!(kasner(&[1.0, 0.0, 0.0]).is_err());
        assert!(kasner(&[0.5, 0.5, 0.1]).is_err());
    }

    #[test]
    fn product_of_spheres_is_einstein() {
        let rho = 1.0 / 3f64.sqrt();
        let s = EinsteinFactor::product_of_spheres(vec![(2, rho), (2, rho)]).unwrap();
        assert_relative_eq!(s.r_sigma, 12.0, max_relative = 1e-14);
        let pts = Domain::boxed(s.chart_box().0, s.chart_box().1).sample(5, 3);
        assert!(s.einstein_residual(&pts).unwrap() < 1e-10);
        assert!(EinsteinFactor::product_of_spheres(vec![(2, 1.0), (2, 0.5)]).is_err());
    }

    #[test]
    fn keys_roundtrip() {
        for key in standard_keys().iter().chain(&negative_control_keys()) {
            let e = from_key(key).unwrap();
            assert!(!e.key.is_empty());
        }
        assert!(from_key("nonsense:n=3").is_err());
        assert!(from_key("schwarzschild:n=3").is_err());
    }

    #[test]
    fn isotropic_radius_inverts() {
        let (n, m) = (4, 1.0);
        let rho = isotropic_radius(n, m, 3.0);
        let psi: f64 = 1.0 + m / (2.0 * rho.powi(n as i32 - 2));
        assert_relative_eq!(rho * psi.powf(2.0 / (n as f64 - 2.0)), 3.0, max_relative = 1e-14);
    }
}
