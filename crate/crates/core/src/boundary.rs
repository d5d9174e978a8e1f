//! Geometric inequalities evaluated on boundary data, with slack and
//! equality detection.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levelsets::asymptotic_constant;
use crate::robinson::{RobinsonParams, F_of, G_of};
use crate::solutions::sphere_area;

/// Relative tolerance for equality flags on catalog-generated data.
pub const EQUALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryData {
    pub n: usize,
    pub f0: f64,
    /// `ν(f)` on the boundary, `ν` toward the asymptotic end.
    pub kappa: f64,
    pub area: f64,
    /// `∫ R_{∂M} dS`
    pub total_scalar: f64,
    #[serde(default)]
    pub mean_curv: Option<f64>,
    /// `∫ |h̊|² dS`
    #[serde(default)]
    pub tracefree_norm2_integral: f64,
    #[serde(default)]
    pub mass: Option<f64>,
}

impl BoundaryData {
    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::InvalidParameter(format!("n = {} must be at least 3", self.n)));
        }
        if (self.f0 - 1.0).abs() < 1e-14 {
            return Err(Error::ZeroMass);
        }
        if !(self.f0 >= 0.0) {
            return Err(Error::InvalidParameter(format!("f0 = {} must be nonnegative", self.f0)));
        }
        if !(self.area > 0.0) {
            return Err(Error::InvalidParameter(format!("area = {} must be positive", self.area)));
        }
        if self.tracefree_norm2_integral < 0.0 {
            return Err(Error::InvalidParameter("tracefree_norm2_integral must be nonnegative".into()));
        }
        Ok(())
    }

    /// `(|∂M|/|S^{n−1}|)^{1/(n−1)}`
    pub fn area_radius(&self) -> f64 {
        (self.area / sphere_area(self.n - 1)).powf(1.0 / (self.n as f64 - 1.0))
    }

    /// Supplied mass, or the Smarr value `κ|∂M|/((n−2)|S^{n−1}|)`.
    pub fn mass(&self) -> f64 {
        self.mass.unwrap_or_else(|| self.smarr_mass())
    }

    pub fn smarr_mass(&self) -> f64 {
        self.kappa * self.area / ((self.n as f64 - 2.0) * sphere_area(self.n - 1))
    }

    pub fn mean_scalar(&self) -> f64 {
        self.total_scalar / self.area
    }

    fn require_mean_curv(&self) -> Result<f64> {
        self.mean_curv.ok_or_else(|| {
            Error::InvalidParameter("mean_curv is required for this evaluation".into())
        })
    }

    /// Horizons are totally geodesic, so a missing `H` is read as 0 there.
    fn mean_curv_or_horizon(&self) -> Result<f64> {
        match (self.mean_curv, self.f0 == 0.0) {
            (Some(h), _) => Ok(h),
            (None, true) => Ok(0.0),
            (None, false) => self.require_mean_curv(),
        }
    }

    /// Non-fatal inconsistencies in the data.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.f0 == 0.0 {
            if let Some(h) = self.mean_curv.filter(|h| *h != 0.0) {
                w.push(format!("horizon data with nonzero mean curvature H = {h}; horizons are totally geodesic"));
            }
            if self.tracefree_norm2_integral != 0.0 {
                w.push("horizon data with nonzero trace-free second fundamental form".into());
            }
        }
        if let Some(m) = self.mass {
            let smarr = self.smarr_mass();
            if (m - smarr).abs() > 1e-6 * m.abs().max(smarr.abs()) {
                w.push(format!("supplied mass {m} differs from the Smarr value {smarr}"));
            }
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    /// Signed margin, positive when the inequality holds strictly.
    pub slack: f64,
    pub equality_within: bool,
    /// Equality detected in a case whose equality characterizes
    /// Schwarzschild.
    pub rigidity: bool,
    /// A rigidity hypothesis rather than a claimed inequality; failing it
    /// is not a violation.
    pub hypothesis: bool,
}

impl InequalityReport {
    /// Report for `lhs ≥ rhs` (`geq = true`) or `lhs ≤ rhs`.
    pub fn compare(name: &str, lhs: f64, rhs: f64, geq: bool, tol: f64) -> Self {
        Self::compare_scaled(name, lhs, rhs, geq, tol, 0.0)
    }

    /// As [`InequalityReport::compare`], with tolerances relative to at
    /// least `scale` (the size of the terms that cancel in `lhs`).
    pub fn compare_scaled(name: &str, lhs: f64, rhs: f64, geq: bool, tol: f64, scale: f64) -> Self {
        let slack = if geq { lhs - rhs } else { rhs - lhs };
        let scale = lhs.abs().max(rhs.abs()).max(scale).max(f64::MIN_POSITIVE);
        let equality_within = slack.abs() <= tol * scale;
        Self {
            name: name.to_string(),
            lhs,
            rhs,
            satisfied: slack >= -tol * scale,
            slack,
            equality_within,
            rigidity: false,
            hypothesis: false,
        }
    }

    fn rigid(mut self) -> Self {
        self.rigidity = self.equality_within;
        self
    }

    fn as_hypothesis(mut self) -> Self {
        self.hypothesis = true;
        self
    }

    /// False only for a claimed inequality that fails.
    pub fn holds(&self) -> bool {
        self.satisfied || self.hypothesis
    }
}

/// Bounds for a connected horizon (`f0 = 0`).
pub fn black_hole_bounds(data: &BoundaryData, tol: f64) -> Result<Vec<InequalityReport>> {
    data.validate()?;
    if data.f0 != 0.0 {
        return Err(Error::InvalidParameter(format!(
            "horizon bounds need f0 = 0 (got {})",
            data.f0
        )));
    }
    let nf = data.n as f64;
    let s = data.area_radius();
    let m = data.mass();
    let omega = sphere_area(data.n - 1);
    let reference = (nf - 1.0) * (nf - 2.0) * omega * s.powf(nf - 3.0);
    let upper = s.powf(nf - 2.0) / 2.0 * (data.total_scalar / reference).max(0.0).sqrt();
    let lower = s.powf(nf - 2.0) / 2.0;
    Ok(vec![
        InequalityReport::compare("mass_upper", upper, m, true, tol).rigid(),
        InequalityReport::compare("mass_lower", m, lower, true, tol).rigid(),
        InequalityReport::compare("total_scalar_lower", data.total_scalar, reference, true, tol).rigid(),
        // hypothesis: when it holds together with the line above, equality
        // forces Schwarzschild
        InequalityReport::compare("scalar_bound_condition", data.total_scalar, reference, false, tol)
            .rigid()
            .as_hypothesis(),
        InequalityReport::compare("positive_mass", m, 0.0, true, 0.0),
    ])
}

/// Bounds for the time slice of an equipotential photon surface.
pub fn photon_surface_bounds(data: &BoundaryData, tol: f64) -> Result<Vec<InequalityReport>> {
    data.validate()?;
    if data.f0 == 0.0 {
        return Err(Error::InvalidParameter(
            "f0 = 0 is a horizon; use the horizon bounds".into(),
        ));
    }
    let h = data.require_mean_curv()?;
    let nf = data.n as f64;
    let f0 = data.f0;
    let s = data.area_radius();
    let m = data.mass();
    let rbar = data.mean_scalar();
    let q = 1.0 - f0 * f0;
    let reduced = rbar - (nf - 2.0) / (nf - 1.0) * h * h;
    let x = s * s * reduced / ((nf - 1.0) * (nf - 2.0) * q);
    let upper = q * s.powf(nf - 2.0) / 2.0 * x.max(0.0).sqrt();
    let lower = q * s.powf(nf - 2.0) / 2.0;
    let below = f0 < 1.0;
    let implied = (nf - 1.0) * (nf - 2.0) * q / (s * s);
    let constraint = rbar - 2.0 * data.kappa * h / f0 - (nf - 2.0) / (nf - 1.0) * h * h;
    let scale = rbar.abs().max((2.0 * data.kappa * h / f0).abs()).max(h * h).max(f64::MIN_POSITIVE);
    let constraint_report = InequalityReport {
        name: "photon_constraint".into(),
        lhs: rbar,
        rhs: rbar - constraint,
        satisfied: constraint.abs() <= tol * scale,
        slack: -constraint.abs(),
        equality_within: constraint.abs() <= tol * scale,
        rigidity: false,
        hypothesis: false,
    };
    Ok(vec![
        InequalityReport::compare("mass_upper", upper, m, below, tol).rigid(),
        InequalityReport::compare("mass_lower", m, lower, below, tol).rigid(),
        InequalityReport::compare("reduced_scalar_bound", reduced, implied, below, tol).rigid(),
        InequalityReport::compare("scalar_bound_condition", rbar, (nf - 1.0) * (nf - 2.0) / (s * s), false, tol)
            .rigid()
            .as_hypothesis(),
        constraint_report,
        InequalityReport::compare("umbilic", data.tracefree_norm2_integral, 0.0, false, tol).as_hypothesis(),
        InequalityReport::compare("mass_sign", if below { m } else { -m }, 0.0, true, 0.0),
    ])
}

/// The parametric inequality with `F_p^{c,d}(m)` on the right.
pub fn parametric_bound(data: &BoundaryData, params: &RobinsonParams, tol: f64) -> Result<InequalityReport> {
    data.validate()?;
    if params.n != data.n {
        return Err(Error::DimensionMismatch {
            expected: data.n,
            got: params.n,
        });
    }
    let region = admissibility_region(data.f0, params.c, params.d)?;
    if region == Region::Outside {
        return Err(Error::InvalidParameter(format!(
            "(c, d) = ({}, {}) is outside the admissible region for f0 = {}",
            params.c, params.d, data.f0
        )));
    }
    let h = data.mean_curv_or_horizon()?;
    let nf = data.n as f64;
    let p = params.p;
    let k = data.kappa.abs();
    let integral = data.total_scalar - (nf - 2.0) / (nf - 1.0) * h * h * data.area + data.tracefree_norm2_integral;
    let f0c = F_of(data.f0, params)?;
    let g0c = G_of(data.f0, params)?;
    // F₀ = 0 on the green edge; avoid 0·κ^{p−2} turning into NaN
    let first = if f0c == 0.0 { 0.0 } else { f0c * k.powf(p - 2.0) * integral };
    let second = g0c * k.powf(p) * data.area;
    let lhs = first - second;
    let constant = asymptotic_constant(data.n, p, params.c, params.d, data.mass());
    let scale = first.abs().max(second.abs());
    let mut r = if data.f0 < 1.0 {
        InequalityReport::compare_scaled("parametric", lhs, constant, true, tol, scale)
    } else {
        InequalityReport::compare_scaled("parametric", lhs, -constant, false, tol, scale)
    };
    let degenerate = region == Region::Origin;
    if degenerate {
        r.equality_within = lhs.abs() <= tol && constant.abs() <= tol;
    }
    r.rigidity = r.equality_within && !degenerate;
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Interior,
    /// `cf₀² + d = 0 < c + d`: `F(f₀) = 0` with `F > 0` beyond.
    GreenEdge,
    /// `c + d = 0 < cf₀² + d`.
    RedEdge,
    /// `c = d = 0`.
    Origin,
    Outside,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Region::Interior => "interior",
            Region::GreenEdge => "green_edge",
            Region::RedEdge => "red_edge",
            Region::Origin => "origin",
            Region::Outside => "outside",
        })
    }
}

/// Classify `(c, d)` by the signs of `c + d` and `cf₀² + d`.
pub fn admissibility_region(f0: f64, c: f64, d: f64) -> Result<Region> {
    if (f0 - 1.0).abs() < 1e-14 {
        return Err(Error::ZeroMass);
    }
    if !(f0 >= 0.0) {
        return Err(Error::InvalidParameter(format!("f0 = {f0} must be nonnegative")));
    }
    let zero = 1e-14 * (c.abs() + d.abs());
    let a = c + d;
    let b = c * f0 * f0 + d;
    let a0 = a.abs() <= zero;
    let b0 = b.abs() <= zero;
    Ok(if (a < 0.0 && !a0) || (b < 0.0 && !b0) {
        Region::Outside
    } else if a0 && b0 {
        Region::Origin
    } else if b0 {
        Region::GreenEdge
    } else if a0 {
        Region::RedEdge
    } else {
        Region::Interior
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn horizon() -> BoundaryData {
        BoundaryData {
            n: 3,
            f0: 0.0,
            kappa: 0.25,
            area: 16.0 * PI,
            total_scalar: 8.0 * PI,
            mean_curv: Some(0.0),
            tracefree_norm2_integral: 0.0,
            mass: None,
        }
    }

    #[test]
    fn horizon_equality() {
        let r = black_hole_bounds(&horizon(), EQUALITY_TOL).unwrap();
        assert!(r.iter().all(|x| x.satisfied));
        assert!((r[0].lhs - 1.0).abs() <= 1e-12 && (r[1].rhs - 1.0).abs() <= 1e-12);
        assert!(r[0].rigidity && r[1].rigidity);
    }

    #[test]
    fn inflated_area_violates_lower() {
        let mut d = horizon();
        d.area *= 1.1;
        d.mass = Some(1.0);
        let r = black_hole_bounds(&d, EQUALITY_TOL).unwrap();
        assert!(!r[1].satisfied);
    }

    #[test]
    fn photon_sphere_equality() {
        let f0 = (1.0f64 / 3.0).sqrt();
        let d = BoundaryData {
            n: 3,
            f0,
            kappa: 1.0 / 9.0,
            area: 36.0 * PI,
            total_scalar: 2.0 / 9.0 * 36.0 * PI,
            mean_curv: Some(2.0 / (3.0 * 3f64.sqrt())),
            tracefree_norm2_integral: 0.0,
            mass: None,
        };
        let r = photon_surface_bounds(&d, EQUALITY_TOL).unwrap();
        assert!(r.iter().all(|x| x.satisfied), "{r:?}");
        assert!(r[0].equality_within && r[1].equality_within);
        assert!(r[4].slack.abs() <= 1e-12);
    }

    #[test]
    fn regions() {
        assert_eq!(admissibility_region(0.5, 1.0, -0.25).unwrap(), Region::GreenEdge);
        assert_eq!(admissibility_region(0.9, -2.0, 1.0).unwrap(), Region::Outside);
        assert_eq!(admissibility_region(0.0, -1.0, 1.0).unwrap(), Region::RedEdge);
        assert_eq!(admissibility_region(0.0, 0.0, 0.0).unwrap(), Region::Origin);
        assert_eq!(admissibility_region(0.3, 0.0, 1.0).unwrap(), Region::Interior);
        assert_eq!(admissibility_region(1.0, 0.0, 1.0).unwrap_err(), Error::ZeroMass);
    }

    #[test]
    fn json_field_names() {
        let d: BoundaryData = serde_json::from_str(
            r#"{"n":3,"f0":0.0,"kappa":0.25,"area":50.26548245743669,"total_scalar":25.132741228718345}"#,
        )
        .unwrap();
        assert!((d.mass() - 1.0).abs() < 1e-12);
    }
}
