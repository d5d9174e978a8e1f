//! Charted metrics and the pointwise curvature stack.
//!
//! Conventions: `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z`, lowered as
//! `R_{abcd} = g(R(∂_c,∂_d)∂_b, ∂_a)`, so the round sphere has
//! `R_{abab} > 0` and `Ric_{bd} = R^a_{bad}`. Christoffel symbols are stored
//! with the upper index first, `Γ^a_{bc}`.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::jets::{Jet3, JetError, MAX_DIM};

/// Dense rank-`R` array over an `n`-dimensional index range.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tensor<const R: usize> {
    n: usize,
    data: Vec<f64>,
}

impl<const R: usize> Tensor<R> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n.pow(R as u32)],
        }
    }

    pub fn from_fn(n: usize, f: impl Fn([usize; R]) -> f64) -> Self {
        let mut t = Self::zeros(n);
        for flat in 0..t.data.len() {
            t.data[flat] = f(t.unflatten(flat));
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    fn offset(&self, idx: [usize; R]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    fn unflatten(&self, mut flat: usize) -> [usize; R] {
        let mut idx = [0; R];
        for slot in (0..R).rev() {
            idx[slot] = flat % self.n;
            flat /= self.n;
        }
        idx
    }

    pub fn indices(&self) -> impl Iterator<Item = [usize; R]> + '_ {
        (0..self.data.len()).map(|f| self.unflatten(f))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }
}

impl<const R: usize> Index<[usize; R]> for Tensor<R> {
    type Output = f64;
    fn index(&self, idx: [usize; R]) -> &f64 {
        &self.data[self.offset(idx)]
    }
}

impl<const R: usize> IndexMut<[usize; R]> for Tensor<R> {
    fn index_mut(&mut self, idx: [usize; R]) -> &mut f64 {
        let o = self.offset(idx);
        &mut self.data[o]
    }
}

/// Position of `(i, j)` in row-major upper-triangular packing.
pub fn packed_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * i.saturating_sub(1) / 2 + j - i
}

pub type PointPredicate = dyn Fn(&[f64]) -> bool + Send + Sync;
pub type MetricFn = dyn Fn(&[Jet3]) -> std::result::Result<Vec<Jet3>, JetError> + Send + Sync;
pub type LapseFn = dyn Fn(&[Jet3]) -> std::result::Result<Jet3, JetError> + Send + Sync;

/// Open coordinate box, optionally cut down by a predicate.
#[derive(Clone)]
pub struct Domain {
    lo: Vec<f64>,
    hi: Vec<f64>,
    predicate: Option<Arc<PointPredicate>>,
}

impl fmt::Debug for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Domain")
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("predicate", &self.predicate.is_some())
            .finish()
    }
}

impl Domain {
    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        Self {
            lo,
            hi,
            predicate: None,
        }
    }

    pub fn with_predicate(mut self, p: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        self.predicate = Some(Arc::new(p));
        self
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.lo.len()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (lo, hi))| v > lo && v < hi)
            && self.predicate.as_ref().map_or(true, |p| p(x))
    }

    /// `count` uniform points from a seeded stream (rejection against the
    /// predicate).
    pub fn sample(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        let mut attempts = 0usize;
        while out.len() < count {
            attempts += 1;
            assert!(attempts < 1000 * (count + 1), "domain predicate rejects almost every point");
            let x: Vec<f64> = self
                .lo
                .iter()
                .zip(&self.hi)
                .map(|(lo, hi)| lo + (hi - lo) * rng.gen_range(0.02..0.98))
                .collect();
            if self.contains(&x) {
                out.push(x);
            }
        }
        out
    }
}

/// A coordinate chart carrying metric components and a lapse.
#[derive(Clone)]
pub struct ChartedMetric {
    n: usize,
    label: String,
    components: Arc<MetricFn>,
    lapse: Arc<LapseFn>,
    domain: Domain,
}

impl fmt::Debug for ChartedMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChartedMetric")
            .field("n", &self.n)
            .field("label", &self.label)
            .field("domain", &self.domain)
            .finish()
    }
}

impl ChartedMetric {
    /// `components` returns the packed upper triangle (see [`packed_index`]).
    pub fn new(
        label: impl Into<String>,
        n: usize,
        domain: Domain,
        components: impl Fn(&[Jet3]) -> std::result::Result<Vec<Jet3>, JetError> + Send + Sync + 'static,
        lapse: impl Fn(&[Jet3]) -> std::result::Result<Jet3, JetError> + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&n) {
            return Err(Error::Unsupported(format!("chart dimension {n}")));
        }
        if domain.lo.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: domain.lo.len(),
            });
        }
        Ok(Self {
            n,
            label: label.into(),
            components: Arc::new(components),
            lapse: Arc::new(lapse),
            domain,
        })
    }

    /// Metric with only diagonal entries.
    pub fn diagonal(
        label: impl Into<String>,
        n: usize,
        domain: Domain,
        diag: impl Fn(&[Jet3]) -> std::result::Result<Vec<Jet3>, JetError> + Send + Sync + 'static,
        lapse: impl Fn(&[Jet3]) -> std::result::Result<Jet3, JetError> + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::new(
            label,
            n,
            domain,
            move |x| {
                let d = diag(x)?;
                let n = x.len();
                let mut out = vec![Jet3::constant(n, 0.0); n * (n + 1) / 2];
                for (i, v) in d.into_iter().enumerate() {
                    out[packed_index(n, i, i)] = v;
                }
                Ok(out)
            },
            lapse,
        )
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn with_lapse(
        mut self,
        lapse: impl Fn(&[Jet3]) -> std::result::Result<Jet3, JetError> + Send + Sync + 'static,
    ) -> Self {
        self.lapse = Arc::new(lapse);
        self
    }

    /// Replace the components by `h(x, g(x))`.
    pub fn map_components(
        mut self,
        h: impl Fn(&[Jet3], Vec<Jet3>) -> std::result::Result<Vec<Jet3>, JetError> + Send + Sync + 'static,
    ) -> Self {
        let base = self.components.clone();
        self.components = Arc::new(move |x| h(x, base(x)?));
        self
    }

    pub fn components_at(&self, x: &[Jet3]) -> Result<Vec<Jet3>> {
        let c = (self.components)(x)?;
        if c.len() != self.n * (self.n + 1) / 2 {
            return Err(Error::DimensionMismatch {
                expected: self.n * (self.n + 1) / 2,
                got: c.len(),
            });
        }
        Ok(c)
    }

    pub fn lapse_at(&self, x: &[Jet3]) -> Result<Jet3> {
        Ok((self.lapse)(x)?)
    }

    pub fn lapse_value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.lapse_at(&Jet3::coordinates(x)?)?.value())
    }

    /// Metric matrix at `x` (values only).
    pub fn metric_value(&self, x: &[f64]) -> Result<Tensor<2>> {
        let c = self.components_at(&Jet3::coordinates(x)?)?;
        Ok(Tensor::from_fn(self.n, |[i, j]| c[packed_index(self.n, i, j)].value()))
    }

    /// Cholesky test of positive definiteness at `x`.
    pub fn is_positive_definite_at(&self, x: &[f64]) -> Result<bool> {
        let g = self.metric_value(x)?;
        Ok(is_positive_definite(&g))
    }
}

fn is_positive_definite(g: &Tensor<2>) -> bool {
    let n = g.dim();
    if g.as_slice().iter().any(|v| !v.is_finite()) {
        return false;
    }
    DMatrix::from_fn(n, n, |i, j| g[[i, j]]).cholesky().is_some()
}

/// Jets kept on the stack for quantities that need more than values:
/// divergences in the `√det g` form and Lie derivatives.
#[derive(Clone, Debug)]
pub struct ChartJets {
    pub g: Vec<Jet3>,
    pub g_inv: Vec<Jet3>,
    pub sqrt_det: Jet3,
    pub f: Jet3,
    pub norm2_grad_f: Jet3,
}

/// Curvature and lapse data at one chart point.
#[derive(Clone, Debug)]
pub struct CurvatureStack {
    pub n: usize,
    pub point: Vec<f64>,
    pub g: Tensor<2>,
    pub g_inv: Tensor<2>,
    /// `Γ^a_{bc}` at `[a, b, c]`.
    pub gamma: Tensor<3>,
    pub riemann: Tensor<4>,
    pub ricci: Tensor<2>,
    pub r_scalar: f64,
    pub weyl: Tensor<4>,
    pub cotton: Tensor<3>,
    /// `∇_i Ric_{jk}`.
    pub nabla_ricci: Tensor<3>,
    /// `g^{il} ∇_i W_{abcl}`.
    pub weyl_div4: Tensor<3>,
    /// `g^{ij} ∇_i Ric_{jk}`.
    pub div_ricci: Vec<f64>,
    pub grad_r_scalar: Vec<f64>,
    pub f: f64,
    pub df: Vec<f64>,
    pub grad_f: Vec<f64>,
    pub hess_f: Tensor<2>,
    pub lap_f: f64,
    pub grad_lap_f: Vec<f64>,
    pub norm2_grad_f: f64,
    pub grad_norm2_grad_f: Vec<f64>,
    pub hess_norm2_grad_f: Tensor<2>,
    pub lap_norm2_grad_f: f64,
    pub lap_norm2_grad_f_bochner: f64,
    pub norm2_hess_f: f64,
    pub jets: ChartJets,
}

fn invert_jets(n: usize, g: &[Jet3]) -> std::result::Result<(Vec<Jet3>, Jet3), JetError> {
    let mut a = g.to_vec();
    let mut inv: Vec<Jet3> = (0..n * n)
        .map(|k| Jet3::constant(n, if k / n == k % n { 1.0 } else { 0.0 }))
        .collect();
    let mut det = Jet3::constant(n, 1.0);
    for k in 0..n {
        let pivot = a[k * n + k];
        det = det * pivot;
        let rp = pivot.recip()?;
        for j in 0..n {
            a[k * n + j] = a[k * n + j] * rp;
            inv[k * n + j] = inv[k * n + j] * rp;
        }
        for i in 0..n {
            if i == k {
                continue;
            }
            let factor = a[i * n + k];
            if factor.is_zero() {
                continue;
            }
            for j in 0..n {
                let (akj, ikj) = (a[k * n + j], inv[k * n + j]);
                a[i * n + j] -= factor * akj;
                inv[i * n + j] -= factor * ikj;
            }
        }
    }
    Ok((inv, det))
}

/// Evaluate every curvature tensor and lapse derivative at `x`.
pub fn evaluate_stack(metric: &ChartedMetric, x: &[f64]) -> Result<CurvatureStack> {
    let n = metric.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    if !metric.domain.contains(x) {
        return Err(Error::OutsideDomain {
            label: metric.label.clone(),
            point: x.to_vec(),
        });
    }
    let xj = Jet3::coordinates(x)?;
    let packed = metric.components_at(&xj)?;
    let mut gj = vec![Jet3::constant(n, 0.0); n * n];
    for i in 0..n {
        for j in i..n {
            let v = packed[packed_index(n, i, j)];
            gj[i * n + j] = v;
            gj[j * n + i] = v;
        }
    }
    let g = Tensor::from_fn(n, |[i, j]| gj[i * n + j].value());
    if !is_positive_definite(&g) {
        return Err(Error::NotPositiveDefinite {
            label: metric.label.clone(),
            point: x.to_vec(),
        });
    }
    let (ginv_j, det) = invert_jets(n, &gj)?;
    let sqrt_det = det.sqrt()?;
    let g_inv = Tensor::from_fn(n, |[i, j]| ginv_j[i * n + j].value());
    let n2 = n * n;

    // ∂_c g_ab at [c][a][b]
    let mut dg = vec![Jet3::constant(n, 0.0); n2 * n];
    for c in 0..n {
        for a in 0..n {
            for b in a..n {
                let v = gj[a * n + b].partial(c);
                dg[c * n2 + a * n + b] = v;
                dg[c * n2 + b * n + a] = v;
            }
        }
    }
    let d = |c: usize, a: usize, b: usize| dg[c * n2 + a * n + b];

    // Γ^a_{bc} as order-2 jets
    let ginv2: Vec<Jet3> = ginv_j.iter().map(|j| j.truncate(2)).collect();
    let mut gam = vec![Jet3::constant(n, 0.0).truncate(2); n2 * n];
    for b in 0..n {
        for c in b..n {
            let first: Vec<Jet3> = (0..n)
                .map(|e| (d(b, e, c) + d(c, e, b) - d(e, b, c)) * 0.5)
                .collect();
            for a in 0..n {
                let mut s = Jet3::constant(n, 0.0).truncate(2);
                for (e, fe) in first.iter().enumerate() {
                    s += ginv2[a * n + e] * *fe;
                }
                gam[a * n2 + b * n + c] = s;
                gam[a * n2 + c * n + b] = s;
            }
        }
    }
    let gamma = Tensor::from_fn(n, |[a, b, c]| gam[a * n2 + b * n + c].value());
    let gam1: Vec<Jet3> = gam.iter().map(|j| j.truncate(1)).collect();
    let dgam = |e: usize, a: usize, b: usize, c: usize| gam[a * n2 + b * n + c].partial(e);

    // R^a_{bcd} as order-1 jets
    let n3 = n2 * n;
    let zero1 = Jet3::constant(n, 0.0).truncate(1);
    let mut rup = vec![zero1; n3 * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for dd in (c + 1)..n {
                    let mut s = dgam(c, a, dd, b) - dgam(dd, a, c, b);
                    for e in 0..n {
                        s += gam1[a * n2 + c * n + e] * gam1[e * n2 + dd * n + b]
                            - gam1[a * n2 + dd * n + e] * gam1[e * n2 + c * n + b];
                    }
                    rup[a * n3 + b * n2 + c * n + dd] = s;
                    rup[a * n3 + b * n2 + dd * n + c] = -s;
                }
            }
        }
    }
    let g1: Vec<Jet3> = gj.iter().map(|j| j.truncate(1)).collect();
    let ginv1: Vec<Jet3> = ginv_j.iter().map(|j| j.truncate(1)).collect();
    let mut rlow = vec![zero1; n3 * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for dd in (c + 1)..n {
                    let mut s = zero1;
                    for e in 0..n {
                        s += g1[a * n + e] * rup[e * n3 + b * n2 + c * n + dd];
                    }
                    rlow[a * n3 + b * n2 + c * n + dd] = s;
                    rlow[a * n3 + b * n2 + dd * n + c] = -s;
                }
            }
        }
    }
    let mut ric = vec![zero1; n2];
    for b in 0..n {
        for dd in b..n {
            let mut s = zero1;
            for a in 0..n {
                s += rup[a * n3 + b * n2 + a * n + dd];
            }
            ric[b * n + dd] = s;
            ric[dd * n + b] = s;
        }
    }
    let mut rs = zero1;
    for b in 0..n {
        for dd in 0..n {
            rs += ginv1[b * n + dd] * ric[b * n + dd];
        }
    }
    let riemann = Tensor::from_fn(n, |[a, b, c, dd]| rlow[a * n3 + b * n2 + c * n + dd].value());
    let ricci = Tensor::from_fn(n, |[a, b]| ric[a * n + b].value());
    let r_scalar = rs.value();

    // Weyl as order-1 jets: W = Rm − (1/(n−2)) P∧g, P = Ric − R/(2(n−1)) g
    let (weyl, weyl_div4) = if n >= 3 {
        let nf = n as f64;
        let p: Vec<Jet3> = (0..n2)
            .map(|k| ric[k] - rs * g1[k] * (1.0 / (2.0 * (nf - 1.0))))
            .collect();
        let mut w = vec![zero1; n3 * n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for l in 0..n {
                        let kn = p[a * n + c] * g1[b * n + l] + p[b * n + l] * g1[a * n + c]
                            - p[a * n + l] * g1[b * n + c]
                            - p[b * n + c] * g1[a * n + l];
                        w[a * n3 + b * n2 + c * n + l] =
                            rlow[a * n3 + b * n2 + c * n + l] - kn * (1.0 / (nf - 2.0));
                    }
                }
            }
        }
        let weyl = Tensor::from_fn(n, |[a, b, c, l]| w[a * n3 + b * n2 + c * n + l].value());
        let wv = |a: usize, b: usize, c: usize, l: usize| weyl[[a, b, c, l]];
        let div = Tensor::from_fn(n, |[a, b, c]| {
            let mut s = 0.0;
            for i in 0..n {
                for l in 0..n {
                    let gil = g_inv[[i, l]];
                    if gil == 0.0 {
                        continue;
                    }
                    let mut cov = w[a * n3 + b * n2 + c * n + l].grad(i);
                    for e in 0..n {
                        cov -= gamma[[e, i, a]] * wv(e, b, c, l)
                            + gamma[[e, i, b]] * wv(a, e, c, l)
                            + gamma[[e, i, c]] * wv(a, b, e, l)
                            + gamma[[e, i, l]] * wv(a, b, c, e);
                    }
                    s += gil * cov;
                }
            }
            s
        });
        (weyl, div)
    } else {
        (Tensor::zeros(n), Tensor::zeros(n))
    };

    // ∇_i Ric_jk
    let nabla_ric = Tensor::<3>::from_fn(n, |[i, j, k]| {
        let mut s = ric[j * n + k].grad(i);
        for l in 0..n {
            s -= gamma[[l, i, j]] * ricci[[l, k]] + gamma[[l, i, k]] * ricci[[j, l]];
        }
        s
    });
    let grad_r_scalar: Vec<f64> = (0..n).map(|i| rs.grad(i)).collect();
    let cotton = if n >= 3 {
        let c0 = 1.0 / (2.0 * (n as f64 - 1.0));
        Tensor::from_fn(n, |[i, j, k]| {
            nabla_ric[[i, j, k]] - nabla_ric[[j, i, k]]
                - c0 * (grad_r_scalar[i] * g[[j, k]] - grad_r_scalar[j] * g[[i, k]])
        })
    } else {
        Tensor::zeros(n)
    };
    let div_ricci: Vec<f64> = (0..n)
        .map(|k| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += g_inv[[i, j]] * nabla_ric[[i, j, k]];
                }
            }
            s
        })
        .collect();

    // Lapse
    let fj = metric.lapse_at(&xj)?;
    let dfj: Vec<Jet3> = (0..n).map(|i| fj.partial(i)).collect();
    let df: Vec<f64> = dfj.iter().map(|j| j.value()).collect();
    let grad_f = raise(&g_inv, &df);
    let mut hess_j = vec![zero1; n2];
    for i in 0..n {
        for j in i..n {
            let mut s = dfj[i].partial(j);
            for k in 0..n {
                s -= gam[k * n2 + i * n + j] * dfj[k];
            }
            hess_j[i * n + j] = s;
            hess_j[j * n + i] = s;
        }
    }
    let hess_f = Tensor::from_fn(n, |[i, j]| hess_j[i * n + j].value());
    let mut lap_j = zero1;
    for k in 0..n2 {
        lap_j += ginv1[k] * hess_j[k];
    }
    let lap_f = lap_j.value();
    let grad_lap_f: Vec<f64> = (0..n).map(|i| lap_j.grad(i)).collect();

    let mut nj = Jet3::constant(n, 0.0).truncate(2);
    for i in 0..n {
        for j in 0..n {
            nj += ginv2[i * n + j] * dfj[i] * dfj[j];
        }
    }
    let dn: Vec<Jet3> = (0..n).map(|i| nj.partial(i)).collect();
    let dn_v: Vec<f64> = dn.iter().map(|j| j.value()).collect();
    let grad_norm2_grad_f = raise(&g_inv, &dn_v);
    let hess_norm2_grad_f = Tensor::from_fn(n, |[i, j]| {
        let mut s = dn[i].grad(j);
        for k in 0..n {
            s -= gamma[[k, i, j]] * dn_v[k];
        }
        s
    });
    let lap_norm2_grad_f = trace(&g_inv, &hess_norm2_grad_f);
    let norm2_hess_f = norm2_sym2(&g_inv, &hess_f);
    let ric_ff = quad(&ricci, &grad_f, &grad_f);
    let lap_norm2_grad_f_bochner =
        2.0 * norm2_hess_f + 2.0 * dot(&grad_f, &grad_lap_f) + 2.0 * ric_ff;

    Ok(CurvatureStack {
        n,
        point: x.to_vec(),
        g,
        g_inv,
        gamma,
        riemann,
        ricci,
        r_scalar,
        weyl,
        cotton,
        nabla_ricci: nabla_ric,
        weyl_div4,
        div_ricci,
        grad_r_scalar,
        f: fj.value(),
        df,
        grad_f,
        hess_f,
        lap_f,
        grad_lap_f,
        norm2_grad_f: nj.value(),
        grad_norm2_grad_f,
        hess_norm2_grad_f,
        lap_norm2_grad_f,
        lap_norm2_grad_f_bochner,
        norm2_hess_f,
        jets: ChartJets {
            g: gj,
            g_inv: ginv_j,
            sqrt_det,
            f: fj,
            norm2_grad_f: nj,
        },
    })
}

/// Stacks for a batch of points, in input order.
pub fn evaluate_batch(
    metric: &ChartedMetric,
    points: &[Vec<f64>],
    mode: Execution,
) -> Vec<Result<CurvatureStack>> {
    exec::map(mode, points, |x| evaluate_stack(metric, x))
}

pub fn raise(g_inv: &Tensor<2>, v: &[f64]) -> Vec<f64> {
    let n = g_inv.dim();
    (0..n)
        .map(|i| (0..n).map(|j| g_inv[[i, j]] * v[j]).sum())
        .collect()
}

pub fn lower(g: &Tensor<2>, v: &[f64]) -> Vec<f64> {
    raise(g, v)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `A(u, v)` for a lowered 2-tensor and raised vectors.
pub fn quad(a: &Tensor<2>, u: &[f64], v: &[f64]) -> f64 {
    let n = a.dim();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += a[[i, j]] * u[i] * v[j];
        }
    }
    s
}

pub fn trace(g_inv: &Tensor<2>, a: &Tensor<2>) -> f64 {
    let n = a.dim();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += g_inv[[i, j]] * a[[i, j]];
        }
    }
    s
}

/// `|A|²` of a lowered 2-tensor.
pub fn norm2_sym2(g_inv: &Tensor<2>, a: &Tensor<2>) -> f64 {
    let n = a.dim();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    s += g_inv[[i, k]] * g_inv[[j, l]] * a[[i, j]] * a[[k, l]];
                }
            }
        }
    }
    s
}

/// `|T|²` of a lowered 3-tensor.
pub fn norm2_t3(g_inv: &Tensor<2>, t: &Tensor<3>) -> f64 {
    let n = t.dim();
    // raise all three slots, then contract
    let mut up = Tensor::<3>::zeros(n);
    for [a, b, c] in t.indices().collect::<Vec<_>>() {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    s += g_inv[[a, i]] * g_inv[[b, j]] * g_inv[[c, k]] * t[[i, j, k]];
                }
            }
        }
        up[[a, b, c]] = s;
    }
    dot(up.as_slice(), t.as_slice())
}

/// `(A ∧ B)_{ijkl} = A_ik B_jl + A_jl B_ik − A_il B_jk − A_jk B_il`.
pub fn kulkarni_nomizu(a: &Tensor<2>, b: &Tensor<2>) -> Result<Tensor<4>> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(Tensor::from_fn(a.dim(), |[i, j, k, l]| {
        a[[i, k]] * b[[j, l]] + a[[j, l]] * b[[i, k]] - a[[i, l]] * b[[j, k]] - a[[j, k]] * b[[i, l]]
    }))
}

/// Max-abs of `C + ((n−2)/(n−3)) div₄ W`.
pub fn weyl_cotton_relation_residual(stack: &CurvatureStack) -> Result<f64> {
    let n = stack.n;
    if n < 4 {
        return Err(Error::Unsupported(format!(
            "Weyl/Cotton divergence relation needs n >= 4 (got n = {n}, where W vanishes)"
        )));
    }
    let k = (n as f64 - 2.0) / (n as f64 - 3.0);
    Ok(stack
        .cotton
        .zip_with(&stack.weyl_div4, |c, w| c + k * w)
        .max_abs())
}

impl CurvatureStack {
    pub fn ricci_norm2(&self) -> f64 {
        norm2_sym2(&self.g_inv, &self.ricci)
    }

    /// `Ric(∇f, ·)` lowered.
    pub fn ric_grad_f(&self) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| (0..n).map(|j| self.ricci[[i, j]] * self.grad_f[j]).sum())
            .collect()
    }

    pub fn ric_ff(&self) -> f64 {
        quad(&self.ricci, &self.grad_f, &self.grad_f)
    }

    /// `|∇|∇f|²|²`.
    pub fn norm2_grad_norm2(&self) -> f64 {
        let low = lower(&self.g, &self.grad_norm2_grad_f);
        dot(&low, &self.grad_norm2_grad_f)
    }

    /// Max-abs deviation from the pair, antisymmetry and first Bianchi
    /// symmetries of Riemann.
    pub fn riemann_symmetry_residual(&self) -> f64 {
        let r = &self.riemann;
        let mut m: f64 = 0.0;
        for [i, j, k, l] in r.indices() {
            m = m
                .max((r[[i, j, k, l]] + r[[j, i, k, l]]).abs())
                .max((r[[i, j, k, l]] + r[[i, j, l, k]]).abs())
                .max((r[[i, j, k, l]] - r[[k, l, i, j]]).abs())
                .max((r[[i, j, k, l]] + r[[i, k, l, j]] + r[[i, l, j, k]]).abs());
        }
        m
    }

    /// Max-abs of every single-pair contraction of Weyl.
    pub fn weyl_trace_residual(&self) -> f64 {
        let n = self.n;
        let w = &self.weyl;
        let mut m: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                let (mut t13, mut t14, mut t24, mut t12, mut t34) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        let gij = self.g_inv[[i, j]];
                        t13 += gij * w[[i, a, j, b]];
                        t14 += gij * w[[i, a, b, j]];
                        t24 += gij * w[[a, i, b, j]];
                        t12 += gij * w[[i, j, a, b]];
                        t34 += gij * w[[a, b, i, j]];
                    }
                }
                for t in [t13, t14, t24, t12, t34] {
                    m = m.max(t.abs());
                }
            }
        }
        m
    }

    /// Max-abs of Cotton antisymmetry and its traces.
    pub fn cotton_structure_residual(&self) -> f64 {
        let n = self.n;
        let c = &self.cotton;
        let mut m: f64 = 0.0;
        for [i, j, k] in c.indices() {
            m = m.max((c[[i, j, k]] + c[[j, i, k]]).abs());
            m = m.max((c[[i, j, k]] + c[[j, k, i]] + c[[k, i, j]]).abs());
        }
        for k in 0..n {
            let (mut t1, mut t2) = (0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    t1 += self.g_inv[[i, j]] * c[[i, k, j]];
                    t2 += self.g_inv[[i, j]] * c[[k, i, j]];
                }
            }
            m = m.max(t1.abs()).max(t2.abs());
        }
        m
    }

    /// Max-abs of `div Ric − ∇R/2`.
    pub fn contracted_bianchi_residual(&self) -> f64 {
        self.div_ricci
            .iter()
            .zip(&self.grad_r_scalar)
            .fold(0.0, |m, (a, b)| m.max((a - 0.5 * b).abs()))
    }

    /// Relative gap between the direct and Bochner values of `Δ|∇f|²`.
    pub fn bochner_discrepancy(&self) -> f64 {
        let a = self.lap_norm2_grad_f;
        let b = self.lap_norm2_grad_f_bochner;
        (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }
}
