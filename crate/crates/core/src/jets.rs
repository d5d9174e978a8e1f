//! Order-3 multivariate Taylor jets.
//!
//! A [`Jet3`] carries a value and its partial derivatives up to third order
//! in `n <= MAX_DIM` variables. Symmetric slots are stored once per
//! non-decreasing index tuple. Each jet also records how many derivative
//! levels are trustworthy (`order`); taking a partial derivative drops one
//! level, and binary operations keep the smaller order. This lets curvature
//! code differentiate metric jets repeatedly without pretending to know
//! fourth derivatives.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use thiserror::Error;

pub const MAX_DIM: usize = 6;
const HESS_LEN: usize = MAX_DIM * (MAX_DIM + 1) / 2;
const THIRD_LEN: usize = MAX_DIM * (MAX_DIM + 1) * (MAX_DIM + 2) / 6;

/// Default distance kept from singular arguments of `div`, `ln`, `sqrt`, `pow`.
pub const EPS_DOM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("{op}: argument {value} violates the domain guard {eps}")]
    Domain {
        op: &'static str,
        value: f64,
        eps: f64,
    },
    #[error("coordinate index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("dimension {0} unsupported (must be 1..={MAX_DIM})")]
    Dimension(usize),
    #[error("{op} expects {expected} argument(s), got {got}")]
    Arity {
        op: &'static str,
        expected: usize,
        got: usize,
    },
}

const fn build_idx2() -> [[usize; MAX_DIM]; MAX_DIM] {
    let mut t = [[0usize; MAX_DIM]; MAX_DIM];
    let mut c = 0;
    let mut i = 0;
    while i < MAX_DIM {
        let mut j = i;
        while j < MAX_DIM {
            t[i][j] = c;
            t[j][i] = c;
            c += 1;
            j += 1;
        }
        i += 1;
    }
    t
}

const fn build_idx3() -> [[[usize; MAX_DIM]; MAX_DIM]; MAX_DIM] {
    let mut t = [[[0usize; MAX_DIM]; MAX_DIM]; MAX_DIM];
    let mut c = 0;
    let mut i = 0;
    while i < MAX_DIM {
        let mut j = i;
        while j < MAX_DIM {
            let mut k = j;
            while k < MAX_DIM {
                t[i][j][k] = c;
                t[i][k][j] = c;
                t[j][i][k] = c;
                t[j][k][i] = c;
                t[k][i][j] = c;
                t[k][j][i] = c;
                c += 1;
                k += 1;
            }
            j += 1;
        }
        i += 1;
    }
    t
}

static IDX2: [[usize; MAX_DIM]; MAX_DIM] = build_idx2();
static IDX3: [[[usize; MAX_DIM]; MAX_DIM]; MAX_DIM] = build_idx3();

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet3 {
    n: usize,
    order: u8,
    value: f64,
    grad: [f64; MAX_DIM],
    hess: [f64; HESS_LEN],
    third: [f64; THIRD_LEN],
}

/// Elementary operations accepted by [`elementary`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Elementary {
    Add,
    Mul,
    Div,
    Pow,
    Sqrt,
    Exp,
    Ln,
    Sin,
    Cos,
}

impl Jet3 {
    fn blank(n: usize, order: u8) -> Self {
        Self {
            n,
            order,
            value: 0.0,
            grad: [0.0; MAX_DIM],
            hess: [0.0; HESS_LEN],
            third: [0.0; THIRD_LEN],
        }
    }

    pub fn constant(n: usize, value: f64) -> Self {
        assert!((1..=MAX_DIM).contains(&n), "jet dimension {n} unsupported");
        let mut j = Self::blank(n, 3);
        j.value = value;
        j
    }

    /// The coordinate function `x_i` expanded at `x`.
    pub fn lift_coordinate(i: usize, x: &[f64]) -> Result<Self, JetError> {
        let n = x.len();
        if n == 0 || n > MAX_DIM {
            return Err(JetError::Dimension(n));
        }
        if i >= n {
            return Err(JetError::IndexOutOfRange { index: i, dim: n });
        }
        let mut j = Self::constant(n, x[i]);
        j.grad[i] = 1.0;
        Ok(j)
    }

    /// All coordinate functions at `x`.
    pub fn coordinates(x: &[f64]) -> Result<Vec<Self>, JetError> {
        (0..x.len()).map(|i| Self::lift_coordinate(i, x)).collect()
    }

    /// Assemble a jet from explicit slots; `hess` and `third` are read at
    /// canonical (sorted) index tuples only.
    pub fn from_parts(
        value: f64,
        grad: &[f64],
        hess: impl Fn(usize, usize) -> f64,
        third: impl Fn(usize, usize, usize) -> f64,
    ) -> Self {
        let n = grad.len();
        let mut j = Self::constant(n, value);
        j.grad[..n].copy_from_slice(grad);
        for a in 0..n {
            for b in a..n {
                j.hess[IDX2[a][b]] = hess(a, b);
                for c in b..n {
                    j.third[IDX3[a][b][c]] = third(a, b, c);
                }
            }
        }
        j
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of derivative levels carried exactly (0..=3).
    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn grad(&self, i: usize) -> f64 {
        self.grad[i]
    }

    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.hess[IDX2[i][j]]
    }

    pub fn third(&self, i: usize, j: usize, k: usize) -> f64 {
        self.third[IDX3[i][j][k]]
    }

    pub fn grad_vec(&self) -> Vec<f64> {
        self.grad[..self.n].to_vec()
    }

    /// True when every slot is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.value == 0.0
            && self.grad.iter().all(|v| *v == 0.0)
            && self.hess.iter().all(|v| *v == 0.0)
            && self.third.iter().all(|v| *v == 0.0)
    }

    /// Drop derivative levels above `order`.
    pub fn truncate(mut self, order: u8) -> Self {
        if order < self.order {
            self.order = order;
            if order < 3 {
                self.third = [0.0; THIRD_LEN];
            }
            if order < 2 {
                self.hess = [0.0; HESS_LEN];
            }
            if order < 1 {
                self.grad = [0.0; MAX_DIM];
            }
        }
        self
    }

    /// Partial derivative along coordinate `i`, one order lower.
    pub fn partial(&self, i: usize) -> Self {
        assert!(self.order > 0, "partial derivative of an order-0 jet");
        let n = self.n;
        let mut r = Self::blank(n, self.order - 1);
        r.value = self.grad[i];
        if r.order >= 1 {
            for j in 0..n {
                r.grad[j] = self.hess[IDX2[i][j]];
            }
        }
        if r.order >= 2 {
            for j in 0..n {
                for k in j..n {
                    r.hess[IDX2[j][k]] = self.third[IDX3[i][j][k]];
                }
            }
        }
        r
    }

    /// Univariate chain rule: `d = [φ(u), φ'(u), φ''(u), φ'''(u)]`.
    pub fn chain(&self, d: [f64; 4]) -> Self {
        let n = self.n;
        let u = self;
        let mut r = Self::blank(n, self.order);
        r.value = d[0];
        if r.order >= 1 {
            for i in 0..n {
                r.grad[i] = d[1] * u.grad[i];
            }
        }
        if r.order >= 2 {
            for i in 0..n {
                for j in i..n {
                    let ij = IDX2[i][j];
                    r.hess[ij] = d[2] * u.grad[i] * u.grad[j] + d[1] * u.hess[ij];
                }
            }
        }
        if r.order >= 3 {
            for i in 0..n {
                for j in i..n {
                    for k in j..n {
                        let (ij, ik, jk) = (IDX2[i][j], IDX2[i][k], IDX2[j][k]);
                        r.third[IDX3[i][j][k]] = d[3] * u.grad[i] * u.grad[j] * u.grad[k]
                            + d[2]
                                * (u.hess[ij] * u.grad[k]
                                    + u.hess[ik] * u.grad[j]
                                    + u.hess[jk] * u.grad[i])
                            + d[1] * u.third[IDX3[i][j][k]];
                    }
                }
            }
        }
        r
    }

    fn combine(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.n, other.n, "jet dimension mismatch");
        let mut r = Self::blank(self.n, self.order.min(other.order));
        r.value = f(self.value, other.value);
        for i in 0..MAX_DIM {
            r.grad[i] = f(self.grad[i], other.grad[i]);
        }
        for i in 0..HESS_LEN {
            r.hess[i] = f(self.hess[i], other.hess[i]);
        }
        for i in 0..THIRD_LEN {
            r.third[i] = f(self.third[i], other.third[i]);
        }
        r.truncate(r.order)
    }

    fn map_slots(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut r = *self;
        r.value = f(r.value);
        r.grad.iter_mut().for_each(|v| *v = f(*v));
        r.hess.iter_mut().for_each(|v| *v = f(*v));
        r.third.iter_mut().for_each(|v| *v = f(*v));
        r
    }

    fn guard(&self, op: &'static str, ok: bool) -> Result<(), JetError> {
        if ok {
            Ok(())
        } else {
            Err(JetError::Domain {
                op,
                value: self.value,
                eps: EPS_DOM,
            })
        }
    }

    pub fn recip(&self) -> Result<Self, JetError> {
        let u = self.value;
        self.guard("div", u.abs() > EPS_DOM)?;
        let r = 1.0 / u;
        Ok(self.chain([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r]))
    }

    pub fn div(&self, other: &Self) -> Result<Self, JetError> {
        Ok(*self * other.recip()?)
    }

    pub fn sqrt(&self) -> Result<Self, JetError> {
        let u = self.value;
        self.guard("sqrt", u > EPS_DOM)?;
        let s = u.sqrt();
        Ok(self.chain([s, 0.5 / s, -0.25 / (u * s), 0.375 / (u * u * s)]))
    }

    /// Real power. Integer exponents accept any sign of the base (nonzero
    /// when negative); fractional exponents need a positive base.
    pub fn powf(&self, alpha: f64) -> Result<Self, JetError> {
        if alpha.fract() == 0.0 && alpha.abs() < 1e9 {
            return self.powi(alpha as i32);
        }
        let u = self.value;
        self.guard("pow", u > EPS_DOM)?;
        let p = u.powf(alpha);
        Ok(self.chain([
            p,
            alpha * p / u,
            alpha * (alpha - 1.0) * p / (u * u),
            alpha * (alpha - 1.0) * (alpha - 2.0) * p / (u * u * u),
        ]))
    }

    pub fn powi(&self, k: i32) -> Result<Self, JetError> {
        let u = self.value;
        if k < 0 {
            self.guard("pow", u.abs() > EPS_DOM)?;
        }
        let kf = k as f64;
        let pw = |e: i32| if e == 0 { 1.0 } else { u.powi(e) };
        let d1 = if k == 0 { 0.0 } else { kf * pw(k - 1) };
        let d2 = if k == 0 || k == 1 { 0.0 } else { kf * (kf - 1.0) * pw(k - 2) };
        let d3 = if (0..=2).contains(&k) {
            0.0
        } else {
            kf * (kf - 1.0) * (kf - 2.0) * pw(k - 3)
        };
        Ok(self.chain([pw(k), d1, d2, d3]))
    }

    /// `self^other` for a jet exponent.
    pub fn pow(&self, other: &Self) -> Result<Self, JetError> {
        let exponent_is_constant = (0..self.n).all(|i| other.grad[i] == 0.0)
            && other.hess.iter().all(|v| *v == 0.0)
            && other.third.iter().all(|v| *v == 0.0);
        if exponent_is_constant {
            return Ok(self.powf(other.value)?.truncate(self.order.min(other.order)));
        }
        Ok((*other * self.ln()?).exp())
    }

    pub fn exp(&self) -> Self {
        let e = self.value.exp();
        self.chain([e, e, e, e])
    }

    pub fn ln(&self) -> Result<Self, JetError> {
        let u = self.value;
        self.guard("ln", u > EPS_DOM)?;
        Ok(self.chain([u.ln(), 1.0 / u, -1.0 / (u * u), 2.0 / (u * u * u)]))
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain([s, c, -s, -c])
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain([c, -s, -c, s])
    }

    /// `|u|`, defined away from `u = 0`.
    pub fn abs(&self) -> Result<Self, JetError> {
        self.guard("abs", self.value.abs() > EPS_DOM)?;
        Ok(if self.value < 0.0 { -*self } else { *self })
    }
}

/// Apply an elementary operation to jet arguments.
pub fn elementary(op: Elementary, args: &[Jet3]) -> Result<Jet3, JetError> {
    let arity = match op {
        Elementary::Add | Elementary::Mul | Elementary::Div | Elementary::Pow => 2,
        _ => 1,
    };
    if args.len() != arity {
        return Err(JetError::Arity {
            op: op.name(),
            expected: arity,
            got: args.len(),
        });
    }
    let a = &args[0];
    match op {
        Elementary::Add => Ok(*a + args[1]),
        Elementary::Mul => Ok(*a * args[1]),
        Elementary::Div => a.div(&args[1]),
        Elementary::Pow => a.pow(&args[1]),
        Elementary::Sqrt => a.sqrt(),
        Elementary::Exp => Ok(a.exp()),
        Elementary::Ln => a.ln(),
        Elementary::Sin => Ok(a.sin()),
        Elementary::Cos => Ok(a.cos()),
    }
}

impl Elementary {
    pub fn name(self) -> &'static str {
        match self {
            Elementary::Add => "add",
            Elementary::Mul => "mul",
            Elementary::Div => "div",
            Elementary::Pow => "pow",
            Elementary::Sqrt => "sqrt",
            Elementary::Exp => "exp",
            Elementary::Ln => "ln",
            Elementary::Sin => "sin",
            Elementary::Cos => "cos",
        }
    }
}

impl Add for Jet3 {
    type Output = Jet3;
    fn add(self, rhs: Jet3) -> Jet3 {
        self.combine(&rhs, |a, b| a + b)
    }
}

impl Sub for Jet3 {
    type Output = Jet3;
    fn sub(self, rhs: Jet3) -> Jet3 {
        self.combine(&rhs, |a, b| a - b)
    }
}

impl Mul for Jet3 {
    type Output = Jet3;
    fn mul(self, b: Jet3) -> Jet3 {
        debug_assert_eq!(self.n, b.n, "jet dimension mismatch");
        let a = &self;
        let n = a.n;
        let mut r = Jet3::blank(n, a.order.min(b.order));
        if a.is_zero() || b.is_zero() {
            return r;
        }
        r.value = a.value * b.value;
        if r.order >= 1 {
            for i in 0..n {
                r.grad[i] = a.grad[i] * b.value + a.value * b.grad[i];
            }
        }
        if r.order >= 2 {
            for i in 0..n {
                for j in i..n {
                    let ij = IDX2[i][j];
                    r.hess[ij] = a.hess[ij] * b.value
                        + a.grad[i] * b.grad[j]
                        + a.grad[j] * b.grad[i]
                        + a.value * b.hess[ij];
                }
            }
        }
        if r.order >= 3 {
            for i in 0..n {
                for j in i..n {
                    for k in j..n {
                        let (ij, ik, jk) = (IDX2[i][j], IDX2[i][k], IDX2[j][k]);
                        let ijk = IDX3[i][j][k];
                        r.third[ijk] = a.third[ijk] * b.value
                            + a.hess[ij] * b.grad[k]
                            + a.hess[ik] * b.grad[j]
                            + a.hess[jk] * b.grad[i]
                            + a.grad[i] * b.hess[jk]
                            + a.grad[j] * b.hess[ik]
                            + a.grad[k] * b.hess[ij]
                            + a.value * b.third[ijk];
                    }
                }
            }
        }
        r
    }
}

impl Neg for Jet3 {
    type Output = Jet3;
    fn neg(self) -> Jet3 {
        self.map_slots(|v| -v)
    }
}

impl Add<f64> for Jet3 {
    type Output = Jet3;
    fn add(mut self, rhs: f64) -> Jet3 {
        self.value += rhs;
        self
    }
}

impl Sub<f64> for Jet3 {
    type Output = Jet3;
    fn sub(mut self, rhs: f64) -> Jet3 {
        self.value -= rhs;
        self
    }
}

impl Mul<f64> for Jet3 {
    type Output = Jet3;
    fn mul(self, rhs: f64) -> Jet3 {
        self.map_slots(|v| v * rhs)
    }
}

impl Div<f64> for Jet3 {
    type Output = Jet3;
    fn div(self, rhs: f64) -> Jet3 {
        self.map_slots(|v| v / rhs)
    }
}

impl Add<Jet3> for f64 {
    type Output = Jet3;
    fn add(self, rhs: Jet3) -> Jet3 {
        rhs + self
    }
}

impl Sub<Jet3> for f64 {
    type Output = Jet3;
    fn sub(self, rhs: Jet3) -> Jet3 {
        -rhs + self
    }
}

impl Mul<Jet3> for f64 {
    type Output = Jet3;
    fn mul(self, rhs: Jet3) -> Jet3 {
        rhs * self
    }
}

impl AddAssign for Jet3 {
    fn add_assign(&mut self, rhs: Jet3) {
        *self = *self + rhs;
    }
}

impl SubAssign for Jet3 {
    fn sub_assign(&mut self, rhs: Jet3) {
        *self = *self - rhs;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lift_sets_unit_gradient() {
        let j = Jet3::lift_coordinate(0, &[2.0, 0.0]).unwrap();
        assert_eq!(j.value(), 2.0);
        assert_eq!(j.grad_vec(), vec![1.0, 0.0]);
        assert_eq!(j.hess(0, 0), 0.0);
        let k = Jet3::lift_coordinate(1, &[5.0, 7.0]).unwrap();
        assert_eq!(k.value(), 7.0);
        assert_eq!(k.grad_vec(), vec![0.0, 1.0]);
        assert!(Jet3::lift_coordinate(2, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn cube_of_coordinate() {
        let x = Jet3::lift_coordinate(0, &[2.0]).unwrap();
        let c = x * x * x;
        assert_eq!(c.value(), 8.0);
        assert_eq!(c.grad(0), 12.0);
        assert_eq!(c.hess(0, 0), 12.0);
        assert_eq!(c.third(0, 0, 0), 6.0);
    }

    #[test]
    fn sqrt_of_schwarzschild_factor() {
        let r = Jet3::lift_coordinate(0, &[4.0]).unwrap();
        let f = (1.0 - 2.0 * r.recip().unwrap()).sqrt().unwrap();
        assert_relative_eq!(f.value(), 0.5f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(f.grad(0), (1.0 / 16.0) / 0.5f64.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn mul_matches_pow_two() {
        let x = Jet3::lift_coordinate(0, &[1.7, -0.3]).unwrap();
        let y = Jet3::lift_coordinate(1, &[1.7, -0.3]).unwrap();
        let u = x * y + x.sin();
        let a = u * u;
        let b = u.powf(2.0).unwrap();
        for i in 0..2 {
            assert_relative_eq!(a.grad(i), b.grad(i), max_relative = 1e-14);
            for j in 0..2 {
                assert_relative_eq!(a.hess(i, j), b.hess(i, j), max_relative = 1e-14);
                for k in 0..2 {
                    assert_relative_eq!(a.third(i, j, k), b.third(i, j, k), max_relative = 1e-13);
                }
            }
        }
    }

    #[test]
    fn exp_ln_roundtrip() {
        let x = Jet3::coordinates(&[0.4, 1.3, 2.0]).unwrap();
        let u = x[0] * x[1] + x[2].exp() + 1.0;
        let v = u.ln().unwrap().exp();
        assert_relative_eq!(u.value(), v.value(), max_relative = 1e-15);
        for i in 0..3 {
            assert_relative_eq!(u.grad(i), v.grad(i), max_relative = 1e-14);
            for j in 0..3 {
                assert_relative_eq!(u.hess(i, j), v.hess(i, j), max_relative = 1e-13);
                for k in 0..3 {
                    assert_relative_eq!(u.third(i, j, k), v.third(i, j, k), max_relative = 1e-12, epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn domain_violations_are_errors() {
        let x = Jet3::lift_coordinate(0, &[-1.0]).unwrap();
        assert!(matches!(x.sqrt(), Err(JetError::Domain { op: "sqrt", .. })));
        assert!(matches!(x.ln(), Err(JetError::Domain { op: "ln", .. })));
        let z = Jet3::constant(1, 0.0);
        assert!(matches!(z.recip(), Err(JetError::Domain { op: "div", .. })));
        assert!(x.powf(0.5).is_err());
        assert!(x.powf(3.0).is_ok());
    }

    #[test]
    fn partial_lowers_order() {
        let x = Jet3::coordinates(&[1.5, 0.5]).unwrap();
        let u = x[0] * x[0] * x[1];
        let d0 = u.partial(0);
        assert_eq!(d0.order(), 2);
        assert_relative_eq!(d0.value(), 2.0 * 1.5 * 0.5);
        assert_relative_eq!(d0.grad(1), 3.0);
        assert_relative_eq!(d0.hess(0, 1), 2.0);
        let dd = d0.partial(1).partial(0);
        assert_eq!(dd.order(), 0);
        assert_relative_eq!(dd.value(), 2.0);
    }

    #[test]
    fn elementary_dispatch() {
        let x = Jet3::lift_coordinate(0, &[2.0]).unwrap();
        let two = Jet3::constant(1, 2.0);
        let p = elementary(Elementary::Pow, &[x, two]).unwrap();
        assert_relative_eq!(p.grad(0), 4.0);
        assert!(elementary(Elementary::Sqrt, &[x, x]).is_err());
        let q = elementary(Elementary::Pow, &[x, x]).unwrap();
        assert_relative_eq!(q.grad(0), 4.0 * (1.0 + 2f64.ln()), max_relative = 1e-14);
    }
}
