//! Third-order forward-mode derivatives in `N` variables.
//!
//! A [`Jet`] carries a value together with its gradient, Hessian and third
//! derivative tensor. Arithmetic and elementary functions propagate all four
//! by the multivariate chain rule, so a log-partition function written once
//! in terms of jets yields exact metric and Christoffel ingredients.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<const N: usize> {
    pub value: f64,
    pub grad: [f64; N],
    pub hess: [[f64; N]; N],
    pub third: [[[f64; N]; N]; N],
}

impl<const N: usize> Jet<N> {
    pub fn constant(value: f64) -> Self {
        Jet {
            value,
            grad: [0.0; N],
            hess: [[0.0; N]; N],
            third: [[[0.0; N]; N]; N],
        }
    }

    /// The `index`-th coordinate function evaluated at `value`.
    pub fn variable(value: f64, index: usize) -> Self {
        let mut j = Self::constant(value);
        j.grad[index] = 1.0;
        j
    }

    /// Seeds all `N` coordinates at `point`.
    pub fn variables(point: &[f64; N]) -> [Self; N] {
        std::array::from_fn(|i| Self::variable(point[i], i))
    }

    /// Applies a scalar function given its value and first three derivatives
    /// at `self.value`.
    pub fn compose(&self, f0: f64, f1: f64, f2: f64, f3: f64) -> Self {
        let u = self;
        let mut out = Self::constant(f0);
        for i in 0..N {
            out.grad[i] = f1 * u.grad[i];
            for j in 0..N {
                out.hess[i][j] = f2 * u.grad[i] * u.grad[j] + f1 * u.hess[i][j];
                for k in 0..N {
                    out.third[i][j][k] = f3 * u.grad[i] * u.grad[j] * u.grad[k]
                        + f2 * (u.hess[i][j] * u.grad[k]
                            + u.hess[i][k] * u.grad[j]
                            + u.hess[j][k] * u.grad[i])
                        + f1 * u.third[i][j][k];
                }
            }
        }
        out
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = *self;
        out.value *= c;
        for i in 0..N {
            out.grad[i] *= c;
            for j in 0..N {
                out.hess[i][j] *= c;
                for k in 0..N {
                    out.third[i][j][k] *= c;
                }
            }
        }
        out
    }

    pub fn exp(&self) -> Self {
        let e = self.value.exp();
        self.compose(e, e, e, e)
    }

    pub fn ln(&self) -> Self {
        let x = self.value;
        self.compose(x.ln(), 1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x))
    }

    pub fn recip(&self) -> Self {
        let r = 1.0 / self.value;
        self.compose(r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r)
    }

    pub fn sqrt(&self) -> Self {
        let s = self.value.sqrt();
        let x = self.value;
        self.compose(s, 0.5 / s, -0.25 / (s * x), 0.375 / (s * x * x))
    }

    pub fn cosh(&self) -> Self {
        let (c, s) = (self.value.cosh(), self.value.sinh());
        self.compose(c, s, c, s)
    }

    pub fn sinh(&self) -> Self {
        let (c, s) = (self.value.cosh(), self.value.sinh());
        self.compose(s, c, s, c)
    }

    /// `ln(2 cosh x)`, stable for large `|x|`.
    pub fn ln_2cosh(&self) -> Self {
        let x = self.value;
        let t = x.tanh();
        let e = (-2.0 * x.abs()).exp();
        let sech2 = 4.0 * e / ((1.0 + e) * (1.0 + e));
        self.compose(ln_2cosh(x), t, sech2, -2.0 * t * sech2)
    }

    /// `ln(1 + e^x)`, stable for large `|x|`.
    pub fn softplus(&self) -> Self {
        let x = self.value;
        let s = logistic(x);
        let s1 = s * logistic(-x);
        self.compose(softplus(x), s, s1, s1 * (1.0 - 2.0 * s))
    }

    /// Integer power by repeated squaring.
    pub fn powi(&self, n: u32) -> Self {
        let mut result = Self::constant(1.0);
        let mut base = *self;
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = result * base;
            }
            base = base * base;
            e >>= 1;
        }
        result
    }
}

/// `ln(e^a + e^b)` on jets.
pub fn log_add_exp<const N: usize>(a: Jet<N>, b: Jet<N>) -> Jet<N> {
    if a.value >= b.value {
        a + (b - a).softplus()
    } else {
        b + (a - b).softplus()
    }
}

pub(crate) fn ln_2cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p()
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<const N: usize> Add for Jet<N> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut out = self;
        out.value += rhs.value;
        for i in 0..N {
            out.grad[i] += rhs.grad[i];
            for j in 0..N {
                out.hess[i][j] += rhs.hess[i][j];
                for k in 0..N {
                    out.third[i][j][k] += rhs.third[i][j][k];
                }
            }
        }
        out
    }
}

impl<const N: usize> Add<f64> for Jet<N> {
    type Output = Self;
    fn add(self, rhs: f64) -> Self {
        let mut out = self;
        out.value += rhs;
        out
    }
}

impl<const N: usize> Neg for Jet<N> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl<const N: usize> Sub for Jet<N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<const N: usize> Mul for Jet<N> {
    type Output = Self;
    fn mul(self, v: Self) -> Self {
        let u = self;
        let mut out = Self::constant(u.value * v.value);
        for i in 0..N {
            out.grad[i] = u.grad[i] * v.value + u.value * v.grad[i];
            for j in 0..N {
                out.hess[i][j] = u.hess[i][j] * v.value
                    + u.grad[i] * v.grad[j]
                    + u.grad[j] * v.grad[i]
                    + u.value * v.hess[i][j];
                for k in 0..N {
                    out.third[i][j][k] = u.third[i][j][k] * v.value
                        + u.hess[i][j] * v.grad[k]
                        + u.hess[i][k] * v.grad[j]
                        + u.hess[j][k] * v.grad[i]
                        + u.grad[i] * v.hess[j][k]
                        + u.grad[j] * v.hess[i][k]
                        + u.grad[k] * v.hess[i][j]
                        + u.value * v.third[i][j][k];
                }
            }
        }
        out
    }
}

impl<const N: usize> Mul<f64> for Jet<N> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.scale(rhs)
    }
}
