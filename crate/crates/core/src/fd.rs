//! Five-point central finite differences.
//!
//! Nested stencils (Hessian from gradients, third tensor from Hessians) use
//! larger steps per order so that roundoff, which grows like `eps / h^k`,
//! stays below the `h^4` truncation error.

use nalgebra::{DMatrix, DVector};

use crate::tensor::Tensor3;

pub const H1: f64 = 1e-3;
pub const H2: f64 = 5e-3;
pub const H3: f64 = 2e-2;

fn step(base: f64, x: f64) -> f64 {
    base * x.abs().max(1.0)
}

/// Five-point derivative of a scalar function of one variable.
pub fn derivative<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

/// Five-point stencil applied to a vector-valued function along coordinate `i`.
fn directional<T, F>(f: &F, x: &[f64], i: usize, h: f64, combine: impl Fn(&[T; 4]) -> T) -> T
where
    F: Fn(&[f64]) -> T,
{
    let mut y = x.to_vec();
    let mut at = |d: f64| {
        y[i] = x[i] + d;
        f(&y)
    };
    let vals = [at(2.0 * h), at(h), at(-h), at(-2.0 * h)];
    combine(&vals)
}

pub fn gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> DVector<f64> {
    DVector::from_iterator(
        x.len(),
        (0..x.len()).map(|i| {
            let h = step(H1, x[i]);
            directional(&f, x, i, h, |v| (-v[0] + 8.0 * v[1] - 8.0 * v[2] + v[3]) / (12.0 * h))
        }),
    )
}

/// Jacobian of `grad` (assumed to be a gradient), symmetrised.
pub fn jacobian_sym<F: Fn(&[f64]) -> DVector<f64>>(grad: F, x: &[f64], base: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let h = step(base, x[i]);
        let col = directional(&grad, x, i, h, |v| {
            (-&v[0] + &v[1] * 8.0 - &v[2] * 8.0 + &v[3]) / (12.0 * h)
        });
        m.set_column(i, &col);
    }
    (&m + m.transpose()) * 0.5
}

pub fn hessian<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> DMatrix<f64> {
    jacobian_sym(|y| gradient(&f, y), x, H2)
}

/// Derivative of a matrix-valued function along each coordinate, stacked
/// into a rank-3 tensor `t[k][i][j] = d m_ij / d x_k`, then symmetrised.
pub fn tensor_from_matrices<F: Fn(&[f64]) -> DMatrix<f64>>(m: F, x: &[f64], base: f64) -> Tensor3 {
    let n = x.len();
    let mut t = Tensor3::zeros(n);
    for k in 0..n {
        let h = step(base, x[k]);
        let d = directional(&m, x, k, h, |v| {
            (-&v[0] + &v[1] * 8.0 - &v[2] * 8.0 + &v[3]) / (12.0 * h)
        });
        for i in 0..n {
            for j in 0..n {
                t.set(k, i, j, d[(i, j)]);
            }
        }
    }
    t.symmetrized()
}

pub fn third<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> Tensor3 {
    tensor_from_matrices(|y| hessian(&f, y), x, H3)
}
