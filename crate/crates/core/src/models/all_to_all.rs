//! Fully connected Ising model.
//!
//! `H = eps sum_i s_i + (J/2) sum_{i,j} s_i s_j`, with the double sum running
//! over all ordered pairs including `i = j`. Grouping by the number `k` of up
//! spins gives `E_k = eps m + J m^2 / 2` with `m = 2k - N`, so the sufficient
//! statistics are `X = (m, m^2 / 2)` and `d^r ln Z = (-beta)^r kappa_r(X)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tensor::Tensor3;
use crate::thermo::log_sum_exp_iter;

use super::{expect_dim, log_binomials, Derivatives, Model, Sector};

#[derive(Debug, Clone, PartialEq)]
pub struct AllToAll {
    n: usize,
    log_binom: Vec<f64>,
}

impl AllToAll {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("all-to-all model needs N >= 2, got {n}")));
        }
        Ok(AllToAll { n, log_binom: log_binomials(n) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn stats(&self, k: usize) -> [f64; 2] {
        let m = 2.0 * k as f64 - self.n as f64;
        [m, 0.5 * m * m]
    }

    fn log_weights(&self, eps: f64, j: f64, beta: f64) -> Vec<f64> {
        (0..=self.n)
            .map(|k| {
                let [m, m2] = self.stats(k);
                self.log_binom[k] - beta * (eps * m + j * m2)
            })
            .collect()
    }

    /// Mean, covariance and third cumulant of the sufficient statistics.
    pub fn moments(&self, eps: f64, j: f64, beta: f64) -> Moments {
        let lw = self.log_weights(eps, j, beta);
        let ln_z = log_sum_exp_iter(lw.iter().copied());
        let p: Vec<f64> = lw.iter().map(|x| (x - ln_z).exp()).collect();
        let mut mean = [0.0; 2];
        for (k, pk) in p.iter().enumerate() {
            let x = self.stats(k);
            mean[0] += pk * x[0];
            mean[1] += pk * x[1];
        }
        let mut cov = DMatrix::zeros(2, 2);
        let mut k3 = Tensor3::zeros(2);
        for (k, pk) in p.iter().enumerate() {
            let x = self.stats(k);
            let d = [x[0] - mean[0], x[1] - mean[1]];
            for a in 0..2 {
                for b in 0..2 {
                    cov[(a, b)] += pk * d[a] * d[b];
                    for c in 0..2 {
                        k3.set(a, b, c, k3.get(a, b, c) + pk * d[a] * d[b] * d[c]);
                    }
                }
            }
        }
        Moments { ln_z, mean: DVector::from_row_slice(&mean), cov, kappa3: k3 }
    }
}

/// Connected moments of the sufficient statistics `(m, m^2/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub ln_z: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub kappa3: Tensor3,
}

impl Moments {
    /// `d^r ln Z = (-beta)^r kappa_r`.
    pub fn derivatives(&self, beta: f64) -> Derivatives {
        Derivatives {
            value: self.ln_z,
            grad: &self.mean * -beta,
            hess: &self.cov * (beta * beta),
            third: self.kappa3.scaled(-beta * beta * beta),
        }
    }
}

pub fn lnz_all_to_all(n: usize, eps: f64, j: f64, beta: f64) -> Result<f64> {
    AllToAll::new(n)?.ln_z(&[eps, j], beta)
}

pub fn moments_all_to_all(n: usize, eps: f64, j: f64, beta: f64) -> Result<Moments> {
    Ok(AllToAll::new(n)?.moments(eps, j, beta))
}

impl Model for AllToAll {
    fn name(&self) -> &'static str {
        "all_to_all"
    }

    fn n_params(&self) -> usize {
        2
    }

    fn n_spins(&self) -> Option<usize> {
        Some(self.n)
    }

    fn ln_z(&self, point: &[f64], beta: f64) -> Result<f64> {
        expect_dim(point, 2)?;
        // Z is even in eps (global spin flip); evaluating at |eps| makes the
        // symmetry exact in floating point.
        Ok(log_sum_exp_iter(self.log_weights(point[0].abs(), point[1], beta)))
    }

    fn derivatives(&self, point: &[f64], beta: f64) -> Result<Derivatives> {
        expect_dim(point, 2)?;
        Ok(self.moments(point[0], point[1], beta).derivatives(beta))
    }

    fn config_space(&self, point: &[f64]) -> Result<Vec<Sector>> {
        expect_dim(point, 2)?;
        Ok((0..=self.n)
            .map(|k| {
                let [m, m2] = self.stats(k);
                Sector {
                    label: format!("up={k}"),
                    log_multiplicity: self.log_binom[k],
                    energy: point[0] * m + point[1] * m2,
                }
            })
            .collect())
    }
}
