//! Full control: every distinct eigen-energy is its own control parameter.
//!
//! With thermal weights `w_i = m_i e^{-beta g_i} / Z` the metric is
//! `beta^2 (w_i d_ij - w_i w_j)`, which annihilates the uniform shift
//! `(1, ..., 1)`. [`Gauge::PinFirst`] removes that direction by fixing the
//! first energy to zero, leaving `n - 1` parameters and an invertible metric.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor3;
use crate::thermo::log_sum_exp;

use super::{expect_dim, log_binomials, Derivatives, Model, Sector};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    /// All `n` energies are parameters.
    #[default]
    Free,
    /// The first energy is fixed to 0; parameters are the remaining `n - 1`.
    PinFirst,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullControl {
    log_mult: Vec<f64>,
    multiplicities: Vec<u64>,
    gauge: Gauge,
    n_spins: Option<usize>,
}

pub fn lnz_full_control(energies: &[f64], multiplicities: &[u64], beta: f64) -> Result<f64> {
    FullControl::new(multiplicities.to_vec())?.ln_z(energies, beta)
}

impl FullControl {
    pub fn new(multiplicities: Vec<u64>) -> Result<Self> {
        if multiplicities.is_empty() {
            return Err(Error::InvalidArgument("full-control model needs at least one level".into()));
        }
        if multiplicities.iter().any(|&m| m == 0) {
            return Err(Error::InvalidArgument("multiplicities must be positive integers".into()));
        }
        Ok(FullControl {
            log_mult: multiplicities.iter().map(|&m| (m as f64).ln()).collect(),
            multiplicities,
            gauge: Gauge::Free,
            n_spins: None,
        })
    }

    /// `N` spins under permutation-symmetric control: `N + 1` levels labelled
    /// by the number of excitations, with multiplicities `C(N, k)`.
    pub fn permutation_reduced(n: usize) -> Result<Self> {
        if n == 0 || n > 1000 {
            return Err(Error::InvalidArgument(format!("unsupported spin count {n}")));
        }
        let lb = log_binomials(n);
        let mult = lb.iter().map(|l| l.exp().round().min(u64::MAX as f64) as u64).collect();
        Ok(FullControl { log_mult: lb, multiplicities: mult, gauge: Gauge::Free, n_spins: Some(n) })
    }

    pub fn with_gauge(mut self, gauge: Gauge) -> Self {
        self.gauge = gauge;
        self
    }

    pub fn n_levels(&self) -> usize {
        self.log_mult.len()
    }

    pub fn multiplicities(&self) -> &[u64] {
        &self.multiplicities
    }

    pub fn gauge(&self) -> Gauge {
        self.gauge
    }

    /// Full energy vector for a parameter point.
    pub fn energies(&self, point: &[f64]) -> Result<Vec<f64>> {
        expect_dim(point, self.n_params())?;
        Ok(match self.gauge {
            Gauge::Free => point.to_vec(),
            Gauge::PinFirst => std::iter::once(0.0).chain(point.iter().copied()).collect(),
        })
    }

    /// Parameter point for a full energy vector (shifted so level 0 sits at 0
    /// when pinned).
    pub fn params_from_energies(&self, energies: &[f64]) -> Result<Vec<f64>> {
        expect_dim(energies, self.n_levels())?;
        Ok(match self.gauge {
            Gauge::Free => energies.to_vec(),
            Gauge::PinFirst => energies[1..].iter().map(|e| e - energies[0]).collect(),
        })
    }

    /// Level probabilities (multiplicity included).
    pub fn weights(&self, point: &[f64], beta: f64) -> Result<(f64, Vec<f64>)> {
        let e = self.energies(point)?;
        let terms: Vec<(f64, f64)> = self.log_mult.iter().zip(&e).map(|(&lm, &g)| (lm, -beta * g)).collect();
        let ln_z = log_sum_exp(&terms)?;
        Ok((ln_z, terms.iter().map(|(lm, x)| (lm + x - ln_z).exp()).collect()))
    }

    fn offset(&self) -> usize {
        match self.gauge {
            Gauge::Free => 0,
            Gauge::PinFirst => 1,
        }
    }
}

impl Model for FullControl {
    fn name(&self) -> &'static str {
        "full_control"
    }

    fn n_params(&self) -> usize {
        self.log_mult.len() - self.offset()
    }

    fn n_spins(&self) -> Option<usize> {
        self.n_spins
    }

    fn ln_z(&self, point: &[f64], beta: f64) -> Result<f64> {
        Ok(self.weights(point, beta)?.0)
    }

    fn derivatives(&self, point: &[f64], beta: f64) -> Result<Derivatives> {
        let (ln_z, w) = self.weights(point, beta)?;
        let off = self.offset();
        let w = &w[off..];
        let n = w.len();
        let b2 = beta * beta;
        let grad = DVector::from_iterator(n, w.iter().map(|x| -beta * x));
        let hess = DMatrix::from_fn(n, n, |i, j| b2 * (if i == j { w[i] } else { 0.0 } - w[i] * w[j]));
        // Third cumulant of one-hot indicators.
        let mut third = Tensor3::zeros(n);
        let b3 = -b2 * beta;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                    let c = w[i] * d(i, j) * d(j, k)
                        - w[i] * w[k] * d(i, j)
                        - w[i] * w[j] * d(i, k)
                        - w[j] * w[i] * d(j, k)
                        + 2.0 * w[i] * w[j] * w[k];
                    third.set(i, j, k, b3 * c);
                }
            }
        }
        Ok(Derivatives { value: ln_z, grad, hess, third })
    }

    fn metric(&self, point: &[f64], beta: f64) -> Result<DMatrix<f64>> {
        let (_, w) = self.weights(point, beta)?;
        let w = &w[self.offset()..];
        let n = w.len();
        Ok(DMatrix::from_fn(n, n, |i, j| beta * beta * (if i == j { w[i] } else { 0.0 } - w[i] * w[j])))
    }

    fn config_space(&self, point: &[f64]) -> Result<Vec<Sector>> {
        let e = self.energies(point)?;
        Ok(self
            .log_mult
            .iter()
            .zip(e)
            .enumerate()
            .map(|(i, (&lm, g))| Sector { label: format!("level={i}"), log_multiplicity: lm, energy: g })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::finite_difference_derivatives;
    use approx::assert_relative_eq;

    #[test]
    fn closed_forms() {
        assert_relative_eq!(lnz_full_control(&[0.0, 0.0], &[1, 1], 1.0).unwrap(), 2f64.ln());
        assert_relative_eq!(lnz_full_control(&[0.0, 1e300], &[1, 1], 1.0).unwrap(), 0.0);
    }

    #[test]
    fn two_level_metric() {
        let fc = FullControl::new(vec![1, 1]).unwrap();
        let g = fc.metric(&[0.0, 0.0], 2.0).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert!((g - expect).amax() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for gauge in [Gauge::Free, Gauge::PinFirst] {
            let fc = FullControl::new(vec![1, 3, 2, 1]).unwrap().with_gauge(gauge);
            let p: Vec<f64> = [0.3, -0.2, 0.5, 0.1][..fc.n_params()].to_vec();
            let a = fc.derivatives(&p, 1.3).unwrap();
            let f = finite_difference_derivatives(&fc, &p, 1.3).unwrap();
            assert!((&a.grad - &f.grad).amax() < 1e-9);
            assert!((&a.hess - &f.hess).amax() < 1e-8);
            for (x, y) in a.third.as_slice().iter().zip(f.third.as_slice()) {
                assert!((x - y).abs() < 1e-6);
            }
            assert!(a.third.asymmetry() < 1e-15);
        }
    }
}
