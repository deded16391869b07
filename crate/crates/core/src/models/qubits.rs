use crate::error::{Error, Result};
use crate::jet::{ln_2cosh, Jet};

use super::{expect_dim, log_binomials, Derivatives, Model, Sector};

/// `n` non-interacting qubits with Hamiltonian `eps * sum_i s_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Qubits {
    n: usize,
}

impl Qubits {
    pub fn new(n: usize) -> Self {
        Self::try_new(n).expect("at least one qubit")
    }

    pub fn try_new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one qubit".into()));
        }
        Ok(Qubits { n })
    }
}

impl Model for Qubits {
    fn name(&self) -> &'static str {
        "qubits"
    }

    fn n_params(&self) -> usize {
        1
    }

    fn n_spins(&self) -> Option<usize> {
        Some(self.n)
    }

    fn ln_z(&self, point: &[f64], beta: f64) -> Result<f64> {
        expect_dim(point, 1)?;
        Ok(self.n as f64 * ln_2cosh(beta * point[0]))
    }

    fn derivatives(&self, point: &[f64], beta: f64) -> Result<Derivatives> {
        expect_dim(point, 1)?;
        let [e] = Jet::<1>::variables(&[point[0]]);
        Ok(Derivatives::from_jet(&(e * beta).ln_2cosh().scale(self.n as f64)))
    }

    fn intrinsic_derivatives(&self, point: &[f64], beta: f64) -> Result<Derivatives> {
        expect_dim(point, 1)?;
        let [e] = Jet::<1>::variables(&[point[0]]);
        Ok(Derivatives::from_jet(&(e * beta).ln_2cosh()))
    }

    fn config_space(&self, point: &[f64]) -> Result<Vec<Sector>> {
        expect_dim(point, 1)?;
        let n = self.n;
        Ok(log_binomials(n)
            .into_iter()
            .enumerate()
            .map(|(k, lc)| Sector {
                label: format!("up={k}"),
                log_multiplicity: lc,
                energy: point[0] * (2.0 * k as f64 - n as f64),
            })
            .collect())
    }
}
