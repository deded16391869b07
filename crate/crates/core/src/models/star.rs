//! Star model: one central spin coupled to `N - 1` outer spins.
//!
//! `H = eps s_0 + eps1 sum_i s_i + J s_0 sum_i s_i` with parameters
//! `(eps, eps1, J)`. Conditioning on the central spin factorises the outer
//! spins with effective fields `lambda_pm = eps1 +- J`.

use crate::error::{Error, Result};
use crate::jet::{ln_2cosh, log_add_exp, Jet};

use super::{expect_dim, log_binomials, Derivatives, Model, Sector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Star {
    n: usize,
}

impl Star {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("star model needs N >= 2, got {n}")));
        }
        Ok(Star { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

pub fn lnz_star(n: usize, eps: f64, eps1: f64, j: f64, beta: f64) -> Result<f64> {
    Star::new(n)?.ln_z(&[eps, eps1, j], beta)
}

impl Model for Star {
    fn name(&self) -> &'static str {
        "star"
    }

    fn n_params(&self) -> usize {
        3
    }

    fn n_spins(&self) -> Option<usize> {
        Some(self.n)
    }

    fn ln_z(&self, point: &[f64], beta: f64) -> Result<f64> {
        expect_dim(point, 3)?;
        let (e, e1, j) = (point[0], point[1], point[2]);
        let outer = (self.n - 1) as f64;
        let up = -beta * e + outer * ln_2cosh(beta * (e1 + j));
        let down = beta * e + outer * ln_2cosh(beta * (e1 - j));
        let m = up.max(down);
        Ok(m + ((up - m).exp() + (down - m).exp()).ln())
    }

    fn derivatives(&self, point: &[f64], beta: f64) -> Result<Derivatives> {
        expect_dim(point, 3)?;
        let [e, e1, j] = Jet::<3>::variables(&[point[0], point[1], point[2]]);
        let outer = (self.n - 1) as f64;
        let up = e * -beta + ((e1 + j) * beta).ln_2cosh() * outer;
        let down = e * beta + ((e1 - j) * beta).ln_2cosh() * outer;
        Ok(Derivatives::from_jet(&log_add_exp(up, down)))
    }

    fn config_space(&self, point: &[f64]) -> Result<Vec<Sector>> {
        expect_dim(point, 3)?;
        let (e, e1, j) = (point[0], point[1], point[2]);
        let outer = self.n - 1;
        let lb = log_binomials(outer);
        let mut out = Vec::with_capacity(2 * (outer + 1));
        for (s0, tag) in [(1.0, "up"), (-1.0, "down")] {
            for (k, &lc) in lb.iter().enumerate() {
                let m = 2.0 * k as f64 - outer as f64;
                out.push(Sector {
                    label: format!("center={tag},outer_up={k}"),
                    log_multiplicity: lc,
                    energy: e * s0 + e1 * m + j * s0 * m,
                });
            }
        }
        Ok(out)
    }
}
