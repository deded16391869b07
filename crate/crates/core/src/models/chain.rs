//! Periodic nearest-neighbour Ising chain.
//!
//! `H = eps sum_i s_i + (J/2) sum_i s_i s_{i+1}` on a ring of `N` spins. The
//! transfer matrix has eigenvalues
//! `z_pm = e^{-bJ/2} [cosh(b eps) +- sqrt(sinh^2(b eps) + e^{2bJ})]`, so the
//! exact `ln Z = ln(z_+^N + z_-^N)` and the extensive form keeps `N ln z_+`.
//! `z_-` is negative for `J > 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet;
#[cfg(test)]
use crate::thermo::log_sum_exp_iter;

use super::{expect_dim, Derivatives, Model, Sector};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainForm {
    /// `N ln z_+`; its geometry is `N` times a per-spin geometry.
    #[default]
    Extensive,
    /// `ln(z_+^N + z_-^N)`, exact for the finite ring.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsingChain {
    n: usize,
    form: ChainForm,
}

/// `(ln z_+, z_- / z_+)` on jets, stable for large `|b eps|`.
fn eigen_jets<const K: usize>(b_eps: Jet<K>, b_j: Jet<K>) -> (Jet<K>, Jet<K>) {
    // cosh x + sqrt(sinh^2 x + e^{2bJ}) = e^a [ (1+u)/2 + sqrt((1-u)^2/4 + e^{2bJ-2a}) ]
    // with a = |x| and u = e^{-2a}; valid for either sign of a.
    let a = if b_eps.value >= 0.0 { b_eps } else { -b_eps };
    let u = (a * -2.0).exp();
    let one_minus_u = -u + 1.0;
    let tail = (b_j * 2.0 - a * 2.0).exp();
    let inner = (u + 1.0) * 0.5 + (one_minus_u * one_minus_u * 0.25 + tail).sqrt();
    let ln_zp = -b_j * 0.5 + a + inner.ln();
    // z_- / z_+ = (1 - e^{2bJ}) / (cosh + sqrt)^2 = (u - tail) / inner^2
    let ratio = (u - tail) * (inner * inner).recip();
    (ln_zp, ratio)
}

fn eigen_values(b_eps: f64, b_j: f64) -> (f64, f64) {
    let (l, r) = eigen_jets(Jet::<0>::constant(b_eps), Jet::<0>::constant(b_j));
    (l.value, r.value)
}

fn exact_from_eigen(n: usize, ln_zp: f64, ratio: f64) -> f64 {
    n as f64 * ln_zp + (ratio.powi(n as i32)).ln_1p()
}

/// Exact `ln Z` of the periodic chain.
pub fn lnz_chain(n: usize, eps: f64, j: f64, beta: f64) -> Result<f64> {
    IsingChain::new(n, ChainForm::Exact)?.ln_z(&[eps, j], beta)
}

/// Thermodynamic-limit `ln Z = N ln z_+`.
pub fn lnz_chain_extensive(n: usize, eps: f64, j: f64, beta: f64) -> Result<f64> {
    IsingChain::new(n, ChainForm::Extensive)?.ln_z(&[eps, j], beta)
}

impl IsingChain {
    pub fn new(n: usize, form: ChainForm) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidArgument(format!("periodic chain needs N >= 3, got {n}")));
        }
        Ok(IsingChain { n, form })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn form(&self) -> ChainForm {
        self.form
    }

    fn jets(&self, point: &[f64], beta: f64, per_spin: bool) -> Jet<2> {
        let [e, j] = Jet::<2>::variables(&[point[0], point[1]]);
        let (ln_zp, ratio) = eigen_jets(e * beta, j * beta);
        let n = self.n as f64;
        match (self.form, per_spin) {
            (ChainForm::Extensive, true) => ln_zp,
            (ChainForm::Extensive, false) => ln_zp * n,
            (ChainForm::Exact, _) => ln_zp * n + (ratio.powi(self.n as u32) + 1.0).ln(),
        }
    }

    /// Number of ring configurations with `k` up spins and `w` domain walls,
    /// indexed `[k][w]`.
    pub fn sector_counts(&self) -> Vec<Vec<f64>> {
        let n = self.n;
        let mut total = vec![vec![0.0; n + 1]; n + 1];
        for first in 0..2usize {
            // dp[last][k][w] over the open chain starting with `first`.
            let mut dp = vec![vec![vec![0.0f64; n + 1]; n + 1]; 2];
            dp[first][first][0] = 1.0;
            for _ in 1..n {
                let mut next = vec![vec![vec![0.0f64; n + 1]; n + 1]; 2];
                for last in 0..2 {
                    for k in 0..=n {
                        for w in 0..n {
                            let c = dp[last][k][w];
                            if c == 0.0 {
                                continue;
                            }
                            for s in 0..2 {
                                let nk = k + s;
                                let nw = w + usize::from(s != last);
                                if nk <= n && nw <= n {
                                    next[s][nk][nw] += c;
                                }
                            }
                        }
                    }
                }
                dp = next;
            }
            for last in 0..2 {
                for k in 0..=n {
                    for w in 0..=n {
                        let nw = w + usize::from(last != first);
                        if dp[last][k][w] > 0.0 && nw <= n {
                            total[k][nw] += dp[last][k][w];
                        }
                    }
                }
            }
        }
        total
    }
}

impl Model for IsingChain {
    fn name(&self) -> &'static str {
        "chain"
    }

    fn n_params(&self) -> usize {
        2
    }

    fn n_spins(&self) -> Option<usize> {
        Some(self.n)
    }

    fn ln_z(&self, point: &[f64], beta: f64) -> Result<f64> {
        expect_dim(point, 2)?;
        let (ln_zp, ratio) = eigen_values(beta * point[0], beta * point[1]);
        Ok(match self.form {
            ChainForm::Extensive => self.n as f64 * ln_zp,
            ChainForm::Exact => exact_from_eigen(self.n, ln_zp, ratio),
        })
    }

    fn derivatives(&self, point: &[f64], beta: f64) -> Result<Derivatives> {
        expect_dim(point, 2)?;
        Ok(Derivatives::from_jet(&self.jets(point, beta, false)))
    }

    fn intrinsic_derivatives(&self, point: &[f64], beta: f64) -> Result<Derivatives> {
        expect_dim(point, 2)?;
        Ok(Derivatives::from_jet(&self.jets(point, beta, true)))
    }

    /// Exact ring sectors regardless of [`ChainForm`].
    fn config_space(&self, point: &[f64]) -> Result<Vec<Sector>> {
        expect_dim(point, 2)?;
        let n = self.n as f64;
        let counts = self.sector_counts();
        let mut out = Vec::new();
        for (k, row) in counts.iter().enumerate() {
            for (w, &c) in row.iter().enumerate() {
                if c > 0.0 {
                    out.push(Sector {
                        label: format!("up={k},walls={w}"),
                        log_multiplicity: c.ln(),
                        energy: point[0] * (2.0 * k as f64 - n) + 0.5 * point[1] * (n - 2.0 * w as f64),
                    });
                }
            }
        }
        Ok(out)
    }
}

/// `ln Z` summed over the exact ring sectors; an independent check of the
/// transfer-matrix eigenvalues.
#[cfg(test)]
pub(crate) fn lnz_chain_by_sectors(chain: &IsingChain, eps: f64, j: f64, beta: f64) -> Result<f64> {
    let s = chain.config_space(&[eps, j])?;
    Ok(log_sum_exp_iter(s.iter().map(|s| s.log_multiplicity - beta * s.energy)))
}
