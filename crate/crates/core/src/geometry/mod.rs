//! Metric, Christoffel symbols and geodesics of the thermodynamic metric.
//!
//! With `g = d^2 ln Z` the first-kind Christoffel symbols collapse to half the
//! third-derivative tensor, so `Gamma^i_jk = 1/2 g^{il} d_l d_j d_k ln Z`.

mod integrate;
mod shoot;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Derivatives, Model};
use crate::tensor::Tensor3;
use crate::thermo::{checked_metric, ControlPoint, DissipationReport, Trajectory};

pub use integrate::integrate_geodesic;
pub use shoot::{shoot_geodesic, ShootDiagnostics, ShootOptions, ShotOutcome, Target};

/// Largest admissible condition number of the metric.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricTensor {
    pub g: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChristoffelTensor {
    /// `gamma.get(i, j, k)` is `Gamma^i_jk`.
    pub gamma: Tensor3,
}

impl ChristoffelTensor {
    /// `Gamma^i_jk v^j v^k`.
    pub fn contract(&self, v: &[f64]) -> DVector<f64> {
        let n = self.gamma.dim();
        DVector::from_fn(n, |i, _| {
            let mut s = 0.0;
            for j in 0..n {
                for k in 0..n {
                    s += self.gamma.get(i, j, k) * v[j] * v[k];
                }
            }
            s
        })
    }
}

pub fn metric_at(model: &dyn Model, point: &ControlPoint, beta: f64) -> Result<MetricTensor> {
    let g = checked_metric(model, point.params(), beta)?;
    Ok(MetricTensor { g: (&g + g.transpose()) * 0.5 })
}

fn condition(g: &DMatrix<f64>) -> f64 {
    let ev = SymmetricEigen::new(g.clone()).eigenvalues;
    let (lo, hi) = (ev.min(), ev.max());
    if !(lo > 0.0) || !hi.is_finite() {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Factorised metric ready for solving `g x = b`, rejected when ill-conditioned.
fn factor(d: &Derivatives) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let cond = condition(&d.hess);
    if cond > MAX_CONDITION {
        return Err(Error::DegenerateMetric { condition: cond });
    }
    nalgebra::Cholesky::new(d.hess.clone()).ok_or(Error::DegenerateMetric { condition: cond })
}

pub fn christoffel_at(model: &dyn Model, point: &ControlPoint, beta: f64) -> Result<ChristoffelTensor> {
    let d = model.intrinsic_derivatives(point.params(), beta)?;
    let chol = factor(&d)?;
    let n = d.grad.len();
    let mut gamma = Tensor3::zeros(n);
    for j in 0..n {
        for k in j..n {
            let t = DVector::from_fn(n, |l, _| 0.5 * d.third.get(l, j, k));
            let col = chol.solve(&t);
            for i in 0..n {
                gamma.set(i, j, k, col[i]);
                gamma.set(i, k, j, col[i]);
            }
        }
    }
    Ok(ChristoffelTensor { gamma })
}

/// Geodesic acceleration `-Gamma^i_jk v^j v^k` from a single factorisation.
pub(crate) fn acceleration(model: &dyn Model, x: &[f64], v: &[f64], beta: f64) -> Result<DVector<f64>> {
    let d = model.intrinsic_derivatives(x, beta)?;
    let chol = factor(&d)?;
    let n = v.len();
    let w = DVector::from_fn(n, |l, _| {
        let mut s = 0.0;
        for j in 0..n {
            for k in 0..n {
                s += d.third.get(l, j, k) * v[j] * v[k];
            }
        }
        -0.5 * s
    });
    Ok(chol.solve(&w))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicSolution {
    pub trajectory: Trajectory,
    /// `d lambda / dt` at every sample.
    pub velocities: Vec<Vec<f64>>,
    pub report: DissipationReport,
    /// `ds / dt` at every sample.
    pub speed_profile: Vec<f64>,
    pub converged: bool,
    /// Initial velocity ratio `eps'(0) / J'(0)` for shot solutions.
    pub shooting_ratio: Option<f64>,
}

impl GeodesicSolution {
    /// Relative spread `stdev / mean` of the speed profile.
    pub fn speed_spread(&self) -> f64 {
        speed_spread(&self.speed_profile)
    }

    pub fn final_point(&self) -> &ControlPoint {
        self.trajectory.points().last().unwrap()
    }
}

pub(crate) fn speed_spread(s: &[f64]) -> f64 {
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return 0.0;
    }
    let var = s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

/// Weights of the derivative at `t[k]` of the Lagrange interpolant through
/// the nodes `t[lo..lo + w.len()]`.
fn lagrange_derivative_weights(t: &[f64], lo: usize, k: usize, w: &mut [f64]) {
    let nodes = &t[lo..lo + w.len()];
    let x = t[k];
    for (j, wj) in w.iter_mut().enumerate() {
        let mut sum = 0.0;
        for m in (0..nodes.len()).filter(|&m| m != j) {
            let mut prod = 1.0 / (nodes[j] - nodes[m]);
            for l in (0..nodes.len()).filter(|&l| l != j && l != m) {
                prod *= (x - nodes[l]) / (nodes[j] - nodes[l]);
            }
            sum += prod;
        }
        *wj = sum;
    }
}

/// Largest violation of the geodesic equation along a solution, using
/// five-point Lagrange derivatives of the stored velocities (valid on an
/// uneven time grid), together with the scale `max |lambda'|^2 / tau` it
/// should be compared against.
pub fn geodesic_residual(model: &dyn Model, sol: &GeodesicSolution, beta: f64) -> Result<(f64, f64)> {
    const WIDTH: usize = 5;
    let t = sol.trajectory.times();
    let pts = sol.trajectory.points();
    let v = &sol.velocities;
    let tau = sol.trajectory.duration();
    let mut worst = 0.0f64;
    let mut w = [0.0; WIDTH];
    if t.len() >= WIDTH {
        for k in 0..t.len() {
            let lo = k.saturating_sub(WIDTH / 2).min(t.len() - WIDTH);
            if t[lo..lo + WIDTH].windows(2).any(|p| !(p[1] > p[0])) {
                continue;
            }
            lagrange_derivative_weights(t, lo, k, &mut w);
            let gam = christoffel_at(model, &pts[k], beta)?.contract(&v[k]);
            for i in 0..v[k].len() {
                let acc: f64 = w.iter().enumerate().map(|(j, wj)| wj * v[lo + j][i]).sum();
                worst = worst.max((acc + gam[i]).abs());
            }
        }
    }
    let vmax = v.iter().map(|x| x.iter().map(|c| c * c).sum::<f64>()).fold(0.0, f64::max);
    Ok((worst, vmax / tau))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{finite_difference_derivatives, AllToAll, FullControl, Qubits};
    use approx::assert_relative_eq;

    fn cp(v: &[f64]) -> ControlPoint {
        ControlPoint::new(v.to_vec()).unwrap()
    }

    #[test]
    fn full_control_two_level_metric() {
        let fc = FullControl::new(vec![1, 1]).unwrap();
        let g = metric_at(&fc, &cp(&[0.0, 0.0]), 1.0).unwrap().g;
        let expect = DMatrix::from_row_slice(2, 2, &[0.25, -0.25, -0.25, 0.25]);
        assert!((&g - &expect).amax() < 1e-15);
        let fd = finite_difference_derivatives(&fc, &[0.0, 0.0], 1.0).unwrap().hess;
        assert!((&g - &fd).amax() < 1e-9);
        // The uniform shift is a null direction.
        assert!(matches!(christoffel_at(&fc, &cp(&[0.0, 0.0]), 1.0), Err(Error::DegenerateMetric { .. })));
    }

    #[test]
    fn frozen_state_has_vanishing_metric() {
        let m = AllToAll::new(5).unwrap();
        let g = metric_at(&m, &cp(&[60.0, 0.0]), 1.0).unwrap().g;
        assert!(g.amax() < 1e-40);
    }

    #[test]
    fn all_to_all_metric_matches_finite_differences() {
        let m = AllToAll::new(5).unwrap();
        let g = metric_at(&m, &cp(&[0.3, 0.1]), 1.0).unwrap().g;
        let f = |x: &[f64]| m.ln_z(x, 1.0).unwrap();
        let fd = crate::fd::hessian(f, &[0.3, 0.1]);
        assert!((&g - &fd).amax() < 1e-7 * g.amax(), "{g} {fd}");
    }

    #[test]
    fn one_parameter_christoffel() {
        // Gamma = g' / 2g = -beta tanh(beta eps) for ln 2cosh(beta eps)
        let q = Qubits::new(3);
        for e in [-2.0, 0.0, 0.4, 9.0] {
            let g = christoffel_at(&q, &cp(&[e]), 1.7).unwrap();
            assert_relative_eq!(g.gamma.get(0, 0, 0), -1.7 * (1.7 * e).tanh(), epsilon = 1e-12);
        }
    }

    #[test]
    fn christoffel_is_symmetric_and_flat_where_metric_is_constant() {
        let m = AllToAll::new(6).unwrap();
        let g = christoffel_at(&m, &cp(&[0.2, -0.1]), 1.0).unwrap();
        for i in 0..2 {
            assert_eq!(g.gamma.get(i, 0, 1), g.gamma.get(i, 1, 0));
        }
        let q = Qubits::new(1);
        assert_eq!(christoffel_at(&q, &cp(&[0.0]), 1.0).unwrap().gamma.get(0, 0, 0), 0.0);
    }
}
