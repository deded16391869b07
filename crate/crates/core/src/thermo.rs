//! Value types, unit conventions and the dissipation functional over
//! discretised control trajectories.
//!
//! Units: `k_B = 1` and the relaxation time `tau_eq = 1`, so `tau` is measured
//! in relaxation times and energies in units of `1 / beta` unless `beta` is
//! varied explicitly.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Model;

/// Relaxation timescale; fixed.
pub const TAU_EQ: f64 = 1.0;

/// Tolerance on the smallest metric eigenvalue before a point is rejected.
pub const PSD_TOLERANCE: f64 = 1e-9;

/// Segments longer than this trigger a resolution warning.
pub const SEGMENT_WARN_LENGTH: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitsContext {
    pub beta: f64,
    pub tau: f64,
}

impl Default for UnitsContext {
    fn default() -> Self {
        UnitsContext { beta: 1.0, tau: 1.0 }
    }
}

impl UnitsContext {
    pub fn new(beta: f64, tau: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
        }
        Ok(UnitsContext { beta, tau })
    }

    pub const fn tau_eq(&self) -> f64 {
        TAU_EQ
    }
}

/// A point in control space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ControlPoint(Vec<f64>);

impl ControlPoint {
    pub fn new(params: Vec<f64>) -> Result<Self> {
        if let Some(x) = params.iter().find(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite control parameter {x}")));
        }
        Ok(ControlPoint(params))
    }

    pub fn params(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for ControlPoint {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// A control curve sampled on a strictly increasing time grid starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    times: Vec<f64>,
    points: Vec<ControlPoint>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, points: Vec<ControlPoint>) -> Result<Self> {
        if times.len() != points.len() {
            return Err(Error::DimensionMismatch { expected: times.len(), got: points.len() });
        }
        if times.len() < 2 {
            return Err(Error::InvalidArgument("trajectory needs at least two samples".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidArgument(format!("trajectory must start at t = 0, got {}", times[0])));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || !times.iter().all(|t| t.is_finite()) {
            return Err(Error::InvalidArgument("time grid must be finite and strictly increasing".into()));
        }
        let n = points[0].dim();
        if let Some(p) = points.iter().find(|p| p.dim() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: p.dim() });
        }
        Ok(Trajectory { times, points })
    }

    /// Uniform grid of `samples` points on `[0, tau]` mapped through `curve`.
    pub fn from_fn(tau: f64, samples: usize, curve: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let samples = samples.max(2);
        let times: Vec<f64> = (0..samples).map(|i| tau * i as f64 / (samples - 1) as f64).collect();
        let points = times.iter().map(|&t| ControlPoint::new(curve(t))).collect::<Result<_>>()?;
        Trajectory::new(times, points)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[ControlPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Same curve on a new time grid of equal length.
    pub fn with_times(&self, times: Vec<f64>) -> Result<Self> {
        Trajectory::new(times, self.points.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalState {
    pub probs: Vec<f64>,
    pub log_z: f64,
}

impl ThermalState {
    /// Normalised Boltzmann weights from `(ln multiplicity, energy)` pairs.
    pub fn from_levels(levels: &[(f64, f64)], beta: f64) -> Result<Self> {
        let terms: Vec<(f64, f64)> = levels.iter().map(|&(lm, e)| (lm, -beta * e)).collect();
        let log_z = log_sum_exp(&terms)?;
        let probs = terms.iter().map(|&(lm, x)| (lm + x - log_z).exp()).collect();
        Ok(ThermalState { probs, log_z })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissipationReport {
    pub length: f64,
    pub w_diss: f64,
    pub delta_f: f64,
    pub work_total: f64,
    pub work_variance: f64,
    /// `N ln 2 / beta` for spin models; kept apart from `delta_f`.
    pub landauer_reference: Option<f64>,
}

impl DissipationReport {
    pub fn new(length: f64, w_diss: f64, delta_f: f64, beta: f64, n_spins: Option<usize>) -> Self {
        DissipationReport {
            length,
            w_diss,
            delta_f,
            work_total: delta_f + w_diss,
            work_variance: 2.0 * w_diss / beta,
            landauer_reference: n_spins.map(|n| landauer_reference(n, beta)),
        }
    }

    /// Report for a constant-speed curve of the given length: `W = L^2 / (beta tau)`.
    pub fn optimal(length: f64, units: &UnitsContext, delta_f: f64, n_spins: Option<usize>) -> Self {
        let w = length * length / (units.beta * units.tau);
        Self::new(length, w, delta_f, units.beta, n_spins)
    }

    /// `tau * beta * W_diss`, the figure of merit quoted for comparisons.
    pub fn tau_beta_w(&self, units: &UnitsContext) -> f64 {
        units.tau * units.beta * self.w_diss
    }
}

pub fn landauer_reference(n_spins: usize, beta: f64) -> f64 {
    n_spins as f64 * std::f64::consts::LN_2 / beta
}

/// `ln sum_i exp(log_weight_i + exponent_i)` without overflow.
pub fn log_sum_exp(terms: &[(f64, f64)]) -> Result<f64> {
    if terms.is_empty() {
        return Err(Error::EmptySum);
    }
    let m = terms.iter().map(|(a, b)| a + b).fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return Ok(m);
    }
    if !m.is_finite() {
        return Err(Error::Domain(format!("non-finite term {m} in log-sum-exp")));
    }
    let s: f64 = terms.iter().map(|(a, b)| (a + b - m).exp()).sum();
    Ok(m + s.ln())
}

/// Same as [`log_sum_exp`] for plain exponents.
pub fn log_sum_exp_iter<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn thermal_state(model: &dyn Model, point: &ControlPoint, units: &UnitsContext) -> Result<ThermalState> {
    check_dim(model, point.dim())?;
    let levels: Vec<(f64, f64)> = model
        .config_space(point.params())?
        .into_iter()
        .map(|s| (s.log_multiplicity, s.energy))
        .collect();
    ThermalState::from_levels(&levels, units.beta)
}

fn check_dim(model: &dyn Model, got: usize) -> Result<()> {
    if got != model.n_params() {
        return Err(Error::DimensionMismatch { expected: model.n_params(), got });
    }
    Ok(())
}

/// Metric at a point, checked for positive semidefiniteness.
pub fn checked_metric(model: &dyn Model, point: &[f64], beta: f64) -> Result<DMatrix<f64>> {
    let g = model.metric(point, beta)?;
    let scale = g.amax().max(1.0);
    let min = SymmetricEigen::new(g.clone()).eigenvalues.min();
    if min < -PSD_TOLERANCE * scale || !min.is_finite() {
        return Err(Error::MetricNotPsd { min_eigenvalue: min });
    }
    Ok(g)
}

/// Metric length of the straight coordinate segment `a -> b`.
///
/// The integrand `sqrt(d^T g(a + s d) d)` is integrated by adaptive Simpson,
/// which stays accurate where the metric varies quickly along the segment
/// (near pure states) and a single midpoint evaluation would not.
pub fn segment_length(model: &dyn Model, a: &[f64], b: &[f64], beta: f64) -> Result<f64> {
    let d = DVector::from_iterator(a.len(), a.iter().zip(b).map(|(x, y)| y - x));
    if d.iter().all(|x| *x == 0.0) {
        return Ok(0.0);
    }
    let mid: Vec<f64> = a.iter().zip(&d).map(|(x, dx)| x + 0.5 * dx).collect();
    checked_metric(model, &mid, beta)?;

    let integrand = |s: f64| -> Result<f64> {
        let p: Vec<f64> = a.iter().zip(&d).map(|(x, dx)| x + s * dx).collect();
        let g = model.metric(&p, beta)?;
        Ok((d.dot(&(&g * &d))).max(0.0).sqrt())
    };
    adaptive_simpson(&integrand, 0.0, 1.0, 1e-12, 30)
}

fn adaptive_simpson<F: Fn(f64) -> Result<f64>>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> Result<f64> {
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol.max(1e-15 * whole.abs()), depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> Result<f64>>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    // At least two levels of refinement before trusting the error estimate.
    if depth == 0 || (delta.abs() <= 15.0 * tol && depth < 28) {
        return Ok(left + right + delta / 15.0);
    }
    Ok(simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

/// Thermodynamic length and slow-driving dissipation of a sampled curve.
///
/// Each segment contributes its metric length `L_k`; the dissipation is
/// `beta^-1 sum_k L_k^2 / dt_k`, which reduces to the usual
/// `beta^-1 sum (dl^T g dl) / dt` when the metric is constant on a segment.
pub fn dissipation_along_curve(
    model: &dyn Model,
    traj: &Trajectory,
    units: &UnitsContext,
) -> Result<DissipationReport> {
    check_dim(model, traj.dim())?;
    let t_end = traj.duration();
    if (t_end - units.tau).abs() > 1e-9 * units.tau.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "trajectory ends at {t_end}, expected tau = {}",
            units.tau
        )));
    }
    let beta = units.beta;
    let pts = traj.points();
    let times = traj.times();
    let mut length = 0.0;
    let mut beta_w = 0.0;
    let mut longest = 0.0f64;
    for k in 0..pts.len() - 1 {
        let l = segment_length(model, pts[k].params(), pts[k + 1].params(), beta)?;
        longest = longest.max(l);
        length += l;
        beta_w += l * l / (times[k + 1] - times[k]);
    }
    if longest > SEGMENT_WARN_LENGTH {
        log::warn!("trajectory segment of length {longest:.3} exceeds {SEGMENT_WARN_LENGTH}; refine the grid");
    }
    let ln_z0 = model.ln_z(pts[0].params(), beta)?;
    let ln_z1 = model.ln_z(pts[pts.len() - 1].params(), beta)?;
    let delta_f = (ln_z0 - ln_z1) / beta;
    Ok(DissipationReport::new(length, beta_w / beta, delta_f, beta, model.n_spins()))
}
