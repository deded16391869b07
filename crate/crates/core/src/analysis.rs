//! Dissipation sweeps over system size and power-law fits.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::analytic::{global_erasure_length, local_erasure_tau_beta_w};
use crate::error::{Error, Result};
use crate::geometry::{shoot_geodesic, GeodesicSolution, ShootOptions, Target};
use crate::models::{AllToAll, ChainForm, IsingChain, Model, PyramidSpec};
use crate::steps::pyramid_bound;
use crate::thermo::{ControlPoint, UnitsContext};

/// Number of points in the default size grid.
pub const DEFAULT_SWEEP_POINTS: usize = 19;
pub const DEFAULT_N_MIN: usize = 5;
pub const DEFAULT_N_MAX: usize = 150;
/// Default erasure target `beta eps*`.
pub const DEFAULT_EPS_FINAL: f64 = 5.0;
/// Minimum number of points for a power-law fit.
pub const MIN_FIT_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    /// Independent qubits, each erased by its own field.
    Local,
    /// Every eigen-energy controlled.
    FullControl,
    AllToAll,
    Chain,
    Star,
}

impl ModelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ModelFamily::Local => "local",
            ModelFamily::FullControl => "full_control",
            ModelFamily::AllToAll => "all_to_all",
            ModelFamily::Chain => "chain",
            ModelFamily::Star => "star",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "local" | "qubit" | "qubits" => Ok(ModelFamily::Local),
            "full_control" => Ok(ModelFamily::FullControl),
            "all_to_all" => Ok(ModelFamily::AllToAll),
            "chain" => Ok(ModelFamily::Chain),
            "star" => Ok(ModelFamily::Star),
            other => Err(Error::InvalidArgument(format!("unknown model family `{other}`"))),
        }
    }
}

/// How a series value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    /// Shot geodesic for this `N`.
    Shooting,
    /// One shot geodesic, reused for every `N` because the per-spin
    /// trajectory does not depend on `N`; the length is re-evaluated with
    /// each size's metric.
    ShootingRescaled,
    /// Constructive step protocol.
    StepProtocol,
    /// Analytic upper bound.
    Bound,
}

/// Solver details for a shot point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointDiagnostics {
    pub theta: f64,
    pub eps_hit: f64,
    pub bisections: usize,
    pub speed_spread: f64,
    pub monotone: bool,
    pub converged_brackets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub n: u64,
    pub tau_beta_w: f64,
    pub method: Method,
    pub converged: bool,
    pub diagnostics: Option<PointDiagnostics>,
    /// Error message for points that failed outright.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSeries {
    pub family: String,
    pub eps_final: f64,
    pub points: Vec<SeriesPoint>,
}

impl ScalingSeries {
    /// `(N, tau beta W)` for converged points.
    pub fn converged(&self) -> Vec<(f64, f64)> {
        self.points.iter().filter(|p| p.converged).map(|p| (p.n as f64, p.tau_beta_w)).collect()
    }

    pub fn all_converged(&self) -> bool {
        self.points.iter().all(|p| p.converged)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub exponent: f64,
    /// Largest `|fit - data| / data` over the fitted points.
    pub relative_error: f64,
    pub points: usize,
}

impl PowerLawFit {
    pub fn predict(&self, n: f64) -> f64 {
        self.alpha * n.powf(self.exponent)
    }
}

/// `n` log-spaced integers in `[lo, hi]`, strictly increasing.
pub fn log_spaced_sizes(lo: usize, hi: usize, n: usize) -> Result<Vec<usize>> {
    if lo < 1 || hi < lo || n < 1 || (n > 1 && hi - lo + 1 < n) {
        return Err(Error::InvalidArgument(format!("cannot place {n} distinct sizes in [{lo}, {hi}]")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let ratio = (hi as f64 / lo as f64).ln() / (n - 1) as f64;
    let mut out: Vec<usize> = Vec::with_capacity(n);
    for k in 0..n {
        let mut v = ((lo as f64).ln() + ratio * k as f64).exp().round() as usize;
        if let Some(&last) = out.last() {
            v = v.max(last + 1);
        }
        out.push(v);
    }
    // Pull collisions pushed past `hi` back down.
    *out.last_mut().unwrap() = hi;
    for k in (0..n - 1).rev() {
        if out[k] >= out[k + 1] {
            out[k] = out[k + 1] - 1;
        }
    }
    Ok(out)
}

pub fn default_sizes() -> Vec<usize> {
    log_spaced_sizes(DEFAULT_N_MIN, DEFAULT_N_MAX, DEFAULT_SWEEP_POINTS).expect("valid default grid")
}

/// `beta eps*` grid for the exponent study: `1, 1.5, ..., 5.5`.
pub fn default_boundary_grid() -> Vec<f64> {
    (0..10).map(|k| 1.0 + 0.5 * k as f64).collect()
}

fn check_sizes(ns: &[usize]) -> Result<()> {
    if ns.is_empty() {
        return Err(Error::InvalidArgument("empty size list".into()));
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("sizes must be strictly increasing".into()));
    }
    Ok(())
}

fn closed(n: usize, v: f64, method: Method) -> SeriesPoint {
    SeriesPoint { n: n as u64, tau_beta_w: v, method, converged: true, diagnostics: None, error: None }
}

fn shot_point(n: usize, result: Result<(GeodesicSolution, crate::geometry::ShootDiagnostics)>, units: &UnitsContext) -> SeriesPoint {
    match result {
        Ok((sol, d)) => SeriesPoint {
            n: n as u64,
            tau_beta_w: sol.report.tau_beta_w(units),
            method: Method::Shooting,
            converged: sol.converged,
            diagnostics: Some(PointDiagnostics {
                theta: d.theta,
                eps_hit: d.eps_hit,
                bisections: d.bisections,
                speed_spread: sol.speed_spread(),
                monotone: d.monotone,
                converged_brackets: d.converged_brackets,
            }),
            error: None,
        },
        Err(e) => SeriesPoint {
            n: n as u64,
            tau_beta_w: f64::NAN,
            method: Method::Shooting,
            converged: false,
            diagnostics: None,
            error: Some(e.to_string()),
        },
    }
}

/// Squared length of a stored trajectory under another model's metric,
/// integrated with the trapezoid rule on the solution's own time grid.
fn relength(model: &dyn Model, sol: &GeodesicSolution, beta: f64) -> Result<f64> {
    let t = sol.trajectory.times();
    let mut speed = Vec::with_capacity(t.len());
    for (p, v) in sol.trajectory.points().iter().zip(&sol.velocities) {
        let g = model.metric(p.params(), beta)?;
        let v = nalgebra::DVector::from_column_slice(v);
        speed.push(v.dot(&(&g * &v)).max(0.0).sqrt());
    }
    let l: f64 = (0..t.len() - 1).map(|k| 0.5 * (t[k + 1] - t[k]) * (speed[k] + speed[k + 1])).sum();
    Ok(l * l)
}

/// Minimal `tau beta W_diss` for erasure to `eps*` across system sizes.
///
/// Local and full-control values are closed forms, all-to-all values come
/// from one shot geodesic per size, the chain geodesic is shot once and
/// re-measured for every size, and the star value is the constructive step
/// protocol length `3 pi / 2`, which does not depend on `N`.
pub fn sweep_minimal_dissipation(
    family: ModelFamily,
    ns: &[usize],
    eps_final: f64,
    units: &UnitsContext,
    opts: &ShootOptions,
) -> Result<ScalingSeries> {
    check_sizes(ns)?;
    if !(eps_final > 0.0 && eps_final.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps* must be positive, got {eps_final}")));
    }
    let origin = ControlPoint::new(vec![0.0, 0.0])?;
    let target = Target { eps_final };
    let points = match family {
        ModelFamily::Local => ns.iter().map(|&n| closed(n, local_erasure_tau_beta_w(n), Method::ClosedForm)).collect(),
        ModelFamily::FullControl => ns
            .iter()
            .map(|&n| closed(n, global_erasure_length(n).powi(2), Method::ClosedForm))
            .collect(),
        ModelFamily::Star => {
            let l = 1.5 * PI;
            ns.iter().map(|&n| closed(n, l * l, Method::StepProtocol)).collect()
        }
        ModelFamily::AllToAll => {
            let mut out = Vec::with_capacity(ns.len());
            for &n in ns {
                let model = AllToAll::new(n)?;
                log::info!("all-to-all N = {n}");
                out.push(shot_point(n, shoot_geodesic(&model, &origin, target, units, opts), units));
            }
            out
        }
        ModelFamily::Chain => {
            let first = IsingChain::new(ns[0], ChainForm::Extensive)?;
            match shoot_geodesic(&first, &origin, target, units, opts) {
                Ok((sol, d)) => {
                    let mut out = Vec::with_capacity(ns.len());
                    for &n in ns {
                        let mut p = shot_point(n, Ok((sol.clone(), d.clone())), units);
                        p.method = Method::ShootingRescaled;
                        p.tau_beta_w = relength(&IsingChain::new(n, ChainForm::Extensive)?, &sol, units.beta)?;
                        out.push(p);
                    }
                    out
                }
                Err(e) => ns.iter().map(|&n| shot_point(n, Err(e.clone()), units)).collect(),
            }
        }
    };
    Ok(ScalingSeries { family: family.name().to_string(), eps_final, points })
}

/// Pyramid bound `4 (m - 1)^2 pi^2` against the total spin count for every
/// layer count in `layers`.
pub fn pyramid_series(aperture: usize, base: usize, dimension: usize, layers: &[usize]) -> Result<ScalingSeries> {
    let units = UnitsContext::default();
    let mut points = Vec::with_capacity(layers.len());
    for &m in layers {
        let b = pyramid_bound(&PyramidSpec::new(m, aperture, base, dimension)?, units.tau, units.beta)?;
        points.push(SeriesPoint {
            n: b.n_total,
            tau_beta_w: b.w_diss_bound,
            method: Method::Bound,
            converged: true,
            diagnostics: None,
            error: None,
        });
    }
    if points.windows(2).any(|w| w[1].n <= w[0].n) {
        return Err(Error::InvalidArgument("layer counts must be strictly increasing".into()));
    }
    Ok(ScalingSeries { family: format!("pyramid_d{dimension}_a{aperture}"), eps_final: f64::INFINITY, points })
}

/// Unweighted least squares of `ln W` against `ln N`.
pub fn fit_power_law_points(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData { needed: MIN_FIT_POINTS, got: points.len() });
    }
    for &(n, w) in points {
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::NonPositive(n));
        }
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::NonPositive(w));
        }
    }
    let k = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("power-law fit needs at least two distinct sizes".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let exponent = sxy / sxx;
    let alpha = (my - exponent * mx).exp();
    let relative_error = points
        .iter()
        .map(|&(n, w)| (alpha * n.powf(exponent) - w).abs() / w)
        .fold(0.0, f64::max);
    Ok(PowerLawFit { alpha, exponent, relative_error, points: points.len() })
}

/// Fits `W = alpha N^x` to the converged points of a series.
pub fn fit_power_law(series: &ScalingSeries) -> Result<PowerLawFit> {
    fit_power_law_points(&series.converged())
}

/// One power-law fit per boundary value `eps*`.
pub fn exponent_vs_boundary(
    family: ModelFamily,
    eps_list: &[f64],
    ns: &[usize],
    units: &UnitsContext,
    opts: &ShootOptions,
) -> Result<Vec<(f64, PowerLawFit)>> {
    eps_list
        .iter()
        .map(|&eps| {
            let series = sweep_minimal_dissipation(family, ns, eps, units, opts)?;
            Ok((eps, fit_power_law(&series)?))
        })
        .collect()
}
