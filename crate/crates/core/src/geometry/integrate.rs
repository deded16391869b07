use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::models::Model;
use crate::thermo::{ControlPoint, DissipationReport, Trajectory, UnitsContext};

use super::{acceleration, speed_spread, GeodesicSolution};

/// Relative speed spread tolerated for a converged solution.
pub const SPEED_TOLERANCE: f64 = 1e-4;

/// A sample of a geodesic in an affine parameter `a`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Node {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub a: f64,
}

fn rk4_affine(model: &dyn Model, x: &[f64], v: &[f64], h: f64, beta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let xv = |x: &[f64], v: &[f64]| -> Result<(DVector<f64>, DVector<f64>)> {
        Ok((DVector::from_column_slice(v), acceleration(model, x, v, beta)?))
    };
    let add = |a: &[f64], d: &DVector<f64>, s: f64| -> Vec<f64> { a.iter().zip(d.iter()).map(|(p, q)| p + s * q).collect() };
    let (k1x, k1v) = xv(x, v)?;
    let (k2x, k2v) = xv(&add(x, &k1x, 0.5 * h), &add(v, &k1v, 0.5 * h))?;
    let (k3x, k3v) = xv(&add(x, &k2x, 0.5 * h), &add(v, &k2v, 0.5 * h))?;
    let (k4x, k4v) = xv(&add(x, &k3x, h), &add(v, &k3v, h))?;
    let dx = (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
    let dv = (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
    Ok((add(x, &dx, 1.0), add(v, &dv, 1.0)))
}

/// Integrates the geodesic equation from `start` with initial velocity
/// `velocity` (per unit affine parameter) over `a in [0, 1]` using `steps`
/// classical RK4 steps, then maps `a` onto `t = a tau`.
///
/// Hitting a degenerate metric ends the integration early; the partial curve
/// is returned with `converged = false`, rescaled to `[0, tau]`.
pub fn integrate_geodesic(
    model: &dyn Model,
    start: &ControlPoint,
    velocity: &[f64],
    steps: usize,
    units: &UnitsContext,
) -> Result<GeodesicSolution> {
    let n = model.n_params();
    if start.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: start.dim() });
    }
    if velocity.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: velocity.len() });
    }
    if velocity.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("initial velocity must be finite".into()));
    }
    let steps = steps.max(1);
    let h = 1.0 / steps as f64;
    let mut nodes = vec![Node { x: start.params().to_vec(), v: velocity.to_vec(), a: 0.0 }];
    let mut complete = true;
    if velocity.iter().any(|v| *v != 0.0) {
        for k in 1..=steps {
            let last = nodes.last().unwrap();
            match rk4_affine(model, &last.x, &last.v, h, units.beta) {
                Ok((x, v)) => nodes.push(Node { x, v, a: k as f64 * h }),
                Err(Error::DegenerateMetric { condition }) => {
                    log::warn!("degenerate metric (condition {condition:e}) at a = {}", last.a);
                    complete = false;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
    } else {
        nodes.push(Node { x: start.params().to_vec(), v: velocity.to_vec(), a: 1.0 });
    }
    let mut sol = solution_from_nodes(model, &nodes, units)?;
    sol.converged &= complete;
    Ok(sol)
}

/// Builds a solution from affine-parameter samples, rescaling `a` linearly so
/// the last node sits at `t = tau`.
pub(crate) fn solution_from_nodes(model: &dyn Model, nodes: &[Node], units: &UnitsContext) -> Result<GeodesicSolution> {
    let beta = units.beta;
    let tau = units.tau;
    if nodes.len() < 2 {
        return Err(Error::InvalidArgument("geodesic needs at least two samples".into()));
    }
    let a_end = nodes.last().unwrap().a;
    let rate = a_end / tau;
    let times: Vec<f64> = nodes
        .iter()
        .enumerate()
        .map(|(k, n)| if k + 1 == nodes.len() { tau } else { n.a / rate })
        .collect();
    let points = nodes.iter().map(|n| ControlPoint::new(n.x.clone())).collect::<Result<Vec<_>>>()?;
    let trajectory = Trajectory::new(times, points)?;
    let velocities: Vec<Vec<f64>> = nodes.iter().map(|n| n.v.iter().map(|c| c * rate).collect()).collect();
    let mut speed = Vec::with_capacity(nodes.len());
    for (n, v) in nodes.iter().zip(&velocities) {
        let g = model.metric(&n.x, beta)?;
        let vv = DVector::from_column_slice(v);
        speed.push(vv.dot(&(&g * &vv)).max(0.0).sqrt());
    }
    let t = trajectory.times();
    let mut length = 0.0;
    let mut beta_w = 0.0;
    for k in 0..speed.len() - 1 {
        let dt = t[k + 1] - t[k];
        length += 0.5 * dt * (speed[k] + speed[k + 1]);
        beta_w += 0.5 * dt * (speed[k] * speed[k] + speed[k + 1] * speed[k + 1]);
    }
    let ln_z0 = model.ln_z(&nodes[0].x, beta)?;
    let ln_z1 = model.ln_z(&nodes.last().unwrap().x, beta)?;
    let report = DissipationReport::new(length, beta_w / beta, (ln_z0 - ln_z1) / beta, beta, model.n_spins());
    let converged = speed_spread(&speed) <= SPEED_TOLERANCE;
    Ok(GeodesicSolution { trajectory, velocities, report, speed_profile: speed, converged, shooting_ratio: None })
}

/// State of the march: position, affine velocity, affine parameter.
#[derive(Debug, Clone)]
pub(crate) struct MarchState {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub a: f64,
}

/// Derivative with respect to the arc length `p` of the curve `(x, a)`, so
/// `dp^2 = |dx|^2 + da^2`: `x' = v/rho`, `v' = -Gamma(v, v)/rho`, `a' = 1/rho`
/// with `rho = sqrt(|v|^2 + 1)`. Steps stay bounded both where the affine
/// velocity blows up and where the curve barely moves in control space.
fn sigma_rhs(model: &dyn Model, s: &MarchState, beta: f64) -> Result<MarchState> {
    let speed2 = s.v.iter().map(|c| c * c).sum::<f64>();
    let norm = (speed2 + 1.0).sqrt();
    if !(speed2 > 0.0) || !norm.is_finite() {
        return Err(Error::DegenerateMetric { condition: f64::INFINITY });
    }
    let acc = acceleration(model, &s.x, &s.v, beta)?;
    Ok(MarchState {
        x: s.v.iter().map(|c| c / norm).collect(),
        v: acc.iter().map(|c| c / norm).collect(),
        a: 1.0 / norm,
    })
}

fn axpy(s: &MarchState, d: &MarchState, h: f64) -> MarchState {
    MarchState {
        x: s.x.iter().zip(&d.x).map(|(p, q)| p + h * q).collect(),
        v: s.v.iter().zip(&d.v).map(|(p, q)| p + h * q).collect(),
        a: s.a + h * d.a,
    }
}

pub(crate) fn rk4_sigma(model: &dyn Model, s: &MarchState, h: f64, beta: f64) -> Result<MarchState> {
    let k1 = sigma_rhs(model, s, beta)?;
    let k2 = sigma_rhs(model, &axpy(s, &k1, 0.5 * h), beta)?;
    let k3 = sigma_rhs(model, &axpy(s, &k2, 0.5 * h), beta)?;
    let k4 = sigma_rhs(model, &axpy(s, &k3, h), beta)?;
    let mut out = s.clone();
    for i in 0..s.x.len() {
        out.x[i] += h / 6.0 * (k1.x[i] + 2.0 * k2.x[i] + 2.0 * k3.x[i] + k4.x[i]);
        out.v[i] += h / 6.0 * (k1.v[i] + 2.0 * k2.v[i] + 2.0 * k3.v[i] + k4.v[i]);
    }
    out.a += h / 6.0 * (k1.a + 2.0 * k2.a + 2.0 * k3.a + k4.a);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{full_control_geodesic_velocity, hellinger_angle};
    use crate::models::{FullControl, Gauge, Qubits};
    use approx::assert_relative_eq;

    fn gd(x: f64) -> f64 {
        2.0 * x.exp().atan() - std::f64::consts::FRAC_PI_2
    }

    #[test]
    fn zero_velocity_is_constant() {
        let q = Qubits::new(1);
        let s = integrate_geodesic(&q, &ControlPoint::new(vec![0.3]).unwrap(), &[0.0], 100, &UnitsContext::default())
            .unwrap();
        assert_eq!(s.report.length, 0.0);
        assert!(s.converged);
    }

    #[test]
    fn qubit_geodesic_follows_gudermannian() {
        // Constant speed in the angle gd(beta eps); the erasure curve
        // ln tan[pi (t + tau) / 4 tau] is the eps_f -> infinity limit.
        let q = Qubits::new(1);
        let eps_f = 6.0;
        let units = UnitsContext::default();
        let sol = integrate_geodesic(&q, &ControlPoint::new(vec![0.0]).unwrap(), &[gd(eps_f)], 4000, &units).unwrap();
        assert!(sol.converged, "spread {}", sol.speed_spread());
        for (t, p) in sol.trajectory.times().iter().zip(sol.trajectory.points()) {
            let expect = (std::f64::consts::FRAC_PI_4 + 0.5 * t * gd(eps_f)).tan().ln();
            assert!((p.params()[0] - expect).abs() < 1e-4 * expect.abs().max(1.0), "t = {t}");
        }
        assert_relative_eq!(sol.report.length, gd(eps_f), max_relative = 1e-8);
    }

    #[test]
    fn full_control_length_is_hellinger_angle() {
        let fc = FullControl::new(vec![1, 2, 1]).unwrap().with_gauge(Gauge::PinFirst);
        let p = [0.2, 0.5, 0.3];
        let q = [0.6, 0.1, 0.3];
        let (start, vel) = full_control_geodesic_velocity(&fc, &p, &q, 1.0).unwrap();
        let sol = integrate_geodesic(&fc, &start, &vel, 4000, &UnitsContext::default()).unwrap();
        let l = hellinger_angle(&p, &q).unwrap();
        assert_relative_eq!(sol.report.length, l, max_relative = 1e-6);
        let end = fc.weights(sol.final_point().params(), 1.0).unwrap().1;
        for (a, b) in end.iter().zip(q) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}
