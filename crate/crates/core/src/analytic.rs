//! Closed forms for full control.
//!
//! With every eigen-energy controllable, `2 sqrt(p)` lives on a sphere of
//! radius 2 and the thermodynamic length between two thermal states is the
//! Hellinger angle `2 arccos sum_i sqrt(p_i q_i)`. Geodesics are great circles
//! traversed at constant speed, which yields explicit state and energy
//! protocols.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::softplus;
use crate::models::{FullControl, Model};
use crate::thermo::ControlPoint;

/// Probability floor used inside logarithms of pure endpoints.
pub const PROBABILITY_FLOOR: f64 = 1e-30;

fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidArgument("empty distribution".into()));
    }
    if p.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::InvalidArgument("probabilities must be finite and non-negative".into()));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("distribution sums to {s}, not 1")));
    }
    Ok(())
}

fn check_pair(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), got: q.len() });
    }
    check_distribution(p)?;
    check_distribution(q)
}

/// `2 arccos sum_i sqrt(p_i q_i)`, evaluated as `4 asin(|sqrt p - sqrt q| / 2)`
/// which keeps full relative accuracy for nearby distributions.
pub fn hellinger_angle(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    let chord: f64 = p.iter().zip(q).map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2)).sum::<f64>().sqrt();
    Ok(4.0 * (0.5 * chord).min(1.0).asin())
}

/// Minimal dissipation `L^2 / (beta tau)` between two thermal states.
pub fn fundamental_wdiss(p: &[f64], q: &[f64], tau: f64, beta: f64) -> Result<f64> {
    if !(tau > 0.0 && beta > 0.0) {
        return Err(Error::InvalidArgument("tau and beta must be positive".into()));
    }
    let l = hellinger_angle(p, q)?;
    Ok(l * l / (beta * tau))
}

/// Length `2 arccos 2^{-N/2}` of erasing `N` maximally mixed qubits to a pure state.
pub fn global_erasure_length(n: usize) -> f64 {
    2.0 * (-0.5 * n as f64 * LN_2).exp().acos()
}

/// `tau beta W` for erasing `N` independent qubits one by one: `N pi^2 / 4`.
pub fn local_erasure_tau_beta_w(n: usize) -> f64 {
    n as f64 * PI * PI / 4.0
}

/// Great-circle geodesic between two distributions, parametrised by `t in [0, tau]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HellingerGeodesic {
    sqrt_p: Vec<f64>,
    sqrt_q: Vec<f64>,
    pub length: f64,
    pub tau: f64,
}

impl HellingerGeodesic {
    pub fn new(p: &[f64], q: &[f64], tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
        }
        let length = hellinger_angle(p, q)?;
        Ok(HellingerGeodesic {
            sqrt_p: p.iter().map(|x| x.sqrt()).collect(),
            sqrt_q: q.iter().map(|x| x.sqrt()).collect(),
            length,
            tau,
        })
    }

    /// Constant-speed interpolation weight
    /// `u(t) = (1 + tan[L (2s - 1) / 4] / tan(L / 4)) / 2` with `s = t / tau`.
    pub fn u(&self, t: f64) -> f64 {
        let s = (t / self.tau).clamp(0.0, 1.0);
        let l = self.length;
        if l == 0.0 {
            return s;
        }
        0.5 * (1.0 + (0.25 * l * (2.0 * s - 1.0)).tan() / (0.25 * l).tan())
    }

    /// Unnormalised amplitudes `(1 - u) sqrt p + u sqrt q`.
    fn amplitudes(&self, t: f64) -> Vec<f64> {
        let u = self.u(t);
        self.sqrt_p.iter().zip(&self.sqrt_q).map(|(a, b)| (1.0 - u) * a + u * b).collect()
    }

    pub fn state_at(&self, t: f64) -> Vec<f64> {
        let a = self.amplitudes(t);
        let norm: f64 = a.iter().map(|x| x * x).sum();
        a.iter().map(|x| x * x / norm).collect()
    }

    /// `beta E_i(t) = -2 ln[(1 - u) sqrt p_i + u sqrt q_i]`, shifted so the
    /// lowest level sits at 0. Evaluated in the log domain, with zero
    /// probabilities floored at [`PROBABILITY_FLOOR`].
    pub fn beta_energies_at(&self, t: f64) -> Vec<f64> {
        let u = self.u(t);
        let (lu, l1u) = (u.ln(), (1.0 - u).ln());
        let floor = 0.5 * PROBABILITY_FLOOR.ln();
        let half_ln = |x: f64| if x > 0.0 { x.ln() } else { floor };
        let e: Vec<f64> = self
            .sqrt_p
            .iter()
            .zip(&self.sqrt_q)
            .map(|(a, b)| {
                let (x, y) = (l1u + half_ln(*a), lu + half_ln(*b));
                let m = x.max(y);
                let lse = if m == f64::NEG_INFINITY { floor } else { m + softplus(x.min(y) - m) };
                -2.0 * lse
            })
            .collect();
        let min = e.iter().copied().fold(f64::INFINITY, f64::min);
        e.iter().map(|x| x - min).collect()
    }

    /// Same as [`Self::state_at`] via the closed form
    /// `(sin[L (1 - s) / 2] sqrt p + sin[L s / 2] sqrt q)^2 / sin^2(L / 2)`.
    pub fn state_at_sine_form(&self, t: f64) -> Vec<f64> {
        let s = t / self.tau;
        let l = self.length;
        let (a, b, d) = ((0.5 * l * (1.0 - s)).sin(), (0.5 * l * s).sin(), (0.5 * l).sin());
        self.sqrt_p.iter().zip(&self.sqrt_q).map(|(x, y)| ((a * x + b * y) / d).powi(2)).collect()
    }
}

/// Sampled full-control protocol: states and `beta`-scaled energies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullControlProtocol {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub beta_energies: Vec<Vec<f64>>,
    pub length: f64,
}

/// The explicit geodesic between thermal states `p` and `q` on `grid + 1`
/// uniform samples of `[0, tau]`.
pub fn full_control_geodesic(p: &[f64], q: &[f64], tau: f64, grid: usize) -> Result<FullControlProtocol> {
    check_pair(p, q)?;
    let pure = |x: &[f64]| x.iter().filter(|v| **v > 0.0).count() == 1;
    let overlap: f64 = p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum();
    if pure(p) && pure(q) && overlap == 0.0 {
        return Err(Error::UndefinedGeodesic);
    }
    let geo = HellingerGeodesic::new(p, q, tau)?;
    let grid = grid.max(1);
    let times: Vec<f64> = (0..=grid).map(|k| tau * k as f64 / grid as f64).collect();
    Ok(FullControlProtocol {
        states: times.iter().map(|&t| geo.state_at(t)).collect(),
        beta_energies: times.iter().map(|&t| geo.beta_energies_at(t)).collect(),
        times,
        length: geo.length,
    })
}

/// Start point and initial velocity (per unit affine parameter on `[0, 1]`)
/// of the full-control geodesic from level distribution `p` to `q`.
///
/// Energies follow `beta g_i(s) = ln m_i - 2 ln[A(s) sqrt p_i + B(s) sqrt q_i]`
/// with `A = sin(L(1-s)/2) / sin(L/2)` and `B = sin(Ls/2) / sin(L/2)`.
pub fn full_control_geodesic_velocity(
    model: &FullControl,
    p: &[f64],
    q: &[f64],
    beta: f64,
) -> Result<(ControlPoint, Vec<f64>)> {
    check_pair(p, q)?;
    if p.len() != model.n_levels() {
        return Err(Error::DimensionMismatch { expected: model.n_levels(), got: p.len() });
    }
    if p.iter().any(|x| *x <= 0.0) {
        return Err(Error::Domain("initial distribution must be strictly positive".into()));
    }
    let l = hellinger_angle(p, q)?;
    let (da, db) = if l < 1e-12 {
        (0.0, 0.0)
    } else {
        (-0.5 * l * (0.5 * l).cos() / (0.5 * l).sin(), 0.5 * l / (0.5 * l).sin())
    };
    let mult = model.multiplicities();
    let energies: Vec<f64> = p.iter().zip(mult).map(|(pi, &m)| ((m as f64).ln() - pi.ln()) / beta).collect();
    let vel: Vec<f64> = p
        .iter()
        .zip(q)
        .map(|(pi, qi)| -2.0 / beta * (da * pi.sqrt() + db * qi.sqrt()) / pi.sqrt())
        .collect();
    let start = ControlPoint::new(model.params_from_energies(&energies)?)?;
    // Velocities transform like energy differences under the gauge.
    let v = match model.n_params() == model.n_levels() {
        true => vel,
        false => vel[1..].iter().map(|x| x - vel[0]).collect(),
    };
    debug_assert_eq!(v.len(), model.n_params());
    Ok((start, v))
}

/// `beta gamma(t)` of the N-body erasure protocol in its large-`N` form,
/// `2 ln[1 + 2^{N/2} sin(pi t / 2 tau) / sin(pi (tau - t) / 2 tau)]`.
pub fn nbody_gamma(t: f64, tau: f64, n: usize) -> Result<f64> {
    nbody_gamma_with_length(t, tau, n, PI)
}

/// Same protocol with the finite-`N` length `L = 2 arccos 2^{-N/2}` in place
/// of `pi`; this is the exact constant-speed geodesic.
pub fn nbody_gamma_exact(t: f64, tau: f64, n: usize) -> Result<f64> {
    nbody_gamma_with_length(t, tau, n, global_erasure_length(n))
}

fn nbody_gamma_with_length(t: f64, tau: f64, n: usize, l: f64) -> Result<f64> {
    if !(tau > 0.0) || !(0.0..=tau).contains(&t) {
        return Err(Error::InvalidArgument(format!("t must lie in [0, tau], got t = {t}, tau = {tau}")));
    }
    if t == tau {
        return Err(Error::EndpointDivergence);
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let s = t / tau;
    let x = 0.5 * n as f64 * LN_2 + (0.5 * l * s).sin().ln() - (0.5 * l * (1.0 - s)).sin().ln();
    Ok(2.0 * softplus(x))
}

/// Microstate `beta` energies (indexed by excitation bitmask, `E(empty) = 0`)
/// of the `N`-body protocol with coupling `beta gamma`: every non-empty
/// excitation pattern sits at `gamma`.
pub fn nbody_energies(n: usize, beta_gamma: f64) -> Vec<f64> {
    (0..1usize << n).map(|m| if m == 0 { 0.0 } else { beta_gamma }).collect()
}

/// Microstate `beta` energies along the full-control erasure geodesic from
/// the product state with excitation probabilities `excitation[i]` to the
/// pure all-ground state, at fraction `s = t / tau`. Indexed by bitmask of
/// excited spins and gauged to `E(empty) = 0`.
pub fn erasure_energies(excitation: &[f64], s: f64) -> Result<Vec<f64>> {
    let n = excitation.len();
    if n == 0 || n > 24 {
        return Err(Error::InvalidArgument(format!("erasure energies need 1..=24 spins, got {n}")));
    }
    if excitation.iter().any(|x| !(*x > 0.0 && *x < 1.0)) {
        return Err(Error::Domain("excitation probabilities must lie in (0, 1)".into()));
    }
    let p: Vec<f64> = (0..1usize << n)
        .map(|m| (0..n).map(|i| if m >> i & 1 == 1 { excitation[i] } else { 1.0 - excitation[i] }).product())
        .collect();
    let mut q = vec![0.0; p.len()];
    q[0] = 1.0;
    let geo = HellingerGeodesic::new(&p, &q, 1.0)?;
    let mut e = geo.beta_energies_at(s);
    let e0 = e[0];
    for x in e.iter_mut() {
        *x -= e0;
    }
    Ok(e)
}

/// Coefficients `c_S` of products of excitation projectors over spin subsets.
///
/// `E(T) = sum_{S subset T} c_S`; inverting over the subset lattice gives
/// `c_S = sum_{T subset S} (-1)^{|S| - |T|} E(T)`. Subsets are bitmasks and
/// `c_empty` is the constant offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionDecomposition {
    pub n: usize,
    pub coefficients: Vec<f64>,
}

pub fn interaction_decompose(n: usize, energies: &[f64]) -> Result<InteractionDecomposition> {
    if n > 30 {
        return Err(Error::InvalidArgument(format!("too many spins for subset enumeration: {n}")));
    }
    let size = 1usize << n;
    if energies.len() != size {
        return Err(Error::MissingSubsets { expected: size, got: energies.len() });
    }
    let mut c = energies.to_vec();
    for i in 0..n {
        let bit = 1 << i;
        for m in 0..size {
            if m & bit != 0 {
                c[m] -= c[m ^ bit];
            }
        }
    }
    Ok(InteractionDecomposition { n, coefficients: c })
}

impl InteractionDecomposition {
    pub fn coefficient(&self, subset: usize) -> f64 {
        self.coefficients[subset]
    }

    pub fn offset(&self) -> f64 {
        self.coefficients[0]
    }

    /// Energies `E(T) = sum_{S subset T} c_S` for every subset.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut e = self.coefficients.clone();
        for i in 0..self.n {
            let bit = 1 << i;
            for m in 0..e.len() {
                if m & bit != 0 {
                    e[m] += e[m ^ bit];
                }
            }
        }
        e
    }

    /// `max_S |c_S|` over subsets of each size `k = 0..=n`.
    pub fn max_abs_by_order(&self) -> Vec<f64> {
        let mut out = vec![0.0f64; self.n + 1];
        for (m, c) in self.coefficients.iter().enumerate() {
            let k = m.count_ones() as usize;
            out[k] = out[k].max(c.abs());
        }
        out
    }

    /// `(min, max)` of `c_S` over subsets of size `k`.
    pub fn range_of_order(&self, k: usize) -> (f64, f64) {
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(m, _)| m.count_ones() as usize == k)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, c)| (lo.min(*c), hi.max(*c)))
    }
}

/// Number of distinct `(p_i, q_i)` pairs, up to `tol`.
pub fn distinct_boundary_pairs(p: &[f64], q: &[f64], tol: f64) -> usize {
    let pairs: Vec<(f64, f64)> = p.iter().copied().zip(q.iter().copied()).collect();
    count_distinct(&pairs, |a, b| (a.0 - b.0).abs() <= tol && (a.1 - b.1).abs() <= tol)
}

/// Number of distinct energy trajectories of a sampled protocol, up to `tol`.
pub fn distinct_energy_trajectories(protocol: &FullControlProtocol, tol: f64) -> usize {
    let levels = protocol.beta_energies[0].len();
    let traj: Vec<Vec<f64>> = (0..levels).map(|i| protocol.beta_energies.iter().map(|e| e[i]).collect()).collect();
    count_distinct(&traj, |a, b| a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= tol))
}

fn count_distinct<T>(items: &[T], same: impl Fn(&T, &T) -> bool) -> usize {
    let mut reps: Vec<&T> = Vec::new();
    for it in items {
        if !reps.iter().any(|r| same(r, it)) {
            reps.push(it);
        }
    }
    reps.len()
}

/// Pure final states need infinite fields, so erasure protocols are
/// tabulated up to this fraction of `tau`.
pub const TABULATION_END: f64 = 1.0 - 1e-6;

/// Convenience for models: `beta`-independent Hellinger distance between the
/// thermal states of a model at two points.
pub fn thermal_hellinger(model: &dyn Model, a: &ControlPoint, b: &ControlPoint, beta: f64) -> Result<f64> {
    let units = crate::thermo::UnitsContext::new(beta, 1.0)?;
    let p = crate::thermo::thermal_state(model, a, &units)?;
    let q = crate::thermo::thermal_state(model, b, &units)?;
    hellinger_angle(&p.probs, &q.probs)
}
