//! Shooting solver for erasure boundary conditions.
//!
//! A two-parameter model `(eps, J)` starts at `start` and must end on the
//! section `J = 0` at `eps = eps*`. Each trial fixes the initial direction
//! `(cos theta, sin theta)` and marches the geodesic until it returns to `J = 0`; the hit value `eps_hit(theta)` is then
//! bracketed by a scan and refined by bisection. One-parameter models shoot
//! straight at `eps = eps*`.
//!
//! The march uses the arc length of the curve `(x, a)` with `a` the affine
//! parameter. This keeps the step bounded in control space when the metric
//! nearly degenerates and the affine velocity grows without bound, while
//! still resolving the slow stretches that dominate the elapsed time.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Model;
use crate::thermo::{ControlPoint, Trajectory, UnitsContext};

use super::integrate::{rk4_sigma, solution_from_nodes, MarchState, Node};
use super::GeodesicSolution;

/// Partial boundary condition at `t = tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    /// Final field `eps*`; for two-parameter models also `J(tau) = 0`.
    pub eps_final: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShootOptions {
    /// RK4 steps per `eps* + margin` of march length.
    pub steps: usize,
    /// Scan points per half-range of the direction angle.
    pub scan: usize,
    /// Trials leaving `eps > eps* + margin` count as overshooting.
    pub margin: f64,
    /// Trials leaving `|J| > j_max` count as overshooting.
    pub j_max: f64,
    /// March-length budget in multiples of `eps* + margin`.
    pub sigma_budget: f64,
    /// Convergence threshold on `|eps_hit - eps*|`.
    pub tolerance: f64,
    pub max_bisections: usize,
    /// Scan intervals whose `eps_hit` values differ by more than this
    /// multiple of `max(eps*, 1)` are subdivided.
    pub refine_jump: f64,
    pub refine_splits: usize,
    pub refine_depth: usize,
}

impl Default for ShootOptions {
    fn default() -> Self {
        ShootOptions {
            steps: 4000,
            scan: 64,
            margin: 1.5,
            j_max: 10.0,
            sigma_budget: 20.0,
            tolerance: 1e-6,
            max_bisections: 200,
            refine_jump: 0.25,
            refine_splits: 8,
            refine_depth: 3,
        }
    }
}

/// Result of a single trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ShotOutcome {
    Hit { eps: f64 },
    /// Left the box, met a degenerate metric or ran out of budget; treated
    /// as overshooting the target.
    Aborted,
}

impl ShotOutcome {
    /// `eps_hit`, with aborted trials mapped to `+inf`.
    pub fn value(&self) -> f64 {
        match self {
            ShotOutcome::Hit { eps } => *eps,
            ShotOutcome::Aborted => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootDiagnostics {
    /// `(theta, eps_hit)` for every scan trial, ordered by angle.
    pub scan: Vec<(f64, f64)>,
    /// Brackets `(theta_a, theta_b)` with a sign change of `eps_hit - eps*`.
    pub brackets: Vec<(f64, f64)>,
    /// Angle of the accepted solution.
    pub theta: f64,
    pub bisections: usize,
    pub eps_hit: f64,
    /// Whether finite `eps_hit` values are monotone in the angle between
    /// `theta = 0` and the accepted bracket.
    pub monotone: bool,
    /// Number of brackets that converged; more than one triggers the
    /// shortest-length tie-break.
    pub converged_brackets: usize,
}

struct Problem<'a> {
    model: &'a dyn Model,
    start: Vec<f64>,
    eps_final: f64,
    opts: ShootOptions,
    beta: f64,
}

impl Problem<'_> {
    fn h(&self) -> f64 {
        (self.eps_final + self.opts.margin) / self.opts.steps as f64
    }

    fn sigma_max(&self) -> f64 {
        self.opts.sigma_budget * (self.eps_final + self.opts.margin)
    }

    fn two_param(&self) -> bool {
        self.start.len() == 2
    }

    fn event(&self, x: &[f64]) -> f64 {
        if self.two_param() {
            x[1]
        } else {
            x[0] - self.eps_final
        }
    }

    fn out_of_box(&self, x: &[f64]) -> bool {
        x[0] > self.eps_final + self.opts.margin || (self.two_param() && x[1].abs() > self.opts.j_max)
    }

    fn direction(&self, theta: f64) -> Vec<f64> {
        if self.two_param() {
            vec![theta.cos(), theta.sin()]
        } else {
            vec![if theta.cos() >= 0.0 { 1.0 } else { -1.0 }]
        }
    }

    /// Marches one trial; returns the outcome and, if requested, the samples.
    fn march(&self, theta: f64, record: bool) -> (ShotOutcome, Vec<Node>) {
        let mut s = MarchState { x: self.start.clone(), v: self.direction(theta), a: 0.0 };
        let mut nodes = Vec::new();
        let push = |nodes: &mut Vec<Node>, s: &MarchState| {
            if record {
                nodes.push(Node { x: s.x.clone(), v: s.v.clone(), a: s.a });
            }
        };
        push(&mut nodes, &s);
        let h = self.h();
        let max_steps = (self.sigma_max() / h).ceil() as usize;
        // `signum` maps 0 to +1, so a start on the section defers the choice.
        let e0 = self.event(&s.x);
        let mut reference = if e0 == 0.0 { 0.0 } else { e0.signum() };
        for _ in 0..max_steps {
            let next = match rk4_sigma(self.model, &s, h, self.beta) {
                Ok(n) => n,
                Err(_) => return (ShotOutcome::Aborted, nodes),
            };
            let g = self.event(&next.x);
            if reference == 0.0 {
                reference = if g == 0.0 { 0.0 } else { g.signum() };
            } else if g * reference <= 0.0 {
                match self.localize(&s, h, reference) {
                    Some(hit) => {
                        let eps = hit.x[0];
                        if record {
                            let gap = hit.a - s.a;
                            if gap <= 1e-12 * h.max(s.a) {
                                nodes.pop();
                            }
                            push(&mut nodes, &hit);
                        }
                        return (ShotOutcome::Hit { eps }, nodes);
                    }
                    None => return (ShotOutcome::Aborted, nodes),
                }
            }
            if self.out_of_box(&next.x) {
                return (ShotOutcome::Aborted, nodes);
            }
            s = next;
            push(&mut nodes, &s);
        }
        (ShotOutcome::Aborted, nodes)
    }

    /// Locates the event inside the step from `s` by regula falsi (Illinois
    /// variant) on partial RK4 steps.
    fn localize(&self, s: &MarchState, h: f64, reference: f64) -> Option<MarchState> {
        let (mut lo, mut hi) = (0.0, h);
        let mut g_lo = self.event(&s.x) * reference;
        let mut best = rk4_sigma(self.model, s, h, self.beta).ok()?;
        let mut g_hi = self.event(&best.x) * reference;
        let mut side = 0i8;
        for _ in 0..80 {
            let mut d = if g_lo != g_hi { lo + (hi - lo) * g_lo / (g_lo - g_hi) } else { 0.5 * (lo + hi) };
            if !(d > lo && d < hi) {
                d = 0.5 * (lo + hi);
            }
            let trial = rk4_sigma(self.model, s, d, self.beta).ok()?;
            let g = self.event(&trial.x) * reference;
            best = trial;
            if g.abs() < 1e-14 || hi - lo < 1e-15 * h.max(1.0) {
                break;
            }
            if g > 0.0 {
                lo = d;
                g_lo = g;
                if side == 1 {
                    g_hi *= 0.5;
                }
                side = 1;
            } else {
                hi = d;
                g_hi = g;
                if side == -1 {
                    g_lo *= 0.5;
                }
                side = -1;
            }
        }
        Some(best)
    }

    fn value(&self, theta: f64) -> f64 {
        self.march(theta, false).0.value()
    }
}

struct Candidate {
    theta: f64,
    eps: f64,
    bisections: usize,
    solution: GeodesicSolution,
}

/// Solves the erasure boundary-value problem by shooting.
///
/// Scans the initial direction angle over both half-ranges `(-pi/2, 0)` and
/// `(0, pi/2)`, brackets every sign change of `eps_hit - eps*`, bisects each
/// bracket and keeps the shortest converged geodesic.
pub fn shoot_geodesic(
    model: &dyn Model,
    start: &ControlPoint,
    target: Target,
    units: &UnitsContext,
    opts: &ShootOptions,
) -> Result<(GeodesicSolution, ShootDiagnostics)> {
    let n = model.n_params();
    if n != 1 && n != 2 {
        return Err(Error::InvalidArgument(format!(
            "shooting supports one- or two-parameter models, got {n} parameters"
        )));
    }
    if start.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: start.dim() });
    }
    if !(target.eps_final.is_finite() && target.eps_final >= 0.0) {
        return Err(Error::InvalidArgument(format!("eps* must be finite and >= 0, got {}", target.eps_final)));
    }
    if opts.steps == 0 || opts.scan < 2 {
        return Err(Error::InvalidArgument("steps must be positive and scan at least 2".into()));
    }
    let problem = Problem { model, start: start.params().to_vec(), eps_final: target.eps_final, opts: *opts, beta: units.beta };

    if start.params().iter().all(|x| *x == 0.0) && target.eps_final == 0.0 {
        let pts = vec![start.clone(), start.clone()];
        let traj = Trajectory::new(vec![0.0, units.tau], pts)?;
        let report = crate::thermo::DissipationReport::new(0.0, 0.0, 0.0, units.beta, model.n_spins());
        let sol = GeodesicSolution {
            trajectory: traj,
            velocities: vec![vec![0.0; n]; 2],
            report,
            speed_profile: vec![0.0, 0.0],
            converged: true,
            shooting_ratio: None,
        };
        let diag = ShootDiagnostics {
            scan: vec![],
            brackets: vec![],
            theta: 0.0,
            bisections: 0,
            eps_hit: 0.0,
            monotone: true,
            converged_brackets: 1,
        };
        return Ok((sol, diag));
    }

    if n == 1 {
        return shoot_one_dimensional(&problem, units);
    }

    let half = std::f64::consts::FRAC_PI_2;
    let m = opts.scan;
    // Angles moving outward from theta = 0 in each half-range.
    let halves: Vec<Vec<f64>> = [-1.0, 1.0]
        .iter()
        .map(|sign| (1..=m).map(|i| sign * half * i as f64 / (m + 1) as f64).collect())
        .collect();
    // Each half is refined where the map jumps, which is where narrow
    // excursions past the target hide between coarse samples.
    let jump = opts.refine_jump * eps_scale(target.eps_final);
    let sampled: Vec<Vec<(f64, f64)>> = halves.iter().map(|angles| refine_scan(&problem, angles, jump)).collect();
    let eps = target.eps_final;
    let mut scan: Vec<(f64, f64)> = sampled.iter().flatten().copied().collect();
    scan.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut brackets = Vec::new();
    let mut bracket_half = Vec::new();
    for (h, pts) in sampled.iter().enumerate() {
        for i in 0..pts.len() - 1 {
            let (fa, fb) = (pts[i].1 - eps, pts[i + 1].1 - eps);
            if fa.signum() != fb.signum() {
                brackets.push((pts[i].0, pts[i + 1].0));
                bracket_half.push((h, i));
            }
        }
    }
    if brackets.is_empty() {
        let finite: Vec<f64> = scan.iter().map(|p| p.1).filter(|v| v.is_finite()).collect();
        let range = if finite.is_empty() {
            "no trial returned to the section".to_string()
        } else {
            let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            format!("returned eps in [{lo:.6}, {hi:.6}] over {} of {} trials", finite.len(), scan.len())
        };
        return Err(Error::TargetUnreachable(format!("eps* = {eps}: {range}")));
    }

    let candidates: Vec<Option<Candidate>> = brackets
        .par_iter()
        .map(|&(a, b)| bisect(&problem, a, b, units))
        .collect::<Result<Vec<_>>>()?;
    let converged_brackets = candidates.iter().filter(|c| c.is_some()).count();
    let best_idx = candidates
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.as_ref().map(|c| (i, c.solution.report.length)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i);
    let Some(best_idx) = best_idx else {
        return Err(Error::TargetUnreachable(format!(
            "eps* = {eps}: {} bracket(s) found but none converged (discontinuous shooting map)",
            brackets.len()
        )));
    };
    if converged_brackets > 1 {
        log::warn!("{converged_brackets} shooting brackets converged; keeping the shortest geodesic");
    }
    let (h, idx) = bracket_half[best_idx];
    let monotone = is_monotone(sampled[h][..=idx + 1].iter().map(|p| p.1).filter(|v| v.is_finite()));
    if !monotone {
        log::warn!("shooting map not monotone between theta = 0 and the accepted bracket");
    }
    let c = candidates.into_iter().nth(best_idx).flatten().unwrap();
    let diag = ShootDiagnostics {
        scan,
        brackets,
        theta: c.theta,
        bisections: c.bisections,
        eps_hit: c.eps,
        monotone,
        converged_brackets,
    };
    Ok((c.solution, diag))
}

fn eps_scale(eps_final: f64) -> f64 {
    eps_final.max(1.0)
}

/// Samples `angles` (ordered outward from 0) and repeatedly subdivides every
/// interval whose values differ by more than `jump` or straddle an abort.
fn refine_scan(problem: &Problem, angles: &[f64], jump: f64) -> Vec<(f64, f64)> {
    let values: Vec<f64> = angles.par_iter().map(|&th| problem.value(th)).collect();
    let mut pts: Vec<(f64, f64)> = angles.iter().copied().zip(values).collect();
    let splits = problem.opts.refine_splits;
    for _ in 0..problem.opts.refine_depth {
        let rough: Vec<usize> = (0..pts.len() - 1)
            .filter(|&i| {
                let (a, b) = (pts[i].1, pts[i + 1].1);
                a.is_finite() != b.is_finite() || (a.is_finite() && (a - b).abs() > jump)
            })
            .collect();
        if rough.is_empty() || splits < 2 {
            break;
        }
        let new_angles: Vec<f64> = rough
            .iter()
            .flat_map(|&i| {
                let (a, b) = (pts[i].0, pts[i + 1].0);
                (1..splits).map(move |k| a + (b - a) * k as f64 / splits as f64)
            })
            .collect();
        let new_vals: Vec<f64> = new_angles.par_iter().map(|&th| problem.value(th)).collect();
        pts.extend(new_angles.into_iter().zip(new_vals));
        pts.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()));
    }
    pts
}

fn is_monotone<I: Iterator<Item = f64>>(it: I) -> bool {
    let v: Vec<f64> = it.collect();
    v.windows(2).all(|w| w[1] >= w[0]) || v.windows(2).all(|w| w[1] <= w[0])
}

fn bisect(problem: &Problem, a: f64, b: f64, units: &UnitsContext) -> Result<Option<Candidate>> {
    let eps = problem.eps_final;
    let (mut lo, mut hi) = (a, b);
    let mut f_lo = problem.value(lo) - eps;
    let mut best: Option<(f64, f64)> = None;
    let mut iters = 0;
    for _ in 0..problem.opts.max_bisections {
        iters += 1;
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let f = problem.value(mid) - eps;
        if f.is_finite() && best.is_none_or(|(_, fb)| f.abs() < fb.abs()) {
            best = Some((mid, f));
        }
        if best.is_some_and(|(_, fb)| fb.abs() < 1e-3 * problem.opts.tolerance) {
            break;
        }
        if f.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f;
        } else {
            hi = mid;
        }
    }
    let Some((theta, f)) = best else { return Ok(None) };
    if f.abs() >= problem.opts.tolerance {
        return Ok(None);
    }
    let (outcome, nodes) = problem.march(theta, true);
    let ShotOutcome::Hit { eps: eps_hit } = outcome else { return Ok(None) };
    let mut solution = solution_from_nodes(problem.model, &nodes, units)?;
    solution.shooting_ratio = Some(theta.cos() / theta.sin());
    Ok(Some(Candidate { theta, eps: eps_hit, bisections: iters, solution }))
}

fn shoot_one_dimensional(problem: &Problem, units: &UnitsContext) -> Result<(GeodesicSolution, ShootDiagnostics)> {
    let dir = if problem.eps_final >= problem.start[0] { 0.0 } else { std::f64::consts::PI };
    let (outcome, nodes) = problem.march(dir, true);
    let ShotOutcome::Hit { eps } = outcome else {
        return Err(Error::TargetUnreachable(format!("eps* = {} not reached", problem.eps_final)));
    };
    let solution = solution_from_nodes(problem.model, &nodes, units)?;
    let diag = ShootDiagnostics {
        scan: vec![(dir, eps)],
        brackets: vec![],
        theta: dir,
        bisections: 0,
        eps_hit: eps,
        monotone: true,
        converged_brackets: 1,
    };
    Ok((solution, diag))
}
