//! Step protocols on conditional distributions.
//!
//! A joint distribution `p(i_1, ..., i_m) = p1(i_1) p2(i_2|i_1) ... pm(i_m|i_{m-1})`
//! splits its Fisher form into one term per factor, each conditional weighted
//! by the marginal of the index it conditions on. Moving a conditional row
//! whose conditioning index has zero weight is free, which is what the step
//! protocols below exploit.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::analytic::{hellinger_angle, HellingerGeodesic};
use crate::error::{Error, Result};
use crate::models::{Model, PyramidSpec, Star};

const NORMALIZATION_TOLERANCE: f64 = 1e-12;
const TANGENT_TOLERANCE: f64 = 1e-12;

/// Markov chain of conditional factors. `conditionals[l][a][b]` is the
/// probability of `i_{l+2} = b` given `i_{l+1} = a`. A factor whose rows are
/// all equal is independent of the previous index (a spectator).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalChain {
    marginal: Vec<f64>,
    conditionals: Vec<Vec<Vec<f64>>>,
}

fn check_row(row: &[f64], what: &str) -> Result<()> {
    if row.is_empty() {
        return Err(Error::InvalidArgument(format!("{what} is empty")));
    }
    if row.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidArgument(format!("{what} has a negative or non-finite entry")));
    }
    let s: f64 = row.iter().sum();
    if (s - 1.0).abs() > NORMALIZATION_TOLERANCE * row.len() as f64 {
        return Err(Error::InvalidArgument(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

impl ConditionalChain {
    pub fn new(marginal: Vec<f64>, conditionals: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        check_row(&marginal, "marginal")?;
        let mut prev = marginal.len();
        for (l, c) in conditionals.iter().enumerate() {
            if c.len() != prev {
                return Err(Error::DimensionMismatch { expected: prev, got: c.len() });
            }
            let width = c[0].len();
            for (a, row) in c.iter().enumerate() {
                if row.len() != width {
                    return Err(Error::DimensionMismatch { expected: width, got: row.len() });
                }
                check_row(row, &format!("factor {} row {a}", l + 2))?;
            }
            prev = width;
        }
        Ok(ConditionalChain { marginal, conditionals })
    }

    /// `p1(i_1) p2(i_2|i_1) p3(i_3)` with an independent spectator factor.
    pub fn with_spectator(marginal: Vec<f64>, conditional: Vec<Vec<f64>>, spectator: Vec<f64>) -> Result<Self> {
        let rows = conditional.first().map_or(0, |r| r.len());
        ConditionalChain::new(marginal, vec![conditional, vec![spectator; rows]])
    }

    /// Thermal state of the star model, with the central spin as `i_1` and
    /// the outer configuration (bit `k` set when outer spin `k` points up)
    /// as `i_2`. Index 0 is spin down, the ground state for positive fields.
    pub fn star_thermal(star: &Star, point: &[f64], beta: f64) -> Result<Self> {
        let n_outer = star.n_spins().unwrap_or(1) - 1;
        if n_outer > 20 {
            return Err(Error::InvalidArgument(format!("explicit star state limited to 21 spins, got {}", n_outer + 1)));
        }
        let log_z = star.ln_z(point, beta)?;
        let (eps, eps1, j) = (point[0], point[1], point[2]);
        let outer = |field: f64| -> Vec<f64> {
            let up = crate::jet::logistic(-2.0 * beta * field);
            (0..1usize << n_outer)
                .map(|m| {
                    let k = m.count_ones() as i32;
                    up.powi(k) * (1.0 - up).powi(n_outer as i32 - k)
                })
                .collect()
        };
        let ln_up = -beta * eps + n_outer as f64 * crate::jet::ln_2cosh(beta * (eps1 + j));
        let p_up = (ln_up - log_z).exp();
        ConditionalChain::new(vec![1.0 - p_up, p_up], vec![vec![outer(eps1 - j), outer(eps1 + j)]])
    }

    pub fn marginal(&self) -> &[f64] {
        &self.marginal
    }

    pub fn conditionals(&self) -> &[Vec<Vec<f64>>] {
        &self.conditionals
    }

    pub fn depth(&self) -> usize {
        self.conditionals.len() + 1
    }

    /// Block sizes `(|i_1|, ..., |i_m|)`.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.marginal.len()];
        s.extend(self.conditionals.iter().map(|c| c[0].len()));
        s
    }

    /// Marginal distribution of `i_level` (0-based).
    pub fn marginal_of(&self, level: usize) -> Vec<f64> {
        let mut m = self.marginal.clone();
        for c in &self.conditionals[..level] {
            let width = c[0].len();
            let mut next = vec![0.0; width];
            for (a, w) in m.iter().enumerate() {
                for (b, p) in c[a].iter().enumerate() {
                    next[b] += w * p;
                }
            }
            m = next;
        }
        m
    }

    /// Joint distribution, flattened with the last index fastest.
    pub fn joint(&self) -> Vec<f64> {
        let mut joint: Vec<(usize, f64)> = self.marginal.iter().copied().enumerate().collect();
        for c in &self.conditionals {
            joint = joint
                .iter()
                .flat_map(|&(a, w)| c[a].iter().enumerate().map(move |(b, p)| (b, w * p)))
                .collect();
        }
        joint.into_iter().map(|(_, w)| w).collect()
    }

    fn factor(&self, f: Factor) -> &[f64] {
        match f {
            Factor::Marginal => &self.marginal,
            Factor::Conditional { level, given } => &self.conditionals[level - 1][given],
        }
    }

    fn set_factor(&mut self, f: Factor, values: Vec<f64>) {
        match f {
            Factor::Marginal => self.marginal = values,
            Factor::Conditional { level, given } => self.conditionals[level - 1][given] = values,
        }
    }

    /// Weight of a factor in the Fisher decomposition.
    fn weight(&self, f: Factor) -> f64 {
        match f {
            Factor::Marginal => 1.0,
            Factor::Conditional { level, given } => self.marginal_of(level - 1)[given],
        }
    }
}

/// Tangent vector to a [`ConditionalChain`]: every block sums to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDifferential {
    pub marginal: Vec<f64>,
    pub conditionals: Vec<Vec<Vec<f64>>>,
}

impl ChainDifferential {
    pub fn zeros(chain: &ConditionalChain) -> Self {
        ChainDifferential {
            marginal: vec![0.0; chain.marginal.len()],
            conditionals: chain.conditionals.iter().map(|c| c.iter().map(|r| vec![0.0; r.len()]).collect()).collect(),
        }
    }

    fn check(&self, chain: &ConditionalChain) -> Result<()> {
        let tangent = |row: &[f64], block: String| -> Result<()> {
            let s: f64 = row.iter().sum();
            let scale = row.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            if s.abs() > TANGENT_TOLERANCE * scale * row.len() as f64 {
                return Err(Error::NotTangent { block, sum: s });
            }
            Ok(())
        };
        if self.marginal.len() != chain.marginal.len() {
            return Err(Error::DimensionMismatch { expected: chain.marginal.len(), got: self.marginal.len() });
        }
        if self.conditionals.len() != chain.conditionals.len() {
            return Err(Error::DimensionMismatch { expected: chain.conditionals.len(), got: self.conditionals.len() });
        }
        tangent(&self.marginal, "marginal".into())?;
        for (l, (dc, c)) in self.conditionals.iter().zip(&chain.conditionals).enumerate() {
            if dc.len() != c.len() {
                return Err(Error::DimensionMismatch { expected: c.len(), got: dc.len() });
            }
            for (a, (dr, r)) in dc.iter().zip(c).enumerate() {
                if dr.len() != r.len() {
                    return Err(Error::DimensionMismatch { expected: r.len(), got: dr.len() });
                }
                tangent(dr, format!("factor {} row {a}", l + 2))?;
            }
        }
        Ok(())
    }
}

/// Both sides of the Fisher decomposition for one tangent vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherQuadratic {
    /// `sum dp^2 / p` over the joint distribution.
    pub joint: f64,
    /// One term per factor, each conditional weighted by its marginal.
    pub terms: Vec<f64>,
}

impl FisherQuadratic {
    pub fn decomposed(&self) -> f64 {
        self.terms.iter().sum()
    }
}

/// `dp^2 / p` with `0^2 / 0 = 0`.
fn fisher_term(dp: f64, p: f64) -> f64 {
    if dp == 0.0 {
        0.0
    } else if p == 0.0 {
        f64::INFINITY
    } else {
        dp * dp / p
    }
}

/// Evaluates the Fisher quadratic form of `diff` at `chain`, directly on the
/// joint distribution and factor by factor.
pub fn fisher_quadratic(chain: &ConditionalChain, diff: &ChainDifferential) -> Result<FisherQuadratic> {
    diff.check(chain)?;
    // Forward pass carrying (last index, p, dp) over all joint outcomes.
    let mut states: Vec<(usize, f64, f64)> =
        chain.marginal.iter().zip(&diff.marginal).enumerate().map(|(a, (p, d))| (a, *p, *d)).collect();
    for (c, dc) in chain.conditionals.iter().zip(&diff.conditionals) {
        states = states
            .iter()
            .flat_map(|&(a, p, d)| {
                c[a].iter().zip(&dc[a]).enumerate().map(move |(b, (q, dq))| (b, p * q, d * q + p * dq))
            })
            .collect();
    }
    let joint = states.iter().map(|&(_, p, d)| fisher_term(d, p)).sum();

    let mut terms = vec![diff.marginal.iter().zip(&chain.marginal).map(|(d, p)| fisher_term(*d, *p)).sum()];
    let mut weights = chain.marginal.clone();
    for (c, dc) in chain.conditionals.iter().zip(&diff.conditionals) {
        let mut t = 0.0;
        for (a, w) in weights.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            t += w * dc[a].iter().zip(&c[a]).map(|(d, p)| fisher_term(*d, *p)).sum::<f64>();
        }
        terms.push(t);
        let width = c[0].len();
        let mut next = vec![0.0; width];
        for (a, w) in weights.iter().enumerate() {
            for (b, p) in c[a].iter().enumerate() {
                next[b] += w * p;
            }
        }
        weights = next;
    }
    Ok(FisherQuadratic { joint, terms })
}

/// Which factor a segment moves. `level` counts from 1 for the first
/// conditional; `given` is the conditioning index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "factor", rename_all = "snake_case")]
pub enum Factor {
    Marginal,
    Conditional { level: usize, given: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub factor: Factor,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    /// Marginal weight of the conditioning index while the segment runs.
    pub weight: f64,
    /// Fisher length of the joint motion: `sqrt(weight)` times the
    /// Hellinger angle of the moving factor.
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepPlan {
    pub initial: ConditionalChain,
    pub segments: Vec<Segment>,
}

impl StepPlan {
    pub fn new(initial: ConditionalChain) -> Self {
        StepPlan { initial, segments: Vec::new() }
    }

    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }

    /// State after every segment has run.
    pub fn final_state(&self) -> ConditionalChain {
        let mut c = self.initial.clone();
        for s in &self.segments {
            c.set_factor(s.factor, s.end.clone());
        }
        c
    }

    /// Appends a move of `factor` to `end`; moves that change nothing are
    /// dropped.
    pub fn push(&mut self, factor: Factor, end: Vec<f64>) -> Result<()> {
        let current = self.final_state();
        let start = current.factor(factor).to_vec();
        if start.len() != end.len() {
            return Err(Error::DimensionMismatch { expected: start.len(), got: end.len() });
        }
        check_row(&end, "segment end")?;
        if start == end {
            return Ok(());
        }
        let weight = current.weight(factor);
        let length = if weight == 0.0 { 0.0 } else { weight.sqrt() * hellinger_angle(&start, &end)? };
        self.segments.push(Segment { factor, start, end, weight, length });
        Ok(())
    }
}

fn delta(n: usize, k: usize) -> Vec<f64> {
    (0..n).map(|i| if i == k { 1.0 } else { 0.0 }).collect()
}

fn argmax(v: &[f64], skip: Option<usize>) -> usize {
    v.iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(i, _)| i)
}

/// Constructive step protocol between two chains that differ only in their
/// first two factors.
///
/// The marginal is first made deterministic on a parking index `k1`, every
/// other conditional row is set to its target for free, the marginal jumps to
/// `k0`, the parked row is set for free, and finally the marginal moves to its
/// target. Moves that change nothing are dropped, so a deterministic target
/// marginal costs at most `2 pi` and any target at most `3 pi`.
pub fn lemma_plan(initial: &ConditionalChain, target: &ConditionalChain) -> Result<StepPlan> {
    if initial.sizes() != target.sizes() {
        return Err(Error::InvalidArgument("initial and target chains have different shapes".into()));
    }
    if initial.depth() < 2 {
        return Err(Error::InvalidArgument("step protocols need at least two factors".into()));
    }
    if initial.conditionals[1..] != target.conditionals[1..] {
        return Err(Error::InvalidArgument("factors beyond the second must be fixed".into()));
    }
    let mut plan = StepPlan::new(initial.clone());
    if initial == target {
        return Ok(plan);
    }
    let n1 = initial.marginal.len();
    let k0 = argmax(&target.marginal, None);
    let rows = &target.conditionals[0];
    if n1 == 1 {
        plan.push(Factor::Conditional { level: 1, given: 0 }, rows[0].clone())?;
        return Ok(plan);
    }
    let k1 = argmax(&initial.marginal, Some(k0));
    plan.push(Factor::Marginal, delta(n1, k1))?;
    for (a, row) in rows.iter().enumerate() {
        if a != k1 {
            plan.push(Factor::Conditional { level: 1, given: a }, row.clone())?;
        }
    }
    plan.push(Factor::Marginal, delta(n1, k0))?;
    plan.push(Factor::Conditional { level: 1, given: k1 }, rows[k1].clone())?;
    plan.push(Factor::Marginal, target.marginal.clone())?;
    Ok(plan)
}

/// Erasure of a star-model state to all spins down, `delta` on index 0 for
/// both the central spin and the outer configuration.
pub fn star_erasure_plan(initial: &ConditionalChain, n: usize) -> Result<StepPlan> {
    if n < 2 || initial.depth() != 2 || initial.marginal.len() != 2 {
        return Err(Error::InvalidArgument("star plan needs a central spin and one outer factor".into()));
    }
    let outer = initial.conditionals[0][0].len();
    if outer != 1usize << (n - 1) {
        return Err(Error::DimensionMismatch { expected: 1usize << (n - 1), got: outer });
    }
    let target = ConditionalChain::new(delta(2, 0), vec![vec![delta(outer, 0); 2]])?;
    lemma_plan(initial, &target)
}

/// Joint-state samples of a step plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSimulation {
    /// Non-decreasing; free segments take no time.
    pub times: Vec<f64>,
    /// Joint distribution at every sample.
    pub states: Vec<Vec<f64>>,
    /// Segment that produced each sample (the first sample belongs to 0).
    pub segment: Vec<usize>,
    /// Fisher length of each segment measured on the joint samples.
    pub measured_segments: Vec<f64>,
    pub measured_length: f64,
    pub analytic_length: f64,
}

/// Runs every segment along the Hellinger geodesic of its moving factor at
/// constant speed, allotting time in proportion to segment length so the
/// concatenated path keeps a constant dissipation rate, and measures the
/// Fisher length of the joint trajectory as the sum of Hellinger angles
/// between consecutive samples.
pub fn simulate_step_plan(plan: &StepPlan, grid: usize, tau: f64) -> Result<StepSimulation> {
    if grid < 2 {
        return Err(Error::InvalidArgument("grid needs at least 2 samples per segment".into()));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::NonPositive(tau));
    }
    let total = plan.total_length();
    let mut chain = plan.initial.clone();
    let mut times = vec![0.0];
    let mut states = vec![chain.joint()];
    let mut segment = vec![0];
    let mut measured_segments = Vec::with_capacity(plan.segments.len());
    let mut clock = 0.0;
    for (k, seg) in plan.segments.iter().enumerate() {
        let duration = if total > 0.0 { tau * seg.length / total } else { 0.0 };
        let geo = HellingerGeodesic::new(&seg.start, &seg.end, 1.0)?;
        let mut measured = 0.0;
        for i in 1..grid {
            let s = i as f64 / (grid - 1) as f64;
            let values = if i + 1 == grid { seg.end.clone() } else { geo.state_at(s) };
            chain.set_factor(seg.factor, values);
            let joint = chain.joint();
            measured += hellinger_angle(states.last().unwrap(), &joint)?;
            states.push(joint);
            times.push(clock + duration * s);
            segment.push(k);
        }
        clock += duration;
        measured_segments.push(measured);
    }
    if let Some(t) = times.last_mut() {
        if total > 0.0 {
            *t = tau;
        }
    }
    let measured_length = measured_segments.iter().sum();
    Ok(StepSimulation { times, states, segment, measured_segments, measured_length, analytic_length: total })
}

/// Bounds on the pyramid erasure protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PyramidBound {
    /// `2 (m - 1) pi`.
    pub length_bound: f64,
    /// `4 (m - 1)^2 pi^2 / (beta tau)`.
    pub w_diss_bound: f64,
    pub n_total: u64,
    /// Leading-order `(4 pi^2 / a^2) (a D N)^(2/D) / (beta tau)`.
    pub w_diss_asymptotic: f64,
}

pub fn pyramid_bound(spec: &PyramidSpec, tau: f64, beta: f64) -> Result<PyramidBound> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::NonPositive(tau));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::NonPositive(beta));
    }
    let steps = (spec.layers - 1) as f64;
    let length_bound = 2.0 * steps * PI;
    let n_total = spec.n_total();
    let (a, d) = (spec.aperture as f64, spec.dimension as f64);
    let asymptotic = 4.0 * PI * PI / (a * a) * (a * d * n_total as f64).powf(2.0 / d);
    Ok(PyramidBound {
        length_bound,
        w_diss_bound: 4.0 * steps * steps * PI * PI / (beta * tau),
        n_total,
        w_diss_asymptotic: asymptotic / (beta * tau),
    })
}
