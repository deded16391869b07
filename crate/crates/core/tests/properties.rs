use std::f64::consts::PI;

use proptest::prelude::*;

use mindiss::analysis::{fit_power_law_points, PowerLawFit};
use mindiss::analytic::{hellinger_angle, interaction_decompose, HellingerGeodesic};
use mindiss::models::{AllToAll, ChainForm, FullControl, IsingChain, Model, PyramidSpec, Qubits, Star};
use mindiss::steps::{
    fisher_quadratic, lemma_plan, pyramid_bound, simulate_step_plan, ChainDifferential, ConditionalChain,
};
use mindiss::thermo::{dissipation_along_curve, thermal_state};
use mindiss::{ControlPoint, Trajectory, UnitsContext};

fn models() -> Vec<Box<dyn Model>> {
    vec![
        Box::new(Qubits::new(3)),
        Box::new(AllToAll::new(6).unwrap()),
        Box::new(IsingChain::new(7, ChainForm::Exact).unwrap()),
        Box::new(IsingChain::new(7, ChainForm::Extensive).unwrap()),
        Box::new(Star::new(5).unwrap()),
        Box::new(FullControl::new(vec![1, 2, 1]).unwrap()),
    ]
}

fn normalize(w: Vec<f64>) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

fn dist(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.02f64..1.0, n).prop_map(normalize)
}

/// A smooth random curve through parameter space sampled on `[0, tau]`.
fn curve(dim: usize, coeffs: &[f64], tau: f64, samples: usize) -> Trajectory {
    Trajectory::from_fn(tau, samples, |t| {
        let s = t / tau;
        (0..dim)
            .map(|i| coeffs[3 * i] * s + coeffs[3 * i + 1] * (PI * s).sin() + coeffs[3 * i + 2] * s * s)
            .collect()
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn thermal_states_are_normalized(x in prop::collection::vec(-2.0f64..2.0, 3), beta in 0.2f64..3.0) {
        let units = UnitsContext::new(beta, 1.0).unwrap();
        for m in models() {
            let p = ControlPoint::new(x[..m.n_params()].to_vec()).unwrap();
            let s = thermal_state(m.as_ref(), &p, &units).unwrap();
            prop_assert!((s.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cauchy_schwarz_and_time_warp(coeffs in prop::collection::vec(-1.5f64..1.5, 9), tau in 0.5f64..4.0, warp in 0.05f64..0.9) {
        let units = UnitsContext::new(1.0, tau).unwrap();
        for m in models() {
            let traj = curve(m.n_params(), &coeffs, tau, 201);
            let r = dissipation_along_curve(m.as_ref(), &traj, &units).unwrap();
            prop_assert!(units.beta * r.w_diss * tau >= r.length * r.length - 1e-9);
            prop_assert!((r.work_variance / r.w_diss - 2.0 / units.beta).abs() <= 1e-12 * (2.0 / units.beta));
            // Monotone warp t -> tau * (s + warp sin(pi s) / pi) keeps the path.
            let warped: Vec<f64> = traj
                .times()
                .iter()
                .map(|t| {
                    let s = t / tau;
                    tau * (s + warp * (PI * s).sin() / PI)
                })
                .collect();
            let w = dissipation_along_curve(m.as_ref(), &traj.with_times(warped).unwrap(), &units).unwrap();
            prop_assert!((w.length - r.length).abs() <= 1e-6 * r.length.max(1e-12));
        }
    }

    #[test]
    fn spin_flip_symmetry(e in -2.0f64..2.0, j in -1.0f64..1.0, n in 3usize..12) {
        let a = AllToAll::new(n).unwrap();
        prop_assert_eq!(a.ln_z(&[e, j], 1.0).unwrap(), a.ln_z(&[-e, j], 1.0).unwrap());
        let c = IsingChain::new(n, ChainForm::Exact).unwrap();
        prop_assert_eq!(c.ln_z(&[e, j], 1.0).unwrap(), c.ln_z(&[-e, j], 1.0).unwrap());
    }

    #[test]
    fn hellinger_is_a_metric(p in dist(5), q in dist(5), r in dist(5)) {
        let pq = hellinger_angle(&p, &q).unwrap();
        prop_assert!((pq - hellinger_angle(&q, &p).unwrap()).abs() < 1e-12);
        prop_assert!(pq <= hellinger_angle(&p, &r).unwrap() + hellinger_angle(&r, &q).unwrap() + 1e-12);
        prop_assert!((0.0..=PI).contains(&pq));
    }

    #[test]
    fn interpolator_symmetry(p in dist(4), q in dist(4), tau in 0.1f64..10.0, s in 0.0f64..1.0) {
        let g = HellingerGeodesic::new(&p, &q, tau).unwrap();
        prop_assert_eq!(g.u(0.5 * tau), 0.5);
        prop_assert!((g.u(s * tau) + g.u(tau - s * tau) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mobius_round_trip(n in 1usize..=10, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let e: Vec<f64> = (0..1usize << n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let back = interaction_decompose(n, &e).unwrap().reconstruct();
        let scale = e.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (a, b) in e.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 1e-12 * scale * (1usize << n) as f64);
        }
    }

    #[test]
    fn step_plans_are_length_exact(p0 in dist(3), c0 in dist(4), c1 in dist(4), c2 in dist(4),
                                   p1 in dist(3), d0 in dist(4), d1 in dist(4), d2 in dist(4)) {
        let a = ConditionalChain::new(p0, vec![vec![c0, c1, c2]]).unwrap();
        let b = ConditionalChain::new(p1, vec![vec![d0, d1, d2]]).unwrap();
        let plan = lemma_plan(&a, &b).unwrap();
        let sim = simulate_step_plan(&plan, 400, 1.0).unwrap();
        prop_assert!((sim.measured_length - plan.total_length()).abs() < 1e-6);
        // Two delta-to-delta style moves of at most pi each, then the final
        // marginal move from the parked delta to the target.
        let q_max = b.marginal().iter().fold(0.0f64, |m, x| m.max(*x));
        prop_assert!(plan.total_length() <= 2.0 * PI + 2.0 * q_max.sqrt().acos() + 1e-12);
        let end = sim.states.last().unwrap();
        for (x, y) in end.iter().zip(b.joint()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn fisher_markov_identity(depth in 2usize..=4, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let sizes: Vec<usize> = (0..depth).map(|_| rng.gen_range(2..=5)).collect();
        let mut draw = |n: usize| normalize((0..n).map(|_| rng.gen_range(0.02..1.0)).collect());
        let marginal = draw(sizes[0]);
        let conds: Vec<Vec<Vec<f64>>> = sizes.windows(2).map(|w| (0..w[0]).map(|_| draw(w[1])).collect()).collect();
        let chain = ConditionalChain::new(marginal, conds).unwrap();
        let mut d = ChainDifferential::zeros(&chain);
        let mut tangent = |n: usize| {
            let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let m = v.iter().sum::<f64>() / n as f64;
            v.iter_mut().for_each(|x| *x -= m);
            v
        };
        d.marginal = tangent(sizes[0]);
        for (l, c) in d.conditionals.iter_mut().enumerate() {
            for row in c.iter_mut() {
                *row = tangent(sizes[l + 1]);
            }
        }
        let f = fisher_quadratic(&chain, &d).unwrap();
        prop_assert!((f.joint - f.decomposed()).abs() <= 1e-10 * f.joint.max(1.0));
    }

    #[test]
    fn fit_is_idempotent(alpha in 0.1f64..10.0, x in 0.1f64..2.0, noise in prop::collection::vec(-0.05f64..0.05, 8)) {
        let pts: Vec<(f64, f64)> = noise.iter().enumerate().map(|(i, e)| {
            let n = 5.0 * 1.6f64.powi(i as i32);
            (n, alpha * n.powf(x) * (1.0 + e))
        }).collect();
        let fit: PowerLawFit = fit_power_law_points(&pts).unwrap();
        let again: Vec<(f64, f64)> = pts.iter().map(|(n, _)| (*n, fit.predict(*n))).collect();
        let refit = fit_power_law_points(&again).unwrap();
        prop_assert!((refit.alpha - fit.alpha).abs() <= 1e-12 * fit.alpha);
        prop_assert!((refit.exponent - fit.exponent).abs() <= 1e-12);
    }
}

#[test]
fn chain_extensivity() {
    for (e, j) in [(0.3, 0.2), (1.0, -0.5), (-0.7, 0.9)] {
        let f = |n: usize| IsingChain::new(n, ChainForm::Exact).unwrap().ln_z(&[e, j], 1.0).unwrap() / n as f64;
        let limit = f(400);
        for n in [8, 16, 32, 64] {
            assert!((f(n) - limit).abs() <= (-(n as f64) / 4.0).exp(), "N = {n}");
        }
    }
}

#[test]
fn pyramid_bound_growth() {
    let mut last = 0.0;
    for m in 2..=60 {
        let b = pyramid_bound(&PyramidSpec::new(m, 2, 1, 3).unwrap(), 1.0, 1.0).unwrap();
        assert!(b.w_diss_bound > last);
        last = b.w_diss_bound;
    }
    for d in [2, 3] {
        let b = pyramid_bound(&PyramidSpec::new(50, 2, 1, d).unwrap(), 1.0, 1.0).unwrap();
        let ratio = b.w_diss_asymptotic / b.w_diss_bound;
        assert!((ratio - 1.0).abs() < 0.05, "D = {d}: ratio {ratio}");
    }
}
