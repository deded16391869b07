use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mindiss::geometry::{geodesic_residual, shoot_geodesic, GeodesicSolution, ShootDiagnostics, ShootOptions, Target};
use mindiss::models::{AllToAll, ChainForm, IsingChain, Model, Qubits};
use mindiss::thermo::dissipation_along_curve;
use mindiss::{ControlPoint, Trajectory, UnitsContext};

fn shoot(model: &dyn Model, eps: f64, opts: &ShootOptions) -> (GeodesicSolution, ShootDiagnostics) {
    let origin = ControlPoint::new(vec![0.0; model.n_params()]).unwrap();
    shoot_geodesic(model, &origin, Target { eps_final: eps }, &UnitsContext::default(), opts).unwrap()
}

fn check_solution(model: &dyn Model, sol: &GeodesicSolution, diag: &ShootDiagnostics) {
    assert!(sol.converged);
    assert!(sol.speed_spread() <= 1e-4, "speed spread {}", sol.speed_spread());
    let (worst, scale) = geodesic_residual(model, sol, 1.0).unwrap();
    assert!(worst <= 1e-5 * scale, "residual {worst:e} vs scale {scale:e}");
    assert!(diag.monotone, "shooting map not monotone up to the accepted bracket");
    let end = sol.final_point().params();
    assert!((end[0] - diag.eps_hit).abs() < 1e-12);
}

#[test]
fn all_to_all_protocol_shape() {
    let m = AllToAll::new(10).unwrap();
    let (sol, diag) = shoot(&m, 4.0, &ShootOptions::default());
    check_solution(&m, &sol, &diag);
    let end = sol.final_point().params();
    assert!((end[0] - 4.0).abs() < 1e-6);
    assert!(end[1].abs() < 1e-9);
    // The coupling turns ferromagnetic in the interior and returns to zero.
    let pts = sol.trajectory.points();
    let interior = &pts[pts.len() / 10..pts.len() * 9 / 10];
    assert!(interior.iter().all(|p| p.params()[1] < 0.0));
    let eps: Vec<f64> = pts.iter().map(|p| p.params()[0]).collect();
    assert!(eps.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn chain_geodesic_is_valid() {
    let m = IsingChain::new(8, ChainForm::Extensive).unwrap();
    let (sol, diag) = shoot(&m, 4.0, &ShootOptions::default());
    check_solution(&m, &sol, &diag);
}

#[test]
fn step_halving_converges() {
    let m = AllToAll::new(6).unwrap();
    let base = ShootOptions::default();
    let (a, _) = shoot(&m, 4.0, &base);
    let (b, _) = shoot(&m, 4.0, &ShootOptions { steps: 2 * base.steps, ..base });
    let rel = (a.report.length - b.report.length).abs() / b.report.length;
    assert!(rel < 1e-7, "doubling the steps moved the length by {rel:e}");
}

/// Perturbations vanishing at both ends never shorten the geodesic.
#[test]
fn perturbed_paths_are_longer() {
    let m = AllToAll::new(8).unwrap();
    let (sol, _) = shoot(&m, 4.0, &ShootOptions::default());
    let units = UnitsContext::default();
    // Resample on a uniform grid so the comparison shares one quadrature.
    let samples = 801;
    let traj = &sol.trajectory;
    let interp = |t: f64| -> Vec<f64> {
        let times = traj.times();
        let k = times.partition_point(|x| *x <= t).clamp(1, times.len() - 1);
        let (t0, t1) = (times[k - 1], times[k]);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        let (a, b) = (traj.points()[k - 1].params(), traj.points()[k].params());
        a.iter().zip(b).map(|(x, y)| x + w * (y - x)).collect()
    };
    let reference = dissipation_along_curve(&m, &Trajectory::from_fn(1.0, samples, interp).unwrap(), &units).unwrap();
    assert!((reference.length - sol.report.length).abs() < 1e-4 * sol.report.length);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let (amp_e, amp_j, mode) = (rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), rng.gen_range(1..4) as f64);
        let path = Trajectory::from_fn(1.0, samples, |t| {
            let mut x = interp(t);
            let bump = (mode * PI * t).sin();
            x[0] += amp_e * bump;
            x[1] += amp_j * bump;
            x
        })
        .unwrap();
        let r = dissipation_along_curve(&m, &path, &units).unwrap();
        assert!(r.length >= reference.length - 1e-8, "perturbed {} < geodesic {}", r.length, reference.length);
    }
}

#[test]
fn qubit_shot_matches_closed_form() {
    let q = Qubits::new(3);
    let (sol, _) = shoot(&q, 6.0, &ShootOptions::default());
    let gd = 2.0 * 6f64.exp().atan() - PI / 2.0;
    assert!((sol.report.length - 3f64.sqrt() * gd).abs() < 1e-7);
}
