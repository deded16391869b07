//! Brute-force partition functions over all `2^N` spin configurations.
//!
//! Written directly from the microscopic Hamiltonians, independently of the
//! sector and transfer-matrix reductions used by the models. Bit `i` of a
//! configuration index set means spin `i` is up (`s_i = +1`).

use crate::thermo::log_sum_exp_iter;

fn spins(config: u64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| if config >> i & 1 == 1 { 1.0 } else { -1.0 })
}

fn sum_over<F: Fn(&[f64]) -> f64>(n: usize, beta: f64, energy: F) -> f64 {
    assert!(n <= 24, "brute force limited to 24 spins");
    let mut s = vec![0.0; n];
    log_sum_exp_iter((0..1u64 << n).map(|c| {
        for (slot, v) in s.iter_mut().zip(spins(c, n)) {
            *slot = v;
        }
        -beta * energy(&s)
    }))
}

/// `eps sum_i s_i + (J/2) sum_{i,j} s_i s_j`, including `i = j`.
pub fn all_to_all(n: usize, eps: f64, j: f64, beta: f64) -> f64 {
    sum_over(n, beta, |s| {
        let mut e = 0.0;
        for a in 0..n {
            e += eps * s[a];
            for b in 0..n {
                e += 0.5 * j * s[a] * s[b];
            }
        }
        e
    })
}

/// `eps sum_i s_i + (J/2) sum_i s_i s_{i+1}` on a ring.
pub fn chain(n: usize, eps: f64, j: f64, beta: f64) -> f64 {
    sum_over(n, beta, |s| (0..n).map(|i| eps * s[i] + 0.5 * j * s[i] * s[(i + 1) % n]).sum())
}

/// Spin 0 is the centre: `eps s_0 + eps1 sum_{i>0} s_i + J s_0 sum_{i>0} s_i`.
pub fn star(n: usize, eps: f64, eps1: f64, j: f64, beta: f64) -> f64 {
    sum_over(n, beta, |s| eps * s[0] + (1..n).map(|i| eps1 * s[i] + j * s[0] * s[i]).sum::<f64>())
}

pub fn qubits(n: usize, eps: f64, beta: f64) -> f64 {
    sum_over(n, beta, |s| eps * s.iter().sum::<f64>())
}

/// Direct sum over every microstate, each level repeated by its multiplicity.
pub fn full_control(energies: &[f64], multiplicities: &[u64], beta: f64) -> f64 {
    log_sum_exp_iter(
        energies
            .iter()
            .zip(multiplicities)
            .flat_map(|(&e, &m)| std::iter::repeat(-beta * e).take(m as usize)),
    )
}

/// Star probabilities indexed by `centre * 2^(N-1) + outer`, where `centre`
/// is 1 for an up centre and bit `k` of `outer` is outer spin `k + 1`.
pub fn star_probabilities(n: usize, eps: f64, eps1: f64, j: f64, beta: f64) -> Vec<f64> {
    let log_z = star(n, eps, eps1, j, beta);
    let mut p = vec![0.0; 1 << n];
    for c in 0..1u64 << n {
        let s: Vec<f64> = spins(c, n).collect();
        let e = eps * s[0] + (1..n).map(|i| eps1 * s[i] + j * s[0] * s[i]).sum::<f64>();
        let idx = ((c & 1) << (n - 1)) | (c >> 1);
        p[idx as usize] = (-beta * e - log_z).exp();
    }
    p
}
