//! Seeded random instance generators shared by the CLI, integration tests,
//! and benchmarks. Everything is driven by an explicit seed through a
//! fixed-algorithm counter RNG, so a (seed, shape) pair identifies one
//! instance byte-for-byte across runs and platforms.

use ndarray::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::mdp::{Mdp, Policy};

/// Random dense MDP: kernel rows are floored-uniform draws normalized to
/// sum 1 (the floor keeps every transition probability bounded away from
/// zero, so small-radius perturbations stay valid kernels), rewards are
/// uniform on [0, 1], and the initial distribution is a normalized positive
/// draw.
pub fn random_mdp(num_states: usize, num_actions: usize, gamma: f64, seed: u64) -> Mdp {
    assert!(num_states > 0 && num_actions > 0, "empty model shape");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kernel = Array3::zeros((num_states, num_actions, num_states));
    for s in 0..num_states {
        for a in 0..num_actions {
            let mut row: Vec<f64> = (0..num_states)
                .map(|_| rng.random::<f64>() + 0.05)
                .collect();
            let total: f64 = row.iter().sum();
            for x in &mut row {
                *x /= total;
            }
            for (s2, x) in row.into_iter().enumerate() {
                kernel[[s, a, s2]] = x;
            }
        }
    }
    let reward = Array2::from_shape_fn((num_states, num_actions), |_| rng.random::<f64>());
    let mut mu: Array1<f64> = Array1::from_shape_fn(num_states, |_| rng.random::<f64>() + 0.05);
    mu /= mu.sum();
    let mut m = Mdp::new(kernel, reward, gamma, mu).expect("generated model is valid");
    m.name = Some(format!("random-s{num_states}-a{num_actions}-seed{seed}"));
    m
}

/// Random stochastic policy: floored-uniform rows normalized to sum 1.
pub fn random_policy(num_states: usize, num_actions: usize, seed: u64) -> Policy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probs = Array2::from_shape_fn((num_states, num_actions), |_| {
        rng.random::<f64>() + 0.05
    });
    for mut row in probs.outer_iter_mut() {
        let total = row.sum();
        row /= total;
    }
    Policy::new(probs).expect("generated policy is valid")
}

/// Standard-normal matrix, row-major draw order.
pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample::<f64, _>(StandardNormal))
}
