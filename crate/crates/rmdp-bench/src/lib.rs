//! Shared fixtures for the criterion benchmarks in `benches/`.
//!
//! Everything is seeded so successive `cargo bench` runs measure the same
//! instances and comparisons across commits stay apples-to-apples.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rmdp_core::{gaussian_matrix, random_mdp, random_policy, Mdp, NormOrder, Policy, UncertaintySpec};

use ndarray::Array2;

pub use rmdp_core;

/// A dense Gaussian matrix with a seed derived from its size.
pub fn seeded_matrix(n: usize) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xB3_7C ^ (n as u64));
    gaussian_matrix(n, n, &mut rng)
}

/// A seeded evaluation problem: instance, stochastic policy, and an
/// uncertainty set small enough that every solver path stays feasible.
pub fn eval_fixture(states: usize, actions: usize) -> (Mdp, Policy, UncertaintySpec) {
    let seed = (states * 1_000 + actions) as u64;
    let m = random_mdp(states, actions, 0.9, seed);
    let policy = random_policy(states, actions, seed + 1);
    let spec = UncertaintySpec::non_rectangular(NormOrder::TWO, 0.01);
    (m, policy, spec)
}
