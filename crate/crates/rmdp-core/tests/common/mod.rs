//! Helpers shared by the integration test targets.

#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::Rng;
use rmdp_core::{random_mdp, random_policy, sample_b, sample_k, Mdp, NormOrder, Policy};

/// The instance size grid used throughout: every (S, A) combination from
/// {3, 5, 10, 50} × {2, 4}, cycled with distinct seeds until `count`
/// instances exist.
pub fn size_grid_instances(count: usize, gamma: f64, seed_base: u64) -> Vec<(Mdp, Policy)> {
    const SIZES: [(usize, usize); 8] =
        [(3, 2), (3, 4), (5, 2), (5, 4), (10, 2), (10, 4), (50, 2), (50, 4)];
    (0..count)
        .map(|i| {
            let (s, a) = SIZES[i % SIZES.len()];
            let seed = seed_base + i as u64;
            let m = random_mdp(s, a, gamma, seed);
            let policy = random_policy(s, a, seed + 10_000);
            (m, policy)
        })
        .collect()
}

/// Sample a rank-one pair (b, k) from the constraint sets, then shrink b
/// toward the largest magnitude that keeps P̂ − b k^⊤ entrywise nonnegative
/// (×0.95 for slack), so the perturbed kernel is a valid model.
pub fn feasible_rank_one<R: Rng + ?Sized>(
    m: &Mdp,
    p: NormOrder,
    beta: f64,
    rng: &mut R,
) -> (Array2<f64>, Array1<f64>) {
    let ns = m.num_states();
    let na = m.num_actions();
    let k = sample_k(ns, p, rng);
    let mut b = sample_b(ns, na, p, beta, rng);
    let mut t_max = f64::INFINITY;
    for s in 0..ns {
        for a in 0..na {
            for s2 in 0..ns {
                let denom = b[[s, a]] * k[s2];
                if denom > 0.0 {
                    t_max = t_max.min(m.kernel[[s, a, s2]] / denom);
                }
            }
        }
    }
    if t_max.is_finite() && t_max < 1.0 {
        b *= 0.95 * t_max;
    }
    (b, k)
}
