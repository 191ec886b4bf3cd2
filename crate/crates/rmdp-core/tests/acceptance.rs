//! End-to-end acceptance checks, one test per release criterion (a01–a12).
//! Each test prints a `A# PASS` line with the attained margin on stderr, so
//! the harness output reads as a per-criterion scoreboard.

mod common;

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use common::{feasible_rank_one, size_grid_instances};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rmdp_core::{
    apply_perturbation, baseline_random_kernel, baseline_random_rank_one, binary_search_evaluate,
    dual_penalty_direct, dual_vector, gaussian_matrix, gstd, local_refine, local_search_bk,
    nominal_eval, policy_gradient, q_value, random_mdp, random_policy, random_search,
    rect_robust_eval, recover_worst_kernel, rpg_run, spectral_bounds, spectral_solve, Error, Mdp,
    NormOrder, PenaltyCertificate, Policy, RankOnePerturbation, RpgConfig, SpectralOrder,
    UncertaintySpec,
};

const GAMMA: f64 = 0.9;
const BETA: f64 = 0.01;
const GRID_TOL: f64 = 1e-6;

struct CertifiedGrid {
    items: Vec<(Mdp, Policy, PenaltyCertificate)>,
    elapsed: Duration,
}

/// The 25-instance size grid with its evaluation certificates, computed once
/// and shared by the criteria that reuse it.
fn certified_grid() -> &'static CertifiedGrid {
    static CELL: OnceLock<CertifiedGrid> = OnceLock::new();
    CELL.get_or_init(|| {
        let start = Instant::now();
        let spec = UncertaintySpec::non_rectangular(NormOrder::TWO, BETA);
        let items = size_grid_instances(25, GAMMA, 1_000)
            .into_iter()
            .map(|(m, policy)| {
                let cert = binary_search_evaluate(&m, &policy, &spec, GRID_TOL)
                    .expect("grid instance must evaluate");
                (m, policy, cert)
            })
            .collect();
        CertifiedGrid { items, elapsed: start.elapsed() }
    })
}

#[test]
fn a01_certified_penalty_is_a_fixed_point_across_the_size_grid() {
    let grid = certified_grid();
    let mut worst_gap = 0.0f64;
    for (m, _, cert) in &grid.items {
        let gap = (cert.final_f - cert.lambda_star).abs();
        assert!(
            gap <= 2.0 * GRID_TOL,
            "|F(λ*) − λ*| = {gap:.3e} > {:.1e} on {:?}",
            2.0 * GRID_TOL,
            m.name
        );
        worst_gap = worst_gap.max(gap);
    }
    assert!(
        grid.elapsed <= Duration::from_secs(300),
        "grid evaluation took {:?} > 5 min",
        grid.elapsed
    );
    eprintln!(
        "A1 PASS: max |F(λ*) − λ*| = {worst_gap:.3e} over 25 instances in {:.1}s",
        grid.elapsed.as_secs_f64()
    );
}

#[test]
fn a02_bracket_width_halves_exactly_and_meets_tolerance_in_forty_steps() {
    let m = random_mdp(5, 2, GAMMA, 7);
    let policy = random_policy(5, 2, 8);
    let r_max = m.reward.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let r_min = m.reward.iter().copied().fold(f64::INFINITY, f64::min);
    let span = (r_max - r_min) / (1.0 - m.gamma);

    let spec = UncertaintySpec::non_rectangular(NormOrder::TWO, BETA);
    let cert = binary_search_evaluate(&m, &policy, &spec, 1e-6 * span).unwrap();

    assert_eq!(cert.trace.len(), cert.iterations + 1);
    for (i, step) in cert.trace.iter().enumerate() {
        let expected = span * 2f64.powi(-(i as i32));
        assert_eq!(
            step.width.to_bits(),
            expected.to_bits(),
            "width at step {i} is {} not exactly initial·2^-{i} = {expected}",
            step.width
        );
    }
    assert!(cert.trace.last().unwrap().width <= 1e-6 * span);
    assert!(
        cert.iterations <= 40,
        "{} iterations to reach 1e-6·span",
        cert.iterations
    );
    eprintln!(
        "A2 PASS: width halves bit-exactly for {} steps; tolerance 1e-6·span reached in {} ≤ 40 iterations",
        cert.trace.len(),
        cert.iterations
    );
}

#[test]
fn a03_recovered_worst_kernel_reproduces_the_certified_return() {
    let grid = certified_grid();
    let spec = UncertaintySpec::non_rectangular(NormOrder::TWO, BETA);
    let mut checked = 0usize;
    let mut skipped = 0usize;
    let mut worst_gap = 0.0f64;
    for (m, policy, cert) in &grid.items {
        match recover_worst_kernel(m, policy, cert, &spec) {
            Ok((_, worst)) => {
                let j_worst = nominal_eval(&worst, policy).unwrap().j;
                let gap = (j_worst - cert.robust_return).abs();
                assert!(
                    gap <= 1e-4,
                    "recovered-kernel return off by {gap:.3e} on {:?}",
                    m.name
                );
                worst_gap = worst_gap.max(gap);
                checked += 1;
            }
            // The rank-one step can leave the simplex on instances with very
            // small kernel entries; those are excluded by construction.
            Err(Error::NegativeKernelEntry { .. }) => skipped += 1,
            Err(other) => panic!("unexpected recovery failure on {:?}: {other}", m.name),
        }
    }
    assert!(checked >= 20, "only {checked} of 25 kernels were valid");
    eprintln!(
        "A3 PASS: recovered kernels reproduce J^π − λ* within {worst_gap:.3e} on {checked} instances ({skipped} skipped as infeasible)"
    );
}

#[test]
fn a04_sampling_baselines_upper_bound_the_certified_return_in_order() {
    let spec = UncertaintySpec::non_rectangular(NormOrder::TWO, BETA);
    let tol = 1e-6;
    let total = 20usize;
    let mut ordered = 0usize;
    for i in 0..total {
        let m = random_mdp(5, 2, GAMMA, 300 + i as u64);
        let policy = random_policy(5, 2, 800 + i as u64);
        let cert = binary_search_evaluate(&m, &policy, &spec, tol).unwrap();
        let floor = cert.robust_return - tol;

        let mut rng = ChaCha8Rng::seed_from_u64(9_000 + i as u64);
        let kernel = baseline_random_kernel(&m, &policy, &spec, 10_000, &mut rng).unwrap();
        let rank_one = baseline_random_rank_one(&m, &policy, &spec, 10_000, &mut rng).unwrap();

        assert!(
            kernel.best_return >= floor,
            "kernel baseline {:.9} fell below J^π − λ* − tol = {floor:.9} on seed {i}",
            kernel.best_return
        );
        assert!(
            rank_one.best_return >= floor,
            "rank-one baseline {:.9} fell below J^π − λ* − tol = {floor:.9} on seed {i}",
            rank_one.best_return
        );
        if kernel.best_return >= rank_one.best_return && rank_one.best_return >= floor {
            ordered += 1;
        }
    }
    assert!(
        ordered * 10 >= total * 9,
        "full ordering kernel ≥ rank-one ≥ certified held on only {ordered}/{total}"
    );
    eprintln!(
        "A4 PASS: both baselines ≥ certified return on {total}/{total}; full ordering on {ordered}/{total}"
    );
}

#[test]
fn a05_two_state_penalty_matches_the_rectangular_decomposition() {
    let p = NormOrder::TWO;
    let mut worst_rel = 0.0f64;
    for seed in 40..45u64 {
        let m = random_mdp(2, 1, GAMMA, seed);
        let policy = Policy::uniform(2, 1);
        let spec = UncertaintySpec::non_rectangular(p, BETA);
        let cert = binary_search_evaluate(&m, &policy, &spec, 1e-8).unwrap();

        // Radius vectors on the budget sphere: every split of β across the
        // two rows, 20 points along the arc.
        let mut best_penalty = 0.0f64;
        for g in 0..20 {
            let theta = g as f64 * std::f64::consts::FRAC_PI_2 / 19.0;
            let radii =
                Array2::from_shape_vec((2, 1), vec![BETA * theta.sin(), BETA * theta.cos()])
                    .unwrap();
            let rect = rect_robust_eval(&m, &policy, &UncertaintySpec::sa_rect(p, radii)).unwrap();
            best_penalty = best_penalty.max(cert.nominal_return - rect.robust_return);
        }
        let rel = (best_penalty - cert.lambda_star).abs() / cert.lambda_star;
        assert!(
            rel <= 0.05,
            "decomposed penalty {best_penalty:.6e} vs λ* {:.6e} (rel {rel:.3}) on seed {seed}",
            cert.lambda_star
        );
        worst_rel = worst_rel.max(rel);
    }
    eprintln!("A5 PASS: max relative gap between λ* and the per-row decomposition = {worst_rel:.2e} ≤ 5%");
}

#[test]
fn a06_rank_one_resolvent_identity_matches_direct_solves() {
    let sizes = [(3usize, 2usize), (4, 2), (5, 3), (6, 2), (4, 4)];
    let mut worst = 0.0f64;
    for (i, &(s, a)) in sizes.iter().enumerate() {
        let m = random_mdp(s, a, GAMMA, 70 + i as u64);
        let policy = random_policy(s, a, 170 + i as u64);
        let j = nominal_eval(&m, &policy).unwrap().j;
        let mut rng = ChaCha8Rng::seed_from_u64(7_700 + i as u64);
        for _ in 0..100 {
            let (b, k) = feasible_rank_one(&m, NormOrder::TWO, 0.05, &mut rng);
            let pert = RankOnePerturbation { b: b.clone(), k: k.clone() };
            let direct = j - nominal_eval(&apply_perturbation(&m, &pert).unwrap(), &policy)
                .unwrap()
                .j;
            let closed = dual_penalty_direct(&m, &policy, b.view(), k.view()).unwrap();
            let gap = (closed - direct).abs();
            assert!(gap <= 1e-8, "identity off by {gap:.3e} on instance {i}");
            worst = worst.max(gap);
        }
    }
    eprintln!("A6 PASS: closed-form return gap matches direct solves within {worst:.3e} on 500 pairs");
}

#[test]
fn a07_spectral_solutions_stay_within_their_guarantees() {
    let mut rng = ChaCha8Rng::seed_from_u64(4_242);
    let betas = [0.3, 1.0, 2.5];

    // General Gaussian matrices, sizes weighted toward small.
    for t in 0..80 {
        let u: f64 = rng.random();
        let n = 2 + (98.0 * u * u * u) as usize;
        let rows = match t % 3 {
            0 => n,
            1 => n + 3,
            _ => (n / 2).max(2),
        };
        let a = gaussian_matrix(rows, n, &mut rng);
        let beta = betas[t % betas.len()];
        let bounds = spectral_bounds(a.view(), beta).unwrap();
        let v0 = spectral_solve(a.view(), beta, SpectralOrder::Zero).unwrap().value;
        let v1 = spectral_solve(a.view(), beta, SpectralOrder::First).unwrap().value;
        let v2 = spectral_solve(a.view(), beta, SpectralOrder::Second).unwrap().value;
        for v in [v0, v1, v2] {
            assert!(
                v >= bounds.lower * (1.0 - 1e-12) && v <= bounds.upper_zero * (1.0 + 1e-12),
                "value {v} outside [β√(λ₁/2), β√λ₁] = [{}, {}] at n={n}",
                bounds.lower,
                bounds.upper_zero
            );
        }
        assert!(v0 <= v1 && v1 <= v2, "order monotonicity broken: {v0} {v1} {v2}");
    }

    // Rank-one matrices: the maximizer is the better-signed half of the
    // right factor, so the value has a closed form.
    let mut worst_rank_one = 0.0f64;
    for t in 0..60 {
        let u: f64 = rng.random();
        let n = 2 + (58.0 * u * u) as usize;
        let x = gaussian_matrix(n + 2, 1, &mut rng).column(0).to_owned();
        let y = gaussian_matrix(n, 1, &mut rng).column(0).to_owned();
        let a = Array2::from_shape_fn((n + 2, n), |(i, j)| x[i] * y[j]);
        let beta = betas[t % betas.len()];
        let x_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let y_pos = y.iter().filter(|v| **v > 0.0).map(|v| v * v).sum::<f64>().sqrt();
        let y_neg = y.iter().filter(|v| **v < 0.0).map(|v| v * v).sum::<f64>().sqrt();
        let oracle = beta * x_norm * y_pos.max(y_neg);
        let v1 = spectral_solve(a.view(), beta, SpectralOrder::First).unwrap().value;
        let rel = (v1 - oracle).abs() / oracle;
        assert!(rel <= 1e-8, "rank-one exactness off by {rel:.3e} at n={n}");
        worst_rank_one = worst_rank_one.max(rel);
    }

    // Entrywise-positive matrices: the top eigenvector is already
    // nonnegative, so the unconstrained optimum β√λ₁ is feasible.
    let mut worst_positive = 0.0f64;
    for t in 0..60 {
        let u: f64 = rng.random();
        let n = 2 + (58.0 * u * u) as usize;
        let a = gaussian_matrix(n, n, &mut rng).mapv(|v| v.abs() + 0.1);
        let beta = betas[t % betas.len()];
        let bounds = spectral_bounds(a.view(), beta).unwrap();
        let v1 = spectral_solve(a.view(), beta, SpectralOrder::First).unwrap().value;
        let rel = (v1 - bounds.upper_zero).abs() / bounds.upper_zero;
        assert!(rel <= 1e-8, "positive-matrix exactness off by {rel:.3e} at n={n}");
        worst_positive = worst_positive.max(rel);
    }

    eprintln!(
        "A7 PASS: 200 matrices within [β√(λ₁/2), β√λ₁] and order-monotone; exactness gaps ≤ {:.1e} (rank-one), ≤ {:.1e} (positive)",
        worst_rank_one, worst_positive
    );
}

#[test]
fn a08_spectral_method_dominates_sampling_in_value_and_time() {
    let mut medians = Vec::new();
    for &n in &[50usize, 200] {
        let mut ratios = Vec::new();
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(31_000 + 100 * n as u64 + seed);
            let a = gaussian_matrix(n, n, &mut rng);
            let beta = 1.0;
            let spectral = spectral_solve(a.view(), beta, SpectralOrder::First).unwrap();
            let refined = local_refine(a.view(), beta, spectral.x.view());
            ratios.push(spectral.value / refined.value);

            let (rs_value, _) = random_search(a.view(), beta, 10_000, &mut rng);
            assert!(
                spectral.value > rs_value,
                "random search beat the spectral value at n={n}, seed {seed}: {rs_value} ≥ {}",
                spectral.value
            );
        }
        ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = 0.5 * (ratios[9] + ratios[10]);
        assert!(median >= 0.90, "median spectral/refined ratio {median:.4} < 0.90 at n={n}");
        medians.push((n, median));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(77_000);
    let a = gaussian_matrix(500, 500, &mut rng);
    let t0 = Instant::now();
    let spectral = spectral_solve(a.view(), 1.0, SpectralOrder::First).unwrap();
    let spectral_time = t0.elapsed();
    let t1 = Instant::now();
    let (rs_value, _) = random_search(a.view(), 1.0, 10_000, &mut rng);
    let sampler_time = t1.elapsed();
    assert!(spectral.value > rs_value);
    assert!(
        spectral_time < sampler_time,
        "spectral {spectral_time:?} not faster than sampling {sampler_time:?} at n=500"
    );

    eprintln!(
        "A8 PASS: median spectral/refined = {:.3} (n=50), {:.3} (n=200); beats 10⁴-sample search everywhere; {:.0}ms vs {:.0}ms at n=500",
        medians[0].1,
        medians[1].1,
        spectral_time.as_secs_f64() * 1e3,
        sampler_time.as_secs_f64() * 1e3
    );
}

#[test]
fn a09_gradient_agrees_with_finite_differences_and_reduces_at_zero() {
    let sizes = [(3usize, 2usize), (4, 2), (5, 2), (3, 3), (4, 3)];
    let mut worst_rel = 0.0f64;
    for i in 0..10 {
        let (s, a) = sizes[i % sizes.len()];
        let m = random_mdp(s, a, GAMMA, 600 + i as u64);
        let policy = random_policy(s, a, 1_600 + i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(2_600 + i as u64);
        let (b, k) = feasible_rank_one(&m, NormOrder::TWO, 0.05, &mut rng);
        let pert = RankOnePerturbation { b, k };
        let worst = apply_perturbation(&m, &pert).unwrap();
        let grad = policy_gradient(&m, &policy, &pert).unwrap().gradient;

        let h = 1e-5;
        for st in 0..s {
            // Tangent direction e_{st,0} − e_{st,1}: stays on the simplex.
            let mut plus = policy.probs.clone();
            let mut minus = policy.probs.clone();
            plus[[st, 0]] += h;
            plus[[st, 1]] -= h;
            minus[[st, 0]] -= h;
            minus[[st, 1]] += h;
            let j_plus = nominal_eval(&worst, &Policy::new(plus).unwrap()).unwrap().j;
            let j_minus = nominal_eval(&worst, &Policy::new(minus).unwrap()).unwrap().j;
            let fd = (j_plus - j_minus) / (2.0 * h);
            let analytic = grad[[st, 0]] - grad[[st, 1]];
            let rel = (analytic - fd).abs() / (1.0 + fd.abs());
            assert!(rel <= 1e-4, "finite-difference gap {rel:.3e} at state {st}, instance {i}");
            worst_rel = worst_rel.max(rel);
        }

        // At b = 0, k = 0 every correction term vanishes identically and the
        // gradient must equal the nominal policy gradient exactly.
        let zero = RankOnePerturbation {
            b: Array2::zeros((s, a)),
            k: Array1::zeros(s),
        };
        let nominal_grad = policy_gradient(&m, &policy, &zero).unwrap().gradient;
        let eval = nominal_eval(&m, &policy).unwrap();
        let q_r = q_value(&m, &policy, m.reward.view()).unwrap();
        for st in 0..s {
            for ac in 0..a {
                assert_eq!(
                    nominal_grad[[st, ac]],
                    eval.d[st] * q_r[[st, ac]],
                    "nominal reduction not exact at ({st},{ac}), instance {i}"
                );
            }
        }
    }
    eprintln!("A9 PASS: finite-difference agreement ≤ {worst_rel:.3e} on 10 instances; zero-perturbation reduction exact");
}

/// Return of a 2-state policy where each kernel row (s,a) is shifted by
/// t[s][a]·(+1, −1); solved by the closed 2×2 inverse.
fn two_state_return(m: &Mdp, policy: &Policy, t: &[[f64; 2]; 2]) -> f64 {
    let na = policy.num_actions();
    let mut p = [[0.0f64; 2]; 2];
    let mut r = [0.0f64; 2];
    for s in 0..2 {
        for (a, &shift) in t[s].iter().enumerate().take(na) {
            let w = policy.probs[[s, a]];
            r[s] += w * m.reward[[s, a]];
            p[s][0] += w * (m.kernel[[s, a, 0]] + shift);
            p[s][1] += w * (m.kernel[[s, a, 1]] - shift);
        }
    }
    let a11 = 1.0 - m.gamma * p[0][0];
    let a12 = -m.gamma * p[0][1];
    let a21 = -m.gamma * p[1][0];
    let a22 = 1.0 - m.gamma * p[1][1];
    let det = a11 * a22 - a12 * a21;
    let v0 = (r[0] * a22 - a12 * r[1]) / det;
    let v1 = (a11 * r[1] - a21 * r[0]) / det;
    m.mu[0] * v0 + m.mu[1] * v1
}

#[test]
fn a10_rectangular_fixed_point_matches_brute_force_minimization() {
    let p = NormOrder::TWO;
    let row_scale = 2f64.powf(1.0 / p.p()); // ‖t·(1,−1)‖_p = |t|·2^{1/p}
    let mut worst_gap = 0.0f64;

    for seed in 0..5u64 {
        let m = random_mdp(2, 2, GAMMA, 500 + seed);
        let policy = random_policy(2, 2, 900 + seed);
        let mut rng = ChaCha8Rng::seed_from_u64(1_300 + seed);

        // Per-row radii: each row's deviation is t·(1,−1) with
        // |t| ≤ radius/2^{1/p}, so the set is a box in t-space.
        let radii = Array2::from_shape_fn((2, 2), |_| rng.random_range(0.002..0.01));
        let caps = [
            [radii[[0, 0]] / row_scale, radii[[0, 1]] / row_scale],
            [radii[[1, 0]] / row_scale, radii[[1, 1]] / row_scale],
        ];
        let mut brute = f64::INFINITY;
        for i in 0..16 {
            let t = [
                [
                    if i & 1 == 0 { caps[0][0] } else { -caps[0][0] },
                    if i & 2 == 0 { caps[0][1] } else { -caps[0][1] },
                ],
                [
                    if i & 4 == 0 { caps[1][0] } else { -caps[1][0] },
                    if i & 8 == 0 { caps[1][1] } else { -caps[1][1] },
                ],
            ];
            brute = brute.min(two_state_return(&m, &policy, &t));
        }
        for _ in 0..100_000 {
            let t = [
                [
                    rng.random_range(-caps[0][0]..caps[0][0]),
                    rng.random_range(-caps[0][1]..caps[0][1]),
                ],
                [
                    rng.random_range(-caps[1][0]..caps[1][0]),
                    rng.random_range(-caps[1][1]..caps[1][1]),
                ],
            ];
            brute = brute.min(two_state_return(&m, &policy, &t));
        }
        let rect = rect_robust_eval(&m, &policy, &UncertaintySpec::sa_rect(p, radii)).unwrap();
        let gap = (brute - rect.robust_return).abs();
        assert!(gap <= 1e-3, "per-row gap {gap:.3e} on seed {seed}");
        assert!(brute >= rect.robust_return - 1e-8, "sampled min undercut the fixed point");
        worst_gap = worst_gap.max(gap);

        // Per-state radii: actions share a budget; sample directions on the
        // joint ball's boundary and interior.
        let state_radii = Array1::from_shape_fn(2, |_| rng.random_range(0.002..0.01));
        let mut brute_s = f64::INFINITY;
        for trial in 0..100_000u32 {
            let mut t = [[0.0f64; 2]; 2];
            for s in 0..2 {
                let g0: f64 = rng.random_range(-1.0..1.0);
                let g1: f64 = rng.random_range(-1.0..1.0);
                let norm = ((g0 * row_scale).powi(2) + (g1 * row_scale).powi(2)).sqrt();
                if norm == 0.0 {
                    continue;
                }
                let rho = if trial % 2 == 0 { 1.0 } else { rng.random::<f64>().sqrt() };
                t[s][0] = g0 * rho * state_radii[s] / norm;
                t[s][1] = g1 * rho * state_radii[s] / norm;
            }
            brute_s = brute_s.min(two_state_return(&m, &policy, &t));
        }
        let rect_s = rect_robust_eval(
            &m,
            &policy,
            &UncertaintySpec::s_rect(p, state_radii),
        )
        .unwrap();
        let gap_s = (brute_s - rect_s.robust_return).abs();
        assert!(gap_s <= 1e-3, "per-state gap {gap_s:.3e} on seed {seed}");
        assert!(brute_s >= rect_s.robust_return - 1e-8, "sampled min undercut the fixed point");
        worst_gap = worst_gap.max(gap_s);
    }
    eprintln!("A10 PASS: fixed point within {worst_gap:.3e} of 10⁵-sample brute force (both shapes, 5 seeds)");
}

#[test]
fn a11_policy_ascent_improves_the_robust_return() {
    let m = random_mdp(5, 2, GAMMA, 11);
    let spec = UncertaintySpec::non_rectangular(NormOrder::TWO, 0.005);
    let initial = Policy::uniform(5, 2);
    let config = RpgConfig { max_iters: 200, ..RpgConfig::default() };

    let start = Instant::now();
    let trace = rpg_run(&m, &spec, &initial, &config);
    let elapsed = start.elapsed();
    assert!(trace.halted.is_none(), "ascent halted early: {:?}", trace.halted);
    assert_eq!(trace.rows.len(), 200);
    assert!(elapsed <= Duration::from_secs(600), "ascent took {elapsed:?}");

    let initial_return = binary_search_evaluate(&m, &initial, &spec, 1e-8).unwrap().robust_return;
    let final_return =
        binary_search_evaluate(&m, &trace.final_policy, &spec, 1e-8).unwrap().robust_return;
    assert!(
        final_return >= initial_return,
        "final robust return {final_return:.9} < initial {initial_return:.9}"
    );

    let mut ok = 0usize;
    for pair in trace.rows.windows(2) {
        let tol_here = (config.tol0 * m.gamma.powi(pair[0].iter as i32)).max(config.tol_floor);
        if pair[1].robust_return >= pair[0].robust_return - 2.0 * tol_here {
            ok += 1;
        }
    }
    let frac = ok as f64 / (trace.rows.len() - 1) as f64;
    assert!(frac >= 0.80, "only {:.0}% of iterations were non-decreasing", frac * 100.0);
    eprintln!(
        "A11 PASS: robust return {initial_return:.6} → {final_return:.6} in 200 iterations ({:.1}s); {:.0}% non-decreasing",
        elapsed.as_secs_f64(),
        frac * 100.0
    );
}

fn push(bits: &mut Vec<u64>, x: f64) {
    bits.push(x.to_bits());
}

fn push_all<'a>(bits: &mut Vec<u64>, xs: impl IntoIterator<Item = &'a f64>) {
    for &x in xs {
        bits.push(x.to_bits());
    }
}

/// Every numeric output of a fixed seeded workload, as raw bits. Wall-clock
/// fields are deliberately excluded.
fn pipeline_fingerprint() -> Vec<u64> {
    let mut bits = Vec::new();

    let m = random_mdp(6, 3, GAMMA, 2_024);
    let policy = random_policy(6, 3, 77);
    push_all(&mut bits, m.kernel.iter());
    push_all(&mut bits, m.reward.iter());
    push_all(&mut bits, m.mu.iter());
    push_all(&mut bits, policy.probs.iter());

    let spec = UncertaintySpec::non_rectangular(NormOrder::TWO, BETA);
    let cert = binary_search_evaluate(&m, &policy, &spec, 1e-8).unwrap();
    push(&mut bits, cert.lambda_star);
    push(&mut bits, cert.final_f);
    push(&mut bits, cert.robust_return);
    push(&mut bits, cert.nominal_return);
    push_all(&mut bits, cert.b_star.iter());
    push_all(&mut bits, cert.k_star.iter());
    for step in &cert.trace {
        push(&mut bits, step.lambda);
        push(&mut bits, step.f_value);
        push(&mut bits, step.width);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(501);
    let kernel = baseline_random_kernel(&m, &policy, &spec, 300, &mut rng).unwrap();
    push(&mut bits, kernel.best_return);
    let mut rng = ChaCha8Rng::seed_from_u64(502);
    let rank_one = baseline_random_rank_one(&m, &policy, &spec, 300, &mut rng).unwrap();
    push(&mut bits, rank_one.best_return);
    let mut rng = ChaCha8Rng::seed_from_u64(503);
    let (penalty, pert) = local_search_bk(&m, &policy, &spec, 3, 40, &mut rng).unwrap();
    push(&mut bits, penalty);
    push_all(&mut bits, pert.b.iter());
    push_all(&mut bits, pert.k.iter());

    let radii = Array2::from_elem((6, 3), 0.004);
    let rect = rect_robust_eval(&m, &policy, &UncertaintySpec::sa_rect(NormOrder::TWO, radii))
        .unwrap();
    push(&mut bits, rect.robust_return);
    push_all(&mut bits, rect.value.iter());

    let mut rng = ChaCha8Rng::seed_from_u64(504);
    let a = gaussian_matrix(30, 30, &mut rng);
    let sol = spectral_solve(a.view(), 0.5, SpectralOrder::Second).unwrap();
    push(&mut bits, sol.value);
    push_all(&mut bits, sol.x.iter());
    let refined = local_refine(a.view(), 0.5, sol.x.view());
    push(&mut bits, refined.value);

    let v = Array1::from_shape_fn(9, |i| ((i * i) as f64).sin());
    for p in [NormOrder::ONE, NormOrder::new(1.7).unwrap(), NormOrder::TWO, NormOrder::INF] {
        push(&mut bits, gstd(v.view(), p));
        let (k, val) = dual_vector(v.view(), p);
        push(&mut bits, val);
        push_all(&mut bits, k.iter());
    }

    let spec_small = UncertaintySpec::non_rectangular(NormOrder::TWO, 0.005);
    let trace = rpg_run(
        &random_mdp(4, 2, GAMMA, 12),
        &spec_small,
        &Policy::uniform(4, 2),
        &RpgConfig { max_iters: 8, ..RpgConfig::default() },
    );
    for row in &trace.rows {
        push(&mut bits, row.robust_return);
        push(&mut bits, row.penalty);
        push(&mut bits, row.step);
        push_all(&mut bits, row.policy.iter());
    }
    push_all(&mut bits, trace.final_policy.probs.iter());

    bits
}

#[test]
fn a12_identical_seeds_reproduce_every_numeric_output_bitwise() {
    let first = pipeline_fingerprint();
    let second = pipeline_fingerprint();
    assert_eq!(first.len(), second.len());
    let diff = first.iter().zip(second.iter()).filter(|(a, b)| a != b).count();
    assert_eq!(diff, 0, "{diff} of {} outputs differed between runs", first.len());
    eprintln!(
        "A12 PASS: {} numeric outputs bit-identical across two consecutive runs",
        first.len()
    );
}
