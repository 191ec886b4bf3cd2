//! `rmdp eval`: compare evaluation methods on one instance under a shared
//! budget. The certified bisection result is the reference; the sampling
//! methods produce upper bounds on the robust return (lower bounds on the
//! penalty) and are stopped at the bisection's wall time unless an explicit
//! sample or time budget is given.

use std::process::ExitCode;
use std::time::Instant;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rmdp_core::{
    baseline_random_kernel, baseline_random_rank_one, binary_search_evaluate, load_mdp,
    load_policy, local_search_bk, nominal_eval, BaselineOutcome, Mdp, PenaltyCertificate, Policy,
    UncertaintySpec,
};
use serde::Serialize;

use crate::output::{file_error, write_csv, write_json, Format};
use crate::{CliError, EvalArgs, Method};

/// Draws per time-budget slice; small enough that the wall-clock check
/// fires promptly, large enough to amortize the per-call setup.
const CHUNK: usize = 512;
/// Ascent steps per local-search restart.
const LOCAL_ITERS: usize = 100;
/// Sampler budget when equal-time mode has no anchor to measure.
const FALLBACK_BUDGET_MS: f64 = 1_000.0;

#[derive(Serialize)]
struct MethodRow {
    method: &'static str,
    status: String,
    penalty: Option<f64>,
    robust_return: Option<f64>,
    wall_ms: f64,
    /// Bisection steps or local-search restarts.
    iterations: Option<usize>,
    /// Draws attempted by the sampling methods.
    samples: Option<usize>,
}

#[derive(Serialize)]
struct EvalReport<'a> {
    instance: String,
    states: usize,
    actions: usize,
    gamma: f64,
    beta: f64,
    p: String,
    tol: f64,
    seed: u64,
    mode: String,
    nominal_return: f64,
    rows: &'a [MethodRow],
}

enum Budget {
    Samples(usize),
    TimeMs(f64),
}

pub fn run(args: &EvalArgs) -> Result<ExitCode, CliError> {
    if args.beta < 0.0 {
        return Err(CliError::Validation("--beta must be nonnegative".into()));
    }
    if !args.tol.is_finite() || args.tol <= 0.0 {
        return Err(CliError::Validation("--tol must be positive".into()));
    }
    if args.samples == Some(0) {
        return Err(CliError::Validation("--samples must be at least 1".into()));
    }

    let m = load_mdp(&args.mdp).map_err(|e| file_error(&args.mdp, e))?;
    let policy = match &args.policy {
        Some(path) => {
            let policy = load_policy(path).map_err(|e| file_error(path, e))?;
            if policy.num_states() != m.num_states() || policy.num_actions() != m.num_actions() {
                return Err(CliError::Validation(format!(
                    "policy is {}×{} but the instance is {}×{}",
                    policy.num_states(),
                    policy.num_actions(),
                    m.num_states(),
                    m.num_actions()
                )));
            }
            policy
        }
        None => Policy::uniform(m.num_states(), m.num_actions()),
    };
    let spec = UncertaintySpec::non_rectangular(args.p, args.beta);
    let methods = args.methods.clone().unwrap_or_else(|| {
        vec![Method::BinarySearch, Method::LocalBk, Method::RankOneSampling, Method::KernelSampling]
    });
    if methods.is_empty() {
        return Err(CliError::Validation("--methods must name at least one method".into()));
    }
    let nominal_j = nominal_eval(&m, &policy).map_err(|e| CliError::Run(e.to_string()))?.j;

    // The bisection anchors the equal-time comparison, so it runs whenever
    // it is requested or its wall time is needed as the samplers' budget.
    let sampler_requested = methods.iter().any(|m| *m != Method::BinarySearch);
    let equal_time = args.samples.is_none() && args.budget_ms.is_none();
    let bisection: Option<Result<(PenaltyCertificate, f64), String>> =
        if methods.contains(&Method::BinarySearch) || (equal_time && sampler_requested) {
            let t = Instant::now();
            Some(
                binary_search_evaluate(&m, &policy, &spec, args.tol)
                    .map(|cert| (cert, t.elapsed().as_secs_f64() * 1e3))
                    .map_err(|e| e.to_string()),
            )
        } else {
            None
        };

    let (budget, mode) = if let Some(n) = args.samples {
        (Budget::Samples(n), format!("samples={n}"))
    } else if let Some(ms) = args.budget_ms {
        (Budget::TimeMs(ms as f64), format!("budget_ms={ms}"))
    } else {
        match &bisection {
            Some(Ok((_, wall_ms))) => {
                (Budget::TimeMs(*wall_ms), format!("equal_time({wall_ms:.1}ms)"))
            }
            _ => (
                Budget::TimeMs(FALLBACK_BUDGET_MS),
                format!("equal_time(fallback {FALLBACK_BUDGET_MS:.0}ms)"),
            ),
        }
    };

    let mut rows = Vec::with_capacity(methods.len());
    for method in &methods {
        let row = match method {
            Method::BinarySearch => match bisection.as_ref().expect("anchor ran") {
                Ok((cert, wall_ms)) => MethodRow {
                    method: method.name(),
                    status: "ok".into(),
                    penalty: Some(cert.lambda_star),
                    robust_return: Some(cert.robust_return),
                    wall_ms: *wall_ms,
                    iterations: Some(cert.iterations),
                    samples: None,
                },
                Err(e) => error_row(method.name(), e.clone()),
            },
            Method::LocalBk => run_local_search(&m, &policy, &spec, nominal_j, &budget, args.seed),
            Method::RankOneSampling => {
                run_sampler(method.name(), nominal_j, &budget, args.seed ^ 0x51a1, |n, rng| {
                    baseline_random_rank_one(&m, &policy, &spec, n, rng)
                })
            }
            Method::KernelSampling => {
                run_sampler(method.name(), nominal_j, &budget, args.seed ^ 0x2b0c, |n, rng| {
                    baseline_random_kernel(&m, &policy, &spec, n, rng)
                })
            }
        };
        rows.push(row);
    }

    match args.format {
        Format::Csv => write_csv(&rows, args.out.as_ref())?,
        Format::Json => {
            let report = EvalReport {
                instance: m.name.clone().unwrap_or_else(|| args.mdp.display().to_string()),
                states: m.num_states(),
                actions: m.num_actions(),
                gamma: m.gamma,
                beta: args.beta,
                p: args.p.to_string(),
                tol: args.tol,
                seed: args.seed,
                mode,
                nominal_return: nominal_j,
                rows: &rows,
            };
            write_json(&report, args.out.as_ref())?;
        }
    }

    if rows.iter().any(|r| r.status != "ok") {
        Ok(ExitCode::from(3))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

fn error_row(method: &'static str, message: String) -> MethodRow {
    MethodRow {
        method,
        status: message,
        penalty: None,
        robust_return: None,
        wall_ms: 0.0,
        iterations: None,
        samples: None,
    }
}

fn run_local_search(
    m: &Mdp,
    policy: &Policy,
    spec: &UncertaintySpec,
    nominal_j: f64,
    budget: &Budget,
    seed: u64,
) -> MethodRow {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x10ca);
    let t = Instant::now();
    let outcome = match budget {
        Budget::Samples(n) => {
            let restarts = (n / 1_000).max(1);
            local_search_bk(m, policy, spec, restarts, LOCAL_ITERS, &mut rng)
                .map(|(penalty, _)| (penalty, restarts))
        }
        Budget::TimeMs(ms) => {
            let mut best = f64::NEG_INFINITY;
            let mut restarts = 0usize;
            let result = loop {
                match local_search_bk(m, policy, spec, 1, LOCAL_ITERS, &mut rng) {
                    Ok((penalty, _)) => {
                        best = best.max(penalty);
                        restarts += 1;
                    }
                    Err(e) => break Err(e),
                }
                if t.elapsed().as_secs_f64() * 1e3 >= *ms {
                    break Ok(());
                }
            };
            result.map(|()| (best, restarts))
        }
    };
    let wall_ms = t.elapsed().as_secs_f64() * 1e3;
    match outcome {
        Ok((penalty, restarts)) => MethodRow {
            method: "local_bk",
            status: "ok".into(),
            penalty: Some(penalty),
            robust_return: Some(nominal_j - penalty),
            wall_ms,
            iterations: Some(restarts),
            samples: None,
        },
        Err(e) => error_row("local_bk", e.to_string()),
    }
}

fn run_sampler<F>(
    method: &'static str,
    nominal_j: f64,
    budget: &Budget,
    seed: u64,
    mut chunk: F,
) -> MethodRow
where
    F: FnMut(usize, &mut ChaCha8Rng) -> rmdp_core::Result<BaselineOutcome>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = Instant::now();
    let mut best = f64::INFINITY;
    let mut drawn = 0usize;
    let result = match budget {
        Budget::Samples(n) => chunk(*n, &mut rng).map(|out| {
            best = out.best_return;
            drawn = *n;
        }),
        Budget::TimeMs(ms) => loop {
            match chunk(CHUNK, &mut rng) {
                Ok(out) => {
                    best = best.min(out.best_return);
                    drawn += CHUNK;
                }
                Err(e) => break Err(e),
            }
            if t.elapsed().as_secs_f64() * 1e3 >= *ms {
                break Ok(());
            }
        },
    };
    let wall_ms = t.elapsed().as_secs_f64() * 1e3;
    match result {
        Ok(()) => MethodRow {
            method,
            status: "ok".into(),
            penalty: Some(nominal_j - best),
            robust_return: Some(best),
            wall_ms,
            iterations: None,
            samples: Some(drawn),
        },
        Err(e) => error_row(method, e.to_string()),
    }
}
