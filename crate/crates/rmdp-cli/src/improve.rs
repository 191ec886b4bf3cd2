//! `rmdp improve`: robust gradient ascent, one trace row per iteration.

use std::process::ExitCode;

use rmdp_core::{load_mdp, load_policy, rpg_run, save_policy, Policy, RpgConfig, UncertaintySpec};
use serde::Serialize;

use crate::output::{file_error, write_csv, write_json, Format};
use crate::{CliError, ImproveArgs};

#[derive(Serialize)]
struct TraceRow {
    iter: usize,
    robust_return: f64,
    penalty: f64,
    step: f64,
    eval_iters: usize,
    wall_ms: f64,
}

pub fn run(args: &ImproveArgs) -> Result<ExitCode, CliError> {
    if args.beta < 0.0 {
        return Err(CliError::Validation("--beta must be nonnegative".into()));
    }
    if args.iters == 0 {
        return Err(CliError::Validation("--iters must be at least 1".into()));
    }
    if let Some(alpha0) = args.alpha0 {
        if !alpha0.is_finite() || alpha0 <= 0.0 {
            return Err(CliError::Validation("--alpha0 must be positive".into()));
        }
    }

    let m = load_mdp(&args.mdp).map_err(|e| file_error(&args.mdp, e))?;
    let initial = match &args.policy {
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
    let config = RpgConfig { max_iters: args.iters, alpha0: args.alpha0, ..RpgConfig::default() };
    let trace = rpg_run(&m, &spec, &initial, &config);

    let rows: Vec<TraceRow> = trace
        .rows
        .iter()
        .map(|r| TraceRow {
            iter: r.iter,
            robust_return: r.robust_return,
            penalty: r.penalty,
            step: r.step,
            eval_iters: r.eval_iters,
            wall_ms: r.wall_ms,
        })
        .collect();

    // A halt still writes everything gathered so far before reporting failure.
    match args.format {
        Format::Csv => write_csv(&rows, args.out.as_ref())?,
        Format::Json => write_json(&rows, args.out.as_ref())?,
    }
    if let Some(path) = &args.policy_out {
        save_policy(&trace.final_policy, path)
            .map_err(|e| CliError::Run(format!("writing policy: {e}")))?;
    }

    if let Some(reason) = &trace.halted {
        eprintln!("ascent halted after {} iteration(s): {reason}", rows.len());
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}
