//! `rmdp gen`: seeded random instance files.

use std::process::ExitCode;

use rmdp_core::{random_mdp, save_mdp};

use crate::{CliError, GenArgs};

pub fn run(args: &GenArgs) -> Result<ExitCode, CliError> {
    if args.states < 2 {
        return Err(CliError::Validation("--states must be at least 2".into()));
    }
    if args.actions < 1 {
        return Err(CliError::Validation("--actions must be at least 1".into()));
    }
    if !(args.gamma > 0.0 && args.gamma < 1.0) {
        return Err(CliError::Validation("--gamma must lie strictly in (0, 1)".into()));
    }

    let m = random_mdp(args.states, args.actions, args.gamma, args.seed);
    save_mdp(&m, &args.out).map_err(|e| CliError::Run(format!("writing instance: {e}")))?;
    eprintln!(
        "wrote {} ({} states, {} actions, seed {})",
        args.out.display(),
        args.states,
        args.actions,
        args.seed
    );
    Ok(ExitCode::SUCCESS)
}
