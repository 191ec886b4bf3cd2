//! `rmdp normbench`: constrained-norm solver comparison on seeded Gaussian
//! matrices — solution value and wall time for the spectral method, its
//! locally refined solution, and plain random search.

use std::process::ExitCode;
use std::time::Instant;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rmdp_core::{gaussian_matrix, local_refine, random_search, spectral_solve, SpectralOrder};
use serde::Serialize;

use crate::output::{write_csv, write_json, Format};
use crate::{CliError, NormbenchArgs};

#[derive(Serialize)]
struct BenchRow {
    n: usize,
    seed: usize,
    spectral_value: f64,
    spectral_ms: f64,
    refined_value: f64,
    refined_ms: f64,
    sampler_value: f64,
    sampler_ms: f64,
}

pub fn run(args: &NormbenchArgs) -> Result<ExitCode, CliError> {
    if args.sizes.is_empty() || args.sizes.iter().any(|&n| n < 2) {
        return Err(CliError::Validation("--sizes must list sizes of at least 2".into()));
    }
    if args.seeds == 0 {
        return Err(CliError::Validation("--seeds must be at least 1".into()));
    }
    if args.samples == 0 {
        return Err(CliError::Validation("--samples must be at least 1".into()));
    }
    if !args.beta.is_finite() || args.beta <= 0.0 {
        return Err(CliError::Validation("--beta must be positive".into()));
    }

    let mut rows = Vec::with_capacity(args.sizes.len() * args.seeds);
    for &n in &args.sizes {
        for seed in 0..args.seeds {
            let stream = args
                .seed
                .wrapping_add(1_000_003u64.wrapping_mul(n as u64))
                .wrapping_add(seed as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(stream);
            let a = gaussian_matrix(n, n, &mut rng);

            let t = Instant::now();
            let spectral = spectral_solve(a.view(), args.beta, SpectralOrder::First)
                .map_err(|e| CliError::Run(format!("size {n}, seed {seed}: {e}")))?;
            let spectral_ms = t.elapsed().as_secs_f64() * 1e3;

            let t = Instant::now();
            let refined = local_refine(a.view(), args.beta, spectral.x.view());
            let refined_ms = t.elapsed().as_secs_f64() * 1e3;

            let t = Instant::now();
            let (sampler_value, _) = random_search(a.view(), args.beta, args.samples, &mut rng);
            let sampler_ms = t.elapsed().as_secs_f64() * 1e3;

            rows.push(BenchRow {
                n,
                seed,
                spectral_value: spectral.value,
                spectral_ms,
                refined_value: refined.value,
                refined_ms,
                sampler_value,
                sampler_ms,
            });
        }
    }

    match args.format {
        Format::Csv => write_csv(&rows, args.out.as_ref())?,
        Format::Json => write_json(&rows, args.out.as_ref())?,
    }
    Ok(ExitCode::SUCCESS)
}
