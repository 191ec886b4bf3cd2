//! `rmdp` — generate random MDP instances, evaluate policies against
//! coupled transition uncertainty with four comparable methods, improve
//! policies by robust gradient ascent, and benchmark the constrained-norm
//! solvers.
//!
//! Exit codes: 0 success, 2 invalid input (bad flags, malformed or
//! inconsistent files), 3 when a computation failed (individual evaluation
//! methods report their failure in the output and still exit 3).

mod eval;
mod generate;
mod improve;
mod normbench;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rmdp_core::NormOrder;

use output::Format;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments or input files; exit code 2.
    #[error("{0}")]
    Validation(String),
    /// A computation or output write failed; exit code 3.
    #[error("{0}")]
    Run(String),
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Validation(_) => ExitCode::from(2),
            CliError::Run(_) => ExitCode::from(3),
        }
    }
}

fn parse_norm_order(s: &str) -> Result<NormOrder, String> {
    s.parse::<NormOrder>().map_err(|e| e.to_string())
}

/// The four evaluation methods, compared under a shared budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Bisection on the penalty fixed point (certified).
    #[value(name = "binary_search")]
    BinarySearch,
    /// Projected-gradient local search over rank-one perturbations.
    #[value(name = "local_bk")]
    LocalBk,
    /// Random rank-one perturbations scored in closed form.
    #[value(name = "rank_one_sampling")]
    RankOneSampling,
    /// Random kernels from the uncertainty ball, solved directly.
    #[value(name = "kernel_sampling")]
    KernelSampling,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::BinarySearch => "binary_search",
            Method::LocalBk => "local_bk",
            Method::RankOneSampling => "rank_one_sampling",
            Method::KernelSampling => "kernel_sampling",
        }
    }
}

#[derive(Parser)]
#[command(name = "rmdp", version, about = "Robust MDP evaluation and improvement harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random MDP instance file (deterministic under --seed).
    Gen(GenArgs),
    /// Evaluate a policy's robust return with the requested methods.
    Eval(EvalArgs),
    /// Improve a policy by robust gradient ascent; writes the iteration trace.
    Improve(ImproveArgs),
    /// Benchmark the constrained-norm solvers on Gaussian matrices.
    Normbench(NormbenchArgs),
}

#[derive(Args)]
pub struct GenArgs {
    /// RNG seed; the same seed always yields a byte-identical file.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Number of states.
    #[arg(long, default_value_t = 20)]
    pub states: usize,
    /// Number of actions.
    #[arg(long, default_value_t = 8)]
    pub actions: usize,
    /// Discount factor in (0, 1).
    #[arg(long, default_value_t = 0.9)]
    pub gamma: f64,
    /// Output path for the instance JSON.
    #[arg(long, default_value = "mdp.json")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Instance file produced by `gen` (or hand-written JSON).
    #[arg(long)]
    pub mdp: PathBuf,
    /// Policy file; omitted means the uniform policy.
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// Uncertainty budget β ≥ 0 for the coupled transition ball.
    #[arg(long, default_value_t = 0.01)]
    pub beta: f64,
    /// Ball norm order p ≥ 1 ("inf" accepted).
    #[arg(long, default_value = "2", value_parser = parse_norm_order)]
    pub p: NormOrder,
    /// Bisection tolerance on the bracket width.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Seed for the sampling methods.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Methods to run (comma-separated); default: all four.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    /// Equal-budget mode: give every sampling method exactly this many
    /// draws (restarts scale as samples/1000 for local search). Deterministic.
    #[arg(long, conflicts_with = "budget_ms")]
    pub samples: Option<usize>,
    /// Explicit time budget for the sampling methods, in milliseconds.
    /// Without --samples or --budget-ms, samplers get the bisection's
    /// measured wall time (equal-time comparison).
    #[arg(long)]
    pub budget_ms: Option<u64>,
    /// Output path; omitted writes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Args)]
pub struct ImproveArgs {
    /// Instance file.
    #[arg(long)]
    pub mdp: PathBuf,
    /// Initial policy file; omitted means the uniform policy.
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// Uncertainty budget β ≥ 0.
    #[arg(long, default_value_t = 0.01)]
    pub beta: f64,
    /// Ball norm order p ≥ 1 ("inf" accepted).
    #[arg(long, default_value = "2", value_parser = parse_norm_order)]
    pub p: NormOrder,
    /// Ascent iterations.
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
    /// Base step size; omitted means 0.1·(1−γ).
    #[arg(long)]
    pub alpha0: Option<f64>,
    /// Trace output path (one row per iteration); omitted writes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where to save the improved policy.
    #[arg(long)]
    pub policy_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Args)]
pub struct NormbenchArgs {
    /// Matrix sizes to benchmark (comma-separated).
    #[arg(long, value_delimiter = ',', default_values_t = [50usize, 200, 500])]
    pub sizes: Vec<usize>,
    /// Number of seeded repetitions per size.
    #[arg(long, default_value_t = 20)]
    pub seeds: usize,
    /// Base RNG seed; repetition i at size n uses a stream derived from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Draws for the random-search column.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Constraint radius β.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Output path; omitted writes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

fn dispatch(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Gen(args) => generate::run(&args),
        Command::Eval(args) => eval::run(&args),
        Command::Improve(args) => improve::run(&args),
        Command::Normbench(args) => normbench::run(&args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
