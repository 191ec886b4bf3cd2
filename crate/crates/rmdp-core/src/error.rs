//! Error and diagnostic types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// A single validation violation: which field, where, and by how much.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Offending field, e.g. `"kernel"`, `"mu"`, `"gamma"`, `"probs"`.
    pub field: &'static str,
    /// Index into the field, rendered as text, e.g. `"(2,0)"` or `"-"`.
    pub index: String,
    /// Magnitude of the violation (distance from the feasible value).
    pub magnitude: f64,
    /// Human-readable description.
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}[{}]: {} (magnitude {:.3e})",
            self.field, self.index, self.message, self.magnitude
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    DimensionMismatch { op: &'static str, detail: String },

    /// Construction or load of a model/policy that fails validation.
    #[error("invalid model: {} violation(s); first: {}", .0.len(), .0.first().map(|v| v.to_string()).unwrap_or_default())]
    InvalidModel(Vec<Violation>),

    /// A rank-one perturbation drives a kernel entry negative. Carries the
    /// largest radius that would have kept the offending row nonnegative.
    #[error(
        "kernel entry ({state},{action},{next}) becomes {value:.3e} < 0 under the rank-one \
         perturbation; largest feasible radius for this row is {max_feasible:.4e}"
    )]
    NegativeKernelEntry {
        state: usize,
        action: usize,
        next: usize,
        value: f64,
        max_feasible: f64,
    },

    /// 1 + γ⟨k, v_b⟩ must stay strictly positive for the rank-one return
    /// algebra to hold; a non-positive value signals an invalid kernel.
    #[error("rank-one denominator 1 + \u{3b3}\u{27e8}k, v_b\u{27e9} = {0:.3e} is not strictly positive")]
    InvalidDenominator(f64),

    /// The bisection bracket is invalid at the start (cannot occur when F ≥ 0).
    #[error("bisection bracket invalid at start: F(0) = {f0:.3e} < 0")]
    NonBracketed { f0: f64 },

    /// A^T A has no strictly positive eigenvalue (the matrix is numerically zero).
    #[error("degenerate matrix: A^T A has no strictly positive eigenvalue")]
    DegenerateMatrix,

    /// Re-evaluating the recovered worst kernel disagrees with the certificate.
    #[error(
        "worst-kernel consistency check failed: |{recovered:.9} - {expected:.9}| = {gap:.3e} > {tol:.3e}"
    )]
    ConsistencyFailure {
        recovered: f64,
        expected: f64,
        gap: f64,
        tol: f64,
    },

    /// Rejection sampling for valid kernels ran out of retries.
    #[error(
        "kernel sampling exhausted {attempts} retries for one sample \
         (radius too large relative to the smallest kernel entries)"
    )]
    SamplingExhausted { attempts: usize },

    /// The regularized rectangular fixed-point iteration is diverging.
    #[error(
        "rectangular fixed-point iteration diverging: residual grew for {count} \
         consecutive iterations (radius too large for contraction)"
    )]
    NonContraction { count: usize },

    #[error("parse error in {path}: {detail}")]
    Parse { path: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}
