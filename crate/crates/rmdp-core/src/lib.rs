//! Robust Markov decision process toolkit: policy evaluation and policy
//! improvement when the transition kernel is only known up to an L_p ball.
//!
//! The uncertainty set couples all state-action rows through one global
//! budget β (it is *not* a product of per-row balls), which rules out the
//! usual rectangular dynamic-programming shortcuts. The crate instead
//! computes the robust return through a scalar fixed point: the adversary's
//! value-loss penalty λ is characterized as the fixed point of a
//! norm-maximization map, bracketed by binary search ([`robust_eval`]), with
//! the inner maximization handled either in closed form (p = 2, via the
//! spectral machinery in [`constrained_norm`]) or by sampling plus projected
//! ascent. A worst-case kernel of rank-one displacement form is recovered
//! from the fixed point, and a projected-gradient loop on the policy simplex
//! ([`robust_grad`]) improves the policy against that adversary.
//!
//! Module map:
//! * [`mdp`] — model/policy containers, validation, nominal evaluation.
//! * [`lp_geometry`] — L_p norms, generalized standard deviation, dual
//!   vectors over the zero-sum ball, constraint-set samplers.
//! * [`constrained_norm`] — max ‖Ax‖₂ over the nonnegative L₂ ball:
//!   eigenstructure-guided approximations with certified ratio bounds,
//!   local refinement, and a random-search baseline.
//! * [`robust_eval`] — penalty operator, bisection fixed point, worst-kernel
//!   recovery, rank-one penalty identity, rectangular closed forms, sampling
//!   baselines.
//! * [`robust_grad`] — robust policy gradient and projected ascent loop.
//! * [`instances`] — seeded random instance generators shared by the CLI,
//!   tests, and benchmarks.

pub mod constrained_norm;
pub mod error;
pub mod instances;
pub mod lp_geometry;
pub mod mdp;
pub mod robust_eval;
pub mod robust_grad;

pub use constrained_norm::{
    local_refine, random_search, spectral_bounds, spectral_solve, SpectralBounds, SpectralOrder,
    SpectralSolution,
};
pub use error::{Error, Result, Violation};
pub use instances::{gaussian_matrix, random_mdp, random_policy};
pub use lp_geometry::{
    dual_vector, gstd, lp_norm, mean_project, sample_b, sample_k, ConstraintSets, NormOrder,
};
pub use mdp::{
    apply_perturbation, load_mdp, load_policy, nominal_eval, policy_average, policy_matrices,
    q_value, q_value_with, save_mdp, save_policy, Mdp, NominalEval, Policy, RankOnePerturbation,
};
pub use robust_eval::{
    baseline_random_kernel, baseline_random_rank_one, binary_search_evaluate, dual_penalty_direct,
    dual_penalty_with, local_search_bk, penalty_operator, recover_worst_kernel, rect_robust_eval,
    BaselineOutcome, BaselineWitness, BisectionStep, PenaltyCertificate, RectRobustEval,
    StageTimes, UncertaintyShape, UncertaintySpec,
};
pub use robust_grad::{
    policy_gradient, rpg_run, simplex_project, GradientReport, RpgConfig, RpgRow, RpgTrace,
};
