//! Nominal MDP representation, validation, exact evaluation, and file I/O.
//!
//! An MDP is the tuple (S, A, P̂, R, γ, μ). For a policy π the induced chain is
//! `P^π(s'|s) = Σ_a π(a|s) P̂(s'|s,a)` with reward `R^π(s) = Σ_a π(a|s) R(s,a)`.
//! All nominal quantities come from one LU factorization of `I − γP^π`:
//!
//! * value        `v^π = (I − γP^π)⁻¹ R^π`
//! * occupancy    `D^π = (I − γP^π)⁻¹`
//! * occupation   `d^π = (I − γP^π)⁻ᵀ μ`   (sums to 1/(1−γ))
//! * return       `J^π = ⟨μ, v^π⟩ = ⟨d^π, R^π⟩`
//!
//! Direct solves, not iteration: downstream fixed-point tests need these
//! quantities exact to machine precision at desk scale (S ≤ ~1500).

use ndarray::prelude::*;
use ndarray_linalg::{Factorize, Inverse, Solve};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result, Violation};

/// Row-sum / distribution-sum slack accepted on user input.
pub const INPUT_SUM_TOL: f64 = 1e-9;
/// Entry-negativity slack for internal perturbation checks.
pub const KERNEL_ENTRY_TOL: f64 = 1e-12;

/// A finite MDP: kernel P̂ (S×A×S), reward R (S×A), discount γ ∈ [0,1),
/// initial distribution μ (length S).
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    pub kernel: Array3<f64>,
    pub reward: Array2<f64>,
    pub gamma: f64,
    pub mu: Array1<f64>,
    pub name: Option<String>,
}

impl Mdp {
    /// Build and validate; returns `Error::InvalidModel` listing every violation.
    pub fn new(
        kernel: Array3<f64>,
        reward: Array2<f64>,
        gamma: f64,
        mu: Array1<f64>,
    ) -> Result<Self> {
        let m = Mdp { kernel, reward, gamma, mu, name: None };
        let violations = validate_mdp(&m);
        if violations.is_empty() {
            Ok(m)
        } else {
            Err(Error::InvalidModel(violations))
        }
    }

    pub fn num_states(&self) -> usize {
        self.kernel.shape()[0]
    }

    pub fn num_actions(&self) -> usize {
        self.kernel.shape()[1]
    }
}

/// Per-state action distribution π (S×A rows on the simplex).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Policy {
    pub probs: Array2<f64>,
}

impl Policy {
    /// Build and validate row-stochasticity.
    pub fn new(probs: Array2<f64>) -> Result<Self> {
        let p = Policy { probs };
        let violations = p.validate();
        if violations.is_empty() {
            Ok(p)
        } else {
            Err(Error::InvalidModel(violations))
        }
    }

    /// The uniform policy over `num_actions` in each of `num_states`.
    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Policy {
            probs: Array2::from_elem((num_states, num_actions), 1.0 / num_actions as f64),
        }
    }

    pub fn num_states(&self) -> usize {
        self.probs.nrows()
    }

    pub fn num_actions(&self) -> usize {
        self.probs.ncols()
    }

    /// Diagnostic validation: rows must be probability vectors.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (s, row) in self.probs.outer_iter().enumerate() {
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > INPUT_SUM_TOL {
                out.push(Violation {
                    field: "probs",
                    index: format!("({s})"),
                    magnitude: (sum - 1.0).abs(),
                    message: format!("policy row sums to {sum} instead of 1"),
                });
            }
            for (a, &p) in row.iter().enumerate() {
                if p < 0.0 {
                    out.push(Violation {
                        field: "probs",
                        index: format!("({s},{a})"),
                        magnitude: -p,
                        message: format!("negative action probability {p}"),
                    });
                }
            }
        }
        out
    }
}

/// Exact nominal quantities for a fixed (m, π) pair.
#[derive(Debug, Clone)]
pub struct NominalEval {
    /// Value function v^π (length S).
    pub v: Array1<f64>,
    /// Occupancy matrix D^π = (I − γP^π)⁻¹ (S×S).
    pub occupancy: Array2<f64>,
    /// Occupation measure d^π = D^πᵀ μ (length S, sums to 1/(1−γ)).
    pub d: Array1<f64>,
    /// Return J^π = ⟨μ, v^π⟩.
    pub j: f64,
}

/// A candidate worst kernel P̂ − b k^⊤: b ⪰ 0 allocates radius per (s,a),
/// k is a zero-sum direction steering transition mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOnePerturbation {
    pub b: Array2<f64>,
    pub k: Array1<f64>,
}

/// Check every `Mdp` invariant; empty iff the model is valid.
/// Each violation names the field, the index, and the magnitude.
pub fn validate_mdp(m: &Mdp) -> Vec<Violation> {
    let mut out = Vec::new();
    let (s_dim, a_dim, s2_dim) = m.kernel.dim();

    if s2_dim != s_dim {
        out.push(Violation {
            field: "kernel",
            index: "-".into(),
            magnitude: (s2_dim as f64 - s_dim as f64).abs(),
            message: format!("kernel is {s_dim}x{a_dim}x{s2_dim}; last axis must equal first"),
        });
        return out; // shapes broken: the per-row checks below would be misleading
    }
    if m.reward.dim() != (s_dim, a_dim) {
        out.push(Violation {
            field: "reward",
            index: "-".into(),
            magnitude: 0.0,
            message: format!(
                "reward is {:?}, kernel implies ({s_dim},{a_dim})",
                m.reward.dim()
            ),
        });
    }
    if m.mu.len() != s_dim {
        out.push(Violation {
            field: "mu",
            index: "-".into(),
            magnitude: (m.mu.len() as f64 - s_dim as f64).abs(),
            message: format!("mu has length {}, expected {s_dim}", m.mu.len()),
        });
    }

    for s in 0..s_dim {
        for a in 0..a_dim {
            let row = m.kernel.slice(s![s, a, ..]);
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > INPUT_SUM_TOL {
                out.push(Violation {
                    field: "kernel",
                    index: format!("({s},{a})"),
                    magnitude: (sum - 1.0).abs(),
                    message: format!("kernel row sums to {sum} instead of 1"),
                });
            }
            for (s2, &p) in row.iter().enumerate() {
                if p < -KERNEL_ENTRY_TOL {
                    out.push(Violation {
                        field: "kernel",
                        index: format!("({s},{a},{s2})"),
                        magnitude: -p,
                        message: format!("negative transition probability {p}"),
                    });
                }
            }
        }
    }

    let mu_sum: f64 = m.mu.sum();
    if (mu_sum - 1.0).abs() > INPUT_SUM_TOL {
        out.push(Violation {
            field: "mu",
            index: "-".into(),
            magnitude: (mu_sum - 1.0).abs(),
            message: format!("mu sums to {mu_sum} instead of 1"),
        });
    }
    for (s, &p) in m.mu.iter().enumerate() {
        if p < 0.0 {
            out.push(Violation {
                field: "mu",
                index: format!("({s})"),
                magnitude: -p,
                message: format!("negative initial probability {p}"),
            });
        }
    }

    if !(0.0..1.0).contains(&m.gamma) {
        out.push(Violation {
            field: "gamma",
            index: "-".into(),
            magnitude: (m.gamma - 1.0).max(-m.gamma).max(0.0),
            message: format!("discount {} outside [0,1)", m.gamma),
        });
    }

    out
}

fn check_policy_dims(op: &'static str, m: &Mdp, pi: &Policy) -> Result<()> {
    if pi.probs.dim() != (m.num_states(), m.num_actions()) {
        return Err(Error::DimensionMismatch {
            op,
            detail: format!(
                "policy is {:?}, MDP expects ({},{})",
                pi.probs.dim(),
                m.num_states(),
                m.num_actions()
            ),
        });
    }
    Ok(())
}

/// The policy-induced chain and reward: P^π (S×S row-stochastic) and R^π (length S).
pub fn policy_matrices(m: &Mdp, pi: &Policy) -> Result<(Array2<f64>, Array1<f64>)> {
    check_policy_dims("policy_matrices", m, pi)?;
    let s_dim = m.num_states();
    let a_dim = m.num_actions();
    let mut p_pi = Array2::zeros((s_dim, s_dim));
    for s in 0..s_dim {
        let mut row = p_pi.row_mut(s);
        for a in 0..a_dim {
            let w = pi.probs[(s, a)];
            if w != 0.0 {
                row.scaled_add(w, &m.kernel.slice(s![s, a, ..]));
            }
        }
    }
    let r_pi = (&pi.probs * &m.reward).sum_axis(Axis(1));
    Ok((p_pi, r_pi))
}

/// Apply the policy-averaging operator H^π to a state-action matrix:
/// `(H^π x)(s) = Σ_a π(a|s) x(s,a)`.
pub fn policy_average(pi: &Policy, x: ArrayView2<f64>) -> Result<Array1<f64>> {
    if x.dim() != pi.probs.dim() {
        return Err(Error::DimensionMismatch {
            op: "policy_average",
            detail: format!("input is {:?}, policy is {:?}", x.dim(), pi.probs.dim()),
        });
    }
    Ok((&pi.probs * &x).sum_axis(Axis(1)))
}

/// Evaluate all nominal quantities by direct solve of `I − γP^π`.
pub fn nominal_eval(m: &Mdp, pi: &Policy) -> Result<NominalEval> {
    let (p_pi, r_pi) = policy_matrices(m, pi)?;
    let s_dim = m.num_states();
    let mut a = Array2::eye(s_dim);
    a.scaled_add(-m.gamma, &p_pi);
    let f = a.factorize()?;
    let v = f.solve(&r_pi)?;
    let d = f.solve_t(&m.mu)?;
    let occupancy = f.inv()?;
    let j = m.mu.dot(&v);
    Ok(NominalEval { v, occupancy, d, j })
}

/// Q-values for a reward-like input x: `Q(s,a) = x(s,a) + γ Σ_{s'} P̂(s'|s,a) v_x(s')`
/// with `v_x = D^π (H^π x)`. Satisfies `Σ_a π(a|s) Q(s,a) = v_x(s)`.
pub fn q_value(m: &Mdp, pi: &Policy, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    let eval = nominal_eval(m, pi)?;
    q_value_with(m, pi, &eval, x)
}

/// `q_value` against a precomputed `NominalEval` (hot path for gradients).
pub fn q_value_with(
    m: &Mdp,
    pi: &Policy,
    eval: &NominalEval,
    x: ArrayView2<f64>,
) -> Result<Array2<f64>> {
    let x_pi = policy_average(pi, x)?;
    let v_x = eval.occupancy.dot(&x_pi);
    let (s_dim, a_dim) = (m.num_states(), m.num_actions());
    // (S·A)×S view of the kernel applied to v_x, reshaped back to S×A.
    let flat = m
        .kernel
        .view()
        .into_shape_with_order((s_dim * a_dim, s_dim))
        .expect("kernel is contiguous");
    let future = flat
        .dot(&v_x)
        .into_shape_with_order((s_dim, a_dim))
        .expect("shape product matches");
    Ok(&x + &(future * m.gamma))
}

/// Realize the kernel P̂ − b k^⊤. Negative entries are a hard error, never
/// clipped: clipping would silently break the rank-one return algebra.
pub fn apply_perturbation(m: &Mdp, delta: &RankOnePerturbation) -> Result<Mdp> {
    let (s_dim, a_dim) = (m.num_states(), m.num_actions());
    if delta.b.dim() != (s_dim, a_dim) || delta.k.len() != s_dim {
        return Err(Error::DimensionMismatch {
            op: "apply_perturbation",
            detail: format!(
                "b is {:?} and k has length {}; MDP expects ({s_dim},{a_dim}) and {s_dim}",
                delta.b.dim(),
                delta.k.len()
            ),
        });
    }
    let mut kernel = m.kernel.clone();
    for s in 0..s_dim {
        for a in 0..a_dim {
            let b_sa = delta.b[(s, a)];
            if b_sa == 0.0 {
                continue;
            }
            let mut row = kernel.slice_mut(s![s, a, ..]);
            row.scaled_add(-b_sa, &delta.k);
            for (s2, &p) in row.iter().enumerate() {
                if p < -KERNEL_ENTRY_TOL {
                    // Largest scale t with P̂ − t·(b/‖b‖)k^⊤ nonnegative on this row,
                    // reported in radius units of ‖b‖ (k is already in its unit set).
                    let b_norm = delta.b.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let mut t_max = f64::INFINITY;
                    for (j, &kj) in delta.k.iter().enumerate() {
                        let denom = b_sa * kj;
                        if denom > 0.0 {
                            t_max = t_max.min(m.kernel[(s, a, j)] / denom);
                        }
                    }
                    return Err(Error::NegativeKernelEntry {
                        state: s,
                        action: a,
                        next: s2,
                        value: p,
                        max_feasible: t_max * b_norm,
                    });
                }
            }
        }
    }
    Ok(Mdp {
        kernel,
        reward: m.reward.clone(),
        gamma: m.gamma,
        mu: m.mu.clone(),
        name: m.name.clone(),
    })
}

// ---------------------------------------------------------------------------
// File I/O: one JSON document per model/policy, decimal numerals, validated on
// load. serde_json prints shortest round-trip decimals, so save → load → save
// is byte-stable.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct MdpFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    gamma: f64,
    mu: Vec<f64>,
    #[serde(rename = "R")]
    reward: Vec<Vec<f64>>,
    #[serde(rename = "P")]
    kernel: Vec<Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct PolicyFile {
    pi: Vec<Vec<f64>>,
}

fn parse_err(path: &Path, detail: impl std::fmt::Display) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        detail: detail.to_string(),
    }
}

fn rows_to_array2(op: &str, path: &Path, rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(parse_err(
                path,
                format!("{op} row {i} has length {}, expected {ncols}", r.len()),
            ));
        }
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((nrows, ncols), flat)
        .map_err(|e| parse_err(path, format!("{op}: {e}")))
}

/// Load and validate an MDP document.
pub fn load_mdp(path: impl AsRef<Path>) -> Result<Mdp> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let file: MdpFile = serde_json::from_str(&text).map_err(|e| parse_err(path, e))?;

    let s_dim = file.mu.len();
    let a_dim = file.reward.first().map_or(0, |r| r.len());
    if s_dim == 0 || a_dim == 0 {
        return Err(parse_err(path, "empty state or action space"));
    }
    let reward = rows_to_array2("R", path, &file.reward)?;
    if file.kernel.len() != s_dim {
        return Err(parse_err(
            path,
            format!("P has {} states, mu has {s_dim}", file.kernel.len()),
        ));
    }
    let mut kernel = Array3::zeros((s_dim, a_dim, s_dim));
    for (s, block) in file.kernel.iter().enumerate() {
        if block.len() != a_dim {
            return Err(parse_err(
                path,
                format!("P[{s}] has {} actions, expected {a_dim}", block.len()),
            ));
        }
        for (a, row) in block.iter().enumerate() {
            if row.len() != s_dim {
                return Err(parse_err(
                    path,
                    format!("P[{s}][{a}] has length {}, expected {s_dim}", row.len()),
                ));
            }
            for (s2, &p) in row.iter().enumerate() {
                kernel[(s, a, s2)] = p;
            }
        }
    }

    let mut m = Mdp::new(kernel, reward, file.gamma, Array1::from(file.mu))?;
    m.name = file.name;
    Ok(m)
}

/// Write an MDP document (pretty-printed JSON, trailing newline).
pub fn save_mdp(m: &Mdp, path: impl AsRef<Path>) -> Result<()> {
    let file = MdpFile {
        name: m.name.clone(),
        gamma: m.gamma,
        mu: m.mu.to_vec(),
        reward: m.reward.outer_iter().map(|r| r.to_vec()).collect(),
        kernel: m
            .kernel
            .outer_iter()
            .map(|block| block.outer_iter().map(|r| r.to_vec()).collect())
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("serializable");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Load and validate a policy document (key `pi`).
pub fn load_policy(path: impl AsRef<Path>) -> Result<Policy> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let file: PolicyFile = serde_json::from_str(&text).map_err(|e| parse_err(path, e))?;
    Policy::new(rows_to_array2("pi", path, &file.pi)?)
}

/// Write a policy document.
pub fn save_policy(pi: &Policy, path: impl AsRef<Path>) -> Result<()> {
    let file = PolicyFile {
        pi: pi.probs.outer_iter().map(|r| r.to_vec()).collect(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("serializable");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
