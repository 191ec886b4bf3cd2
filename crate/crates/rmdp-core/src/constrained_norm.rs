//! Maximization of ‖Ax‖₂ over the nonnegative Euclidean ball
//! {x ⪰ 0, ‖x‖₂ ≤ β} — the inner subroutine of the robust-evaluation
//! penalty operator.
//!
//! Without the sign constraint the maximum is β·σ_max(A); the nonnegativity
//! cut makes the problem hard in general, but the eigenstructure of A^⊤A
//! still pins it down tightly. The solver builds candidates from the
//! positive parts of eigenvectors:
//!
//! * zero order — the positive part of the top eigenvector alone, which is
//!   already *half-good*: its squared value is at least β²λ₁/2, hence at
//!   least half the squared optimum;
//! * first order — scores every eigenvector by λ_i⟨v_i, u_i⟩ and keeps the
//!   best candidate, never dropping below zero order;
//! * second order — additionally scans pairwise mixtures t·v_i + (1−t)·v_j
//!   on a fixed 33-point grid before taking positive parts.
//!
//! [`spectral_bounds`] certifies a bracket around the true maximum from the
//! same eigendecomposition, [`local_refine`] polishes any feasible point by
//! projected gradient ascent (exact Euclidean projection onto the cap), and
//! [`random_search`] provides the sampling baseline the spectral methods are
//! measured against.

use ndarray::prelude::*;
use ndarray_linalg::{Eigh, UPLO};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Number of mixture points per eigenvector pair in the second-order scan.
const PAIR_GRID: usize = 33;
/// Positive parts with smaller norm than this are treated as zero.
const ZERO_DIRECTION: f64 = 1e-12;

/// Candidate-construction depth for [`spectral_solve`]; `Refined` marks
/// outputs of [`local_refine`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SpectralOrder {
    Zero,
    First,
    Second,
    Refined,
}

impl std::fmt::Display for SpectralOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SpectralOrder::Zero => "zero",
            SpectralOrder::First => "first",
            SpectralOrder::Second => "second",
            SpectralOrder::Refined => "refined",
        };
        f.write_str(s)
    }
}

/// Eigendecomposition of A^⊤A, eigenvalues descending, eigenvectors as
/// columns (sign-normalized so each positive part carries at least half the
/// mass).
#[derive(Debug, Clone)]
pub struct EigenData {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
}

/// A feasible point and its objective value.
#[derive(Debug, Clone)]
pub struct SpectralSolution {
    /// Maximizer candidate: entrywise ≥ 0, ‖x‖₂ ≤ β.
    pub x: Array1<f64>,
    /// ‖Ax‖₂ — always a valid lower bound on the constrained maximum.
    pub value: f64,
    pub order: SpectralOrder,
    /// Present on spectral solutions, absent on refined ones.
    pub eigen: Option<EigenData>,
}

/// Certified bracket on max ‖Ax‖₂: `lower` ≤ true max ≤ `upper()`.
#[derive(Debug, Clone, Copy)]
pub struct SpectralBounds {
    /// β√(λ₁/2) — what the zero-order candidate already guarantees.
    pub lower: f64,
    /// β√λ₁ — the unconstrained operator norm.
    pub upper_zero: f64,
    /// β√(Σ λ_i c_i) with greedy capped squared-overlap weights c_i;
    /// never exceeds `upper_zero`.
    pub upper_first: f64,
}

impl SpectralBounds {
    pub fn upper(&self) -> f64 {
        self.upper_zero.min(self.upper_first)
    }
}

fn positive_part(v: ArrayView1<f64>) -> Array1<f64> {
    v.mapv(|x| x.max(0.0))
}

fn l2(v: ArrayView1<f64>) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Eigendecomposition of A^⊤A with eigenvalues descending and every
/// eigenvector flipped so ‖v⁺‖₂ ≥ ‖v⁻‖₂ (ties keep the solver's sign).
fn eigen_descending(a: ArrayView2<f64>) -> Result<EigenData> {
    let g = a.t().dot(&a);
    let (vals, vecs) = g.eigh(UPLO::Lower)?;
    let n = vals.len();
    let values = Array1::from_shape_fn(n, |i| vals[n - 1 - i]);
    let mut vectors = Array2::zeros((n, n));
    for i in 0..n {
        let col = vecs.column(n - 1 - i);
        let pos: f64 = col.iter().map(|&x| x.max(0.0).powi(2)).sum();
        let neg: f64 = col.iter().map(|&x| (-x).max(0.0).powi(2)).sum();
        let sign = if neg > pos { -1.0 } else { 1.0 };
        vectors.column_mut(i).assign(&col.mapv(|x| sign * x));
    }
    Ok(EigenData { values, vectors })
}

/// Best single coordinate direction — the fallback when every eigenvector
/// positive part degenerates (cannot happen after sign normalization, kept
/// as a safety net).
fn best_coordinate(a: ArrayView2<f64>) -> Array1<f64> {
    let n = a.ncols();
    let mut best = 0;
    let mut best_norm = -1.0;
    for j in 0..n {
        let norm = l2(a.column(j));
        if norm > best_norm {
            best = j;
            best_norm = norm;
        }
    }
    let mut e = Array1::zeros(n);
    e[best] = 1.0;
    e
}

/// max ‖Ax‖₂ over {x ⪰ 0, ‖x‖₂ ≤ β} via eigenstructure candidates.
///
/// The returned value is always attained by the returned `x`, hence a valid
/// lower bound; it is exact whenever the top eigenvector of A^⊤A is
/// sign-consistent (in particular for entrywise-positive or rank-one A).
/// Deeper orders never return less than shallower ones.
pub fn spectral_solve(
    a: ArrayView2<f64>,
    beta: f64,
    order: SpectralOrder,
) -> Result<SpectralSolution> {
    assert!(beta > 0.0, "radius must be positive");
    assert!(
        order != SpectralOrder::Refined,
        "refined solutions come from local_refine"
    );
    let n = a.ncols();
    let eigen = eigen_descending(a)?;
    // NaN-safe: a non-finite top eigenvalue is just as degenerate as a
    // nonpositive one.
    if !eigen.values[0].is_finite() || eigen.values[0] <= 0.0 {
        return Err(Error::DegenerateMatrix);
    }

    // Unit candidates u_i = v_i⁺ / ‖v_i⁺‖ with degenerate directions skipped.
    let units: Vec<Option<Array1<f64>>> = (0..n)
        .map(|i| {
            let pos = positive_part(eigen.vectors.column(i));
            let norm = l2(pos.view());
            (norm > ZERO_DIRECTION).then(|| pos / norm)
        })
        .collect();

    let mut candidates: Vec<Array1<f64>> = Vec::new();
    if let Some(u1) = &units[0] {
        candidates.push(u1.clone());
    }
    if order >= SpectralOrder::First {
        let mut best_score = f64::NEG_INFINITY;
        let mut best_j = None;
        for (i, unit) in units.iter().enumerate() {
            if let Some(u) = unit {
                let score = eigen.values[i] * u.dot(&eigen.vectors.column(i));
                if score > best_score {
                    best_score = score;
                    best_j = Some(i);
                }
            }
        }
        if let Some(j) = best_j {
            candidates.push(units[j].clone().expect("scored index is present"));
        }
    }
    if order >= SpectralOrder::Second {
        for unit in units.iter().flatten() {
            candidates.push(unit.clone());
        }
        for i in 0..n {
            for j in (i + 1)..n {
                for g in 1..PAIR_GRID - 1 {
                    let t = g as f64 / (PAIR_GRID - 1) as f64;
                    let mix = &eigen.vectors.column(i) * t
                        + &eigen.vectors.column(j) * (1.0 - t);
                    let pos = positive_part(mix.view());
                    let norm = l2(pos.view());
                    if norm > ZERO_DIRECTION {
                        candidates.push(pos / norm);
                    }
                }
            }
        }
    }
    if candidates.is_empty() {
        candidates.push(best_coordinate(a));
    }

    let mut best_unit = &candidates[0];
    let mut best_norm = l2(a.dot(best_unit).view());
    for cand in &candidates[1..] {
        let norm = l2(a.dot(cand).view());
        if norm > best_norm {
            best_norm = norm;
            best_unit = cand;
        }
    }

    Ok(SpectralSolution {
        x: best_unit * beta,
        value: beta * best_norm,
        order,
        eigen: Some(eigen),
    })
}

/// Certified bracket on max ‖Ax‖₂ over {x ⪰ 0, ‖x‖₂ ≤ β}.
///
/// The lower bound is the half-good guarantee of the zero-order candidate;
/// `upper_zero` drops the sign constraint entirely; `upper_first` solves the
/// relaxation max Σλ_i c_i over 0 ≤ c_i ≤ ‖v_i⁺‖², Σc_i ≤ 1 (each overlap
/// ⟨v_i, x⟩² is capped by the positive-part mass, and the overlaps of a unit
/// vector sum to one), whose greedy solution in descending-λ order is
/// optimal.
pub fn spectral_bounds(a: ArrayView2<f64>, beta: f64) -> Result<SpectralBounds> {
    assert!(beta >= 0.0, "radius must be nonnegative");
    let eigen = eigen_descending(a)?;
    let top = eigen.values[0].max(0.0);
    let mut remaining = 1.0;
    let mut weighted = 0.0;
    for (i, &lam) in eigen.values.iter().enumerate() {
        if remaining <= 0.0 || lam <= 0.0 {
            break;
        }
        let pos = positive_part(eigen.vectors.column(i));
        let cap = pos.iter().map(|x| x * x).sum::<f64>();
        let c = cap.min(remaining);
        weighted += lam * c;
        remaining -= c;
    }
    Ok(SpectralBounds {
        lower: beta * (top / 2.0).sqrt(),
        upper_zero: beta * top.sqrt(),
        upper_first: beta * weighted.sqrt(),
    })
}

/// Exact Euclidean projection onto {x ⪰ 0, ‖x‖₂ ≤ β}: clip the negatives,
/// then rescale radially if outside the ball.
fn project_cap(x: ArrayView1<f64>, beta: f64) -> Array1<f64> {
    let mut y = positive_part(x);
    let norm = l2(y.view());
    if norm > beta {
        y *= beta / norm;
    }
    y
}

/// Projected gradient ascent on ‖Ax‖₂² from `x0`, with backtracking step
/// control. Monotone: the returned value is never below the start's.
pub fn local_refine(a: ArrayView2<f64>, beta: f64, x0: ArrayView1<f64>) -> SpectralSolution {
    assert!(beta > 0.0, "radius must be positive");
    let g = a.t().dot(&a);
    let mut x = project_cap(x0, beta);
    let mut f = x.dot(&g.dot(&x));
    let mut step = 1.0;
    for _ in 0..500 {
        let grad = g.dot(&x) * 2.0;
        let mut improvement = 0.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = project_cap((&x + &(&grad * step)).view(), beta);
            let fc = cand.dot(&g.dot(&cand));
            if fc > f {
                improvement = (fc - f) / f.max(f64::MIN_POSITIVE);
                x = cand;
                f = fc;
                step *= 1.5;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted || improvement < 1e-10 {
            break;
        }
    }
    SpectralSolution {
        value: f.max(0.0).sqrt(),
        x,
        order: SpectralOrder::Refined,
        eigen: None,
    }
}

/// Empirical max of ‖Ax‖₂ over boundary samples of the nonnegative cap:
/// positive parts of Gaussian directions, rescaled to radius β. Always a
/// lower bound; nested (same RNG state, larger sample count) runs are
/// nondecreasing.
pub fn random_search<R: Rng + ?Sized>(
    a: ArrayView2<f64>,
    beta: f64,
    num_samples: usize,
    rng: &mut R,
) -> (f64, Array1<f64>) {
    assert!(num_samples >= 1, "need at least one sample");
    let n = a.ncols();
    let mut best_val = f64::NEG_INFINITY;
    let mut best_x = Array1::zeros(n);
    for _ in 0..num_samples {
        let x = loop {
            let g = Array1::from_shape_fn(n, |_| {
                rng.sample::<f64, _>(StandardNormal).max(0.0)
            });
            let norm = l2(g.view());
            if norm > ZERO_DIRECTION {
                break g * (beta / norm);
            }
        };
        let val = l2(a.dot(&x).view());
        if val > best_val {
            best_val = val;
            best_x = x;
        }
    }
    (best_val, best_x)
}
