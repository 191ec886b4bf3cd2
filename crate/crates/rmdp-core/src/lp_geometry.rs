//! L_p geometry primitives: Hölder conjugates, the generalized standard
//! deviation σ_p, mean projection, dual vectors over the zero-sum L_p ball,
//! and samplers for the constraint sets
//!
//! * 𝒦 = { k : ‖k‖_p ≤ 1, 1^⊤k = 0 }   (zero-sum directions), and
//! * ℬ = { b ⪰ 0 : ‖b‖_p ≤ β }          (nonnegative budget allocations).
//!
//! The generalized standard deviation is `σ_p(v) = min_ω ‖v − ω·1‖_p`, with
//! closed forms at p ∈ {1, 2, ∞} (median split, centered 2-norm, half-range)
//! and a golden-section solve of the 1-D convex problem otherwise. Its dual
//! role is what this crate leans on: `max_{k∈𝒦} k^⊤c = σ_q(c)` for the
//! Hölder conjugate q, and `dual_vector` constructs the maximizing k.

use ndarray::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for the golden-section shift search.
const GOLDEN_TOL: f64 = 1e-10;
/// Below this, a direction is considered numerically zero.
const TINY: f64 = 1e-300;

/// A norm order p ∈ [1, ∞] with its Hölder conjugate q (1/p + 1/q = 1,
/// using the 1 ↔ ∞ convention).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormOrder(f64);

impl NormOrder {
    pub const ONE: NormOrder = NormOrder(1.0);
    pub const TWO: NormOrder = NormOrder(2.0);
    pub const INF: NormOrder = NormOrder(f64::INFINITY);

    /// Accepts 1, any finite real > 1, or +∞.
    pub fn new(p: f64) -> Result<Self> {
        if p >= 1.0 {
            Ok(NormOrder(p))
        } else {
            Err(Error::Parse {
                path: "norm order".into(),
                detail: format!("p = {p} must be ≥ 1 (or inf)"),
            })
        }
    }

    pub fn p(self) -> f64 {
        self.0
    }

    /// Hölder conjugate: 1 ↔ ∞, else p/(p−1).
    pub fn conjugate(self) -> NormOrder {
        if self.0 == 1.0 {
            NormOrder::INF
        } else if self.0.is_infinite() {
            NormOrder::ONE
        } else {
            NormOrder(self.0 / (self.0 - 1.0))
        }
    }

    pub fn q(self) -> f64 {
        self.conjugate().0
    }

    pub fn is_one(self) -> bool {
        self.0 == 1.0
    }

    pub fn is_two(self) -> bool {
        self.0 == 2.0
    }

    pub fn is_inf(self) -> bool {
        self.0.is_infinite()
    }
}

impl std::fmt::Display for NormOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl std::str::FromStr for NormOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "oo" => Ok(NormOrder::INF),
            other => {
                let p: f64 = other.parse().map_err(|_| Error::Parse {
                    path: "norm order".into(),
                    detail: format!("cannot parse '{s}' as a norm order"),
                })?;
                NormOrder::new(p)
            }
        }
    }
}

impl Serialize for NormOrder {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for NormOrder {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// ‖x‖_p over an iterator of entries.
pub fn lp_norm<I>(xs: I, order: NormOrder) -> f64
where
    I: IntoIterator<Item = f64>,
{
    let p = order.p();
    if p == 1.0 {
        xs.into_iter().map(f64::abs).sum()
    } else if p == 2.0 {
        xs.into_iter().map(|x| x * x).sum::<f64>().sqrt()
    } else if p.is_infinite() {
        xs.into_iter().map(f64::abs).fold(0.0, f64::max)
    } else {
        // Scale out the max to avoid overflow for large p.
        let v: Vec<f64> = xs.into_iter().map(f64::abs).collect();
        let m = v.iter().copied().fold(0.0, f64::max);
        if m == 0.0 {
            return 0.0;
        }
        m * v.iter().map(|x| (x / m).powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Golden-section minimization of a convex `f` over `[lo, hi]` to absolute
/// interval tolerance `GOLDEN_TOL`; returns (argmin, min).
fn golden_min(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if hi - lo <= GOLDEN_TOL {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    (mid, f(mid))
}

/// σ_p(v) together with its optimal shift ω (the p-mean).
pub(crate) fn gstd_with_shift(v: ArrayView1<f64>, order: NormOrder) -> (f64, f64) {
    assert!(!v.is_empty(), "gstd of an empty vector");
    let n = v.len();
    let p = order.p();
    if p == 2.0 {
        let mean = v.sum() / n as f64;
        let dev = lp_norm(v.iter().map(|x| x - mean), NormOrder::TWO);
        (dev, mean)
    } else if p.is_infinite() {
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        ((max - min) / 2.0, (max + min) / 2.0)
    } else if p == 1.0 {
        // Sort descending; top ⌊(S+1)/2⌋ minus entries from ⌈(S+1)/2⌉ on
        // (1-based), so the middle element cancels for odd S. ω is a median.
        let mut sorted = v.to_vec();
        sorted.sort_by(|a, b| b.partial_cmp(a).expect("no NaN in gstd input"));
        let top_count = n.div_ceil(2); // ⌊(S+1)/2⌋
        let bottom_start = n / 2; // ⌈(S+1)/2⌉ − 1, 0-based
        let top: f64 = sorted[..top_count].iter().sum();
        let bottom: f64 = sorted[bottom_start..].iter().sum();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        (top - bottom, median)
    } else {
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        if max == min {
            return (0.0, max);
        }
        let (omega, sigma) = golden_min(min, max, |w| lp_norm(v.iter().map(|x| x - w), order));
        (sigma, omega)
    }
}

/// Generalized standard deviation `σ_p(v) = min_ω ‖v − ω·1‖_p`.
pub fn gstd(v: ArrayView1<f64>, order: NormOrder) -> f64 {
    gstd_with_shift(v, order).0
}

/// Project onto the zero-sum hyperplane: Φx = x − mean(x)·1, applied twice to
/// sweep the first pass's rounding residual into the last few ulps.
pub fn mean_project(x: ArrayView1<f64>) -> Array1<f64> {
    let n = x.len() as f64;
    let mut y = &x - x.sum() / n;
    let r = y.sum() / n;
    y -= r;
    y
}

/// The 𝒦-element maximizing k^⊤c, and the attained value σ_q(c).
///
/// Construction: for p = 2 this is Φc/‖Φc‖₂. For p ∈ {1, ∞} the extreme
/// points are explicit. Otherwise the Hölder-equality witness is built on
/// w = c − ω*·1 at the σ_q-optimal shift ω*: k ∝ sign(w)|w|^{q−1}, whose zero
/// sum is the first-order optimality condition of ω*. Returns (0, 0) when c
/// is constant (Φc = 0).
pub fn dual_vector(c: ArrayView1<f64>, order: NormOrder) -> (Array1<f64>, f64) {
    let n = c.len();
    let zero = || (Array1::zeros(n), 0.0);
    if n < 2 {
        return zero();
    }
    let max = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = c.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = max.abs().max(min.abs());
    if max - min <= 1e-14 * scale.max(1.0) {
        return zero();
    }

    if order.is_two() {
        let w = mean_project(c);
        let norm = lp_norm(w.iter().copied(), NormOrder::TWO);
        if norm <= TINY {
            return zero();
        }
        let k = w / norm;
        return (k, norm);
    }

    if order.is_one() {
        // q = ∞: σ_∞(c) = (max − min)/2, attained by (e_argmax − e_argmin)/2.
        let imax = argmax(c);
        let imin = argmin(c);
        let mut k = Array1::zeros(n);
        k[imax] = 0.5;
        k[imin] = -0.5;
        return (k, (max - min) / 2.0);
    }

    if order.is_inf() {
        // q = 1: ±1 on the top/bottom halves of the sorted order, middle
        // element zeroed when n is odd; attains the median-split sum.
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&i, &j| c[j].partial_cmp(&c[i]).expect("no NaN in dual_vector input"));
        let half = n / 2;
        let mut k = Array1::zeros(n);
        for &i in &idx[..half] {
            k[i] = 1.0;
        }
        for &i in &idx[n - half..] {
            k[i] = -1.0;
        }
        return (k.clone(), k.dot(&c));
    }

    // General p ∈ (1, ∞), q = conjugate.
    let q_order = order.conjugate();
    let q = q_order.p();
    let (sigma, omega) = gstd_with_shift(c, q_order);
    if sigma <= TINY {
        return zero();
    }
    let w = &c - omega;
    // k_raw = sign(w)|w|^{q−1}; ‖k_raw‖_p = ‖w‖_q^{q−1} since (q−1)p = q.
    let k_raw = w.mapv(|x| x.signum() * x.abs().powf(q - 1.0));
    let mut k = k_raw / sigma.powf(q - 1.0);
    // ω* from golden section is accurate to ~1e-10; sweep the first-order
    // residual out of the zero-sum constraint and renormalize if needed.
    k = mean_project(k.view());
    let norm_p = lp_norm(k.iter().copied(), order);
    if norm_p > 1.0 {
        k /= norm_p;
    }
    let value = k.dot(&c);
    (k, value)
}

fn argmax(v: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

fn argmin(v: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] < v[best] {
            best = i;
        }
    }
    best
}

/// The constraint-set pair (𝒦 over length-S vectors, ℬ over S×A matrices)
/// with membership predicates.
#[derive(Debug, Clone, Copy)]
pub struct ConstraintSets {
    pub order: NormOrder,
    pub beta: f64,
}

impl ConstraintSets {
    pub fn new(order: NormOrder, beta: f64) -> Self {
        assert!(beta >= 0.0, "radius must be nonnegative");
        ConstraintSets { order, beta }
    }

    /// k ∈ 𝒦 within absolute tolerance `tol`.
    pub fn contains_k(&self, k: ArrayView1<f64>, tol: f64) -> bool {
        lp_norm(k.iter().copied(), self.order) <= 1.0 + tol && k.sum().abs() <= tol
    }

    /// b ∈ ℬ within absolute tolerance `tol`.
    pub fn contains_b(&self, b: ArrayView2<f64>, tol: f64) -> bool {
        b.iter().all(|&x| x >= -tol)
            && lp_norm(b.iter().copied(), self.order) <= self.beta + tol
    }

    /// Per-state variant of ℬ (‖b_s‖_p ≤ β_s for every state's action row).
    /// The non-rectangular pipeline never needs it; provided for the
    /// rectangular cross-checks.
    pub fn contains_b_per_state(
        &self,
        b: ArrayView2<f64>,
        beta_s: ArrayView1<f64>,
        tol: f64,
    ) -> bool {
        if b.nrows() != beta_s.len() {
            return false;
        }
        b.iter().all(|&x| x >= -tol)
            && b.outer_iter()
                .zip(beta_s.iter())
                .all(|(row, &bs)| lp_norm(row.iter().copied(), self.order) <= bs + tol)
    }
}

/// Draw k ∈ 𝒦: Gaussian direction, zero-sum projection, p-normalization,
/// then a radius ∝ u^(1/S) for near-uniform ball coverage.
pub fn sample_k<R: Rng + ?Sized>(num_states: usize, order: NormOrder, rng: &mut R) -> Array1<f64> {
    if num_states < 2 {
        return Array1::zeros(num_states);
    }
    loop {
        let g = Array1::from_shape_fn(num_states, |_| rng.sample::<f64, _>(StandardNormal));
        let k = mean_project(g.view());
        let norm = lp_norm(k.iter().copied(), order);
        if norm > 1e-12 {
            let r: f64 = rng.random::<f64>().powf(1.0 / num_states as f64);
            return k * (r / norm);
        }
    }
}

/// Draw b ∈ ℬ: Gaussian direction, positive part, p-normalization, then a
/// radius ∝ u^(1/(S·A)).
pub fn sample_b<R: Rng + ?Sized>(
    num_states: usize,
    num_actions: usize,
    order: NormOrder,
    beta: f64,
    rng: &mut R,
) -> Array2<f64> {
    let dim = num_states * num_actions;
    if beta == 0.0 {
        return Array2::zeros((num_states, num_actions));
    }
    loop {
        let g = Array2::from_shape_fn((num_states, num_actions), |_| {
            rng.sample::<f64, _>(StandardNormal).max(0.0)
        });
        let norm = lp_norm(g.iter().copied(), order);
        if norm > 1e-12 {
            let r: f64 = rng.random::<f64>().powf(1.0 / dim as f64);
            return g * (beta * r / norm);
        }
    }
}
