//! Numerically stable scalar kernels shared by the model, the estimators and
//! the exact evaluator.

use crate::scalar::Scalar;

/// Pre-activation above which softplus switches to `z + log1p(exp(-z))`.
pub const SOFTPLUS_THRESHOLD: f64 = 30.0;

/// Logistic function `1 / (1 + exp(-z))`, saturating cleanly at both ends.
#[inline]
pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + exp(z))` without overflow.
#[inline]
pub fn softplus<T: Scalar>(z: T) -> T {
    if z > T::of(SOFTPLUS_THRESHOLD) {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `ln Σ exp(v_i)`, shifted by the maximum. Returns `-inf` for an empty slice.
pub fn log_sum_exp<T: Scalar>(values: &[T]) -> T {
    let max = values
        .iter()
        .copied()
        .fold(T::neg_infinity(), |m, v| if v > m { v } else { m });
    if !max.is_finite() {
        return max;
    }
    let sum: T = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Merges two partial log-sum-exp results.
#[inline]
pub fn log_add_exp<T: Scalar>(a: T, b: T) -> T {
    if a == T::neg_infinity() {
        return b;
    }
    if b == T::neg_infinity() {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Normalized `prior_i * exp(logits_i)`; the maximum logit is subtracted first.
///
/// With a uniform prior and equal logits every output is exactly `1 / M`.
pub fn weighted_softmax<T: Scalar>(logits: &[T], prior: &[T]) -> Vec<T> {
    debug_assert_eq!(logits.len(), prior.len());
    let max = logits
        .iter()
        .copied()
        .fold(T::neg_infinity(), |m, v| if v > m { v } else { m });
    let raw: Vec<T> = logits
        .iter()
        .zip(prior)
        .map(|(&l, &p)| p * (l - max).exp())
        .collect();
    let total: T = raw.iter().copied().sum();
    raw.into_iter().map(|r| r / total).collect()
}
