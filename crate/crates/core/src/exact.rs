//! Exact model distribution by enumerating every visible configuration.

use rayon::prelude::*;

use crate::bits::BitState;
use crate::datasets::Dataset;
use crate::error::{check_len, Error, Result};
use crate::math::{log_add_exp, softplus};
use crate::model::RbmParams;
use crate::scalar::Scalar;

/// Largest visible layer enumerated unless the caller raises the limit.
pub const DEFAULT_ENUMERATION_LIMIT: usize = 25;

/// Enumeration is split into blocks of `2^BLOCK_BITS` states with a fixed
/// shape, so results do not depend on the number of worker threads.
const BLOCK_BITS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactModelDistribution<T> {
    n_visible: usize,
    log_z: T,
    log_probs: Vec<T>,
}

impl<T: Scalar> ExactModelDistribution<T> {
    pub fn n_visible(&self) -> usize {
        self.n_visible
    }

    /// Natural log of the partition function.
    pub fn log_z(&self) -> T {
        self.log_z
    }

    /// `ln P(x)` indexed by canonical state index.
    pub fn log_probs(&self) -> &[T] {
        &self.log_probs
    }

    pub fn log_prob(&self, x: &BitState) -> Result<T> {
        check_len("visible state", self.n_visible, x.len())?;
        Ok(self.log_probs[x.to_index() as usize])
    }

    pub fn probs(&self) -> Vec<T> {
        self.log_probs.iter().map(|l| l.exp()).collect()
    }
}

pub(crate) fn check_enumerable(n_bits: usize, limit: usize) -> Result<()> {
    if n_bits > limit || n_bits >= usize::BITS as usize - 1 {
        Err(Error::EnumerationLimit { n_bits, limit })
    } else {
        Ok(())
    }
}

/// Computes `-F(x)` for every state of one block.
///
/// Within a block the low bits are visited in Gray-code order so each step
/// updates the hidden pre-activations with a single weight column.
fn block_neg_free_energy<T: Scalar>(params: &RbmParams<T>, block: usize, low_bits: usize, out: &mut [T]) {
    let nv = params.n_visible();
    let nh = params.n_hidden();
    let base = BitState::from_index(((block as u64) << low_bits) as u64, nv);
    let mut x = base.bits().to_vec();
    let mut z: Vec<T> = (0..nh).map(|i| params.hidden_preactivation(i, &x)).collect();
    let mut linear = x
        .iter()
        .zip(params.visible_bias())
        .filter(|(&xj, _)| xj == 1)
        .fold(T::zero(), |acc, (_, &b)| acc + b);

    let neg_f = |linear: T, z: &[T]| linear + z.iter().fold(T::zero(), |acc, &zi| acc + softplus(zi));
    out[0] = neg_f(linear, &z);
    for step in 1..out.len() {
        // Gray code: the bit that changes between g(step-1) and g(step)
        let flip = step.trailing_zeros() as usize;
        let j = nv - 1 - flip;
        let sign = if x[j] == 0 { T::one() } else { -T::one() };
        x[j] ^= 1;
        linear = linear + sign * params.visible_bias()[j];
        for (i, zi) in z.iter_mut().enumerate() {
            *zi = *zi + sign * params.weight(i, j);
        }
        let gray = step ^ (step >> 1);
        out[gray] = neg_f(linear, &z);
    }
}

/// Exact `ln Z` and `ln P(x)` for all `2^n_visible` states.
pub fn compute_exact_distribution<T: Scalar>(
    params: &RbmParams<T>,
    limit: usize,
) -> Result<ExactModelDistribution<T>> {
    let nv = params.n_visible();
    check_enumerable(nv, limit)?;
    let total = 1usize << nv;
    let low_bits = nv.min(BLOCK_BITS);
    let block_len = 1usize << low_bits;

    let mut log_probs = vec![T::zero(); total];
    let partial: Vec<T> = log_probs
        .par_chunks_mut(block_len)
        .enumerate()
        .map(|(block, out)| {
            block_neg_free_energy(params, block, low_bits, out);
            crate::math::log_sum_exp(out)
        })
        .collect();
    let log_z = partial
        .into_iter()
        .fold(T::neg_infinity(), log_add_exp);
    log_probs.par_iter_mut().for_each(|v| *v = *v - log_z);
    Ok(ExactModelDistribution {
        n_visible: nv,
        log_z,
        log_probs,
    })
}

fn check_target(target: &Dataset, model_bits: usize) -> Result<()> {
    check_len("dataset width", model_bits, target.n_bits())
}

/// `KL(target ‖ model) = Σ p (ln p − ln P_model)` over the target's support.
pub fn kl_divergence<T: Scalar>(target: &Dataset, model: &ExactModelDistribution<T>) -> Result<T> {
    check_target(target, model.n_visible)?;
    Ok(target
        .states()
        .iter()
        .zip(target.target_probs())
        .fold(T::zero(), |acc, (s, &p)| {
            let p_t = T::of(p);
            acc + p_t * (T::of(p.ln()) - model.log_probs[s.to_index() as usize])
        }))
}

/// Target-weighted average log-likelihood `Σ p ln P_model(x)`.
pub fn dataset_loglikelihood<T: Scalar>(
    target: &Dataset,
    model: &ExactModelDistribution<T>,
) -> Result<T> {
    check_target(target, model.n_visible)?;
    Ok(target
        .states()
        .iter()
        .zip(target.target_probs())
        .fold(T::zero(), |acc, (s, &p)| {
            acc + T::of(p) * model.log_probs[s.to_index() as usize]
        }))
}

/// Model probabilities of `states`, in order.
pub fn model_probabilities_of<T: Scalar>(
    states: &[BitState],
    model: &ExactModelDistribution<T>,
) -> Result<Vec<T>> {
    states
        .iter()
        .map(|s| model.log_prob(s).map(|l| l.exp()))
        .collect()
}

/// Shorthand for enumerating `params` and scoring `target`.
pub fn exact_kl<T: Scalar>(params: &RbmParams<T>, target: &Dataset, limit: usize) -> Result<T> {
    kl_divergence(target, &compute_exact_distribution(params, limit)?)
}
