//! Positive and negative phases of the log-likelihood gradient.
//!
//! Every phase is a weighted average of per-example energy derivatives
//! `E_{P(h|x)}[∂Energy(x,h)/∂θ]`. The estimators differ only in which visible
//! states enter the negative phase and how they are weighted:
//!
//! | estimator | states                         | weights                     |
//! |-----------|--------------------------------|-----------------------------|
//! | exact     | whole visible space            | exact model probabilities   |
//! | CD-k      | k-step reconstructions of data | uniform                     |
//! | WCD-k     | k-step reconstructions of data | softmax of `-F` over batch  |
//! | PCD       | persistent chains              | uniform                     |
//! | WPCD      | persistent chains              | softmax of `-F` over chains |

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bits::BitState;
use crate::datasets::Dataset;
use crate::error::{check_len, Error, Result};
use crate::exact::{check_enumerable, compute_exact_distribution};
use crate::math::{sigmoid, weighted_softmax};
use crate::model::{bit_value, GibbsChain, RbmParams};
use crate::scalar::Scalar;

/// Accepted deviation of caller-supplied weights from a unit sum.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// A parameter-shaped update `(db, dc, dW)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientDelta<T> {
    pub db: Vec<T>,
    pub dc: Vec<T>,
    /// Row-major `n_hidden × n_visible`.
    pub dw: Vec<T>,
}

impl<T: Scalar> GradientDelta<T> {
    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        GradientDelta {
            db: vec![T::zero(); n_visible],
            dc: vec![T::zero(); n_hidden],
            dw: vec![T::zero(); n_visible * n_hidden],
        }
    }

    pub fn zeros_like(params: &RbmParams<T>) -> Self {
        Self::zeros(params.n_visible(), params.n_hidden())
    }

    pub fn n_visible(&self) -> usize {
        self.db.len()
    }

    pub fn n_hidden(&self) -> usize {
        self.dc.len()
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        check_len("gradient visible dimension", self.db.len(), other.db.len())?;
        check_len("gradient hidden dimension", self.dc.len(), other.dc.len())
    }

    /// `self += scale · other`.
    pub fn add_scaled(&mut self, other: &Self, scale: T) -> Result<()> {
        self.check_shape(other)?;
        for (a, b) in self.iter_mut().zip(other.iter()) {
            *a = *a + scale * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, s: T) {
        for a in self.iter_mut() {
            *a = *a * s;
        }
    }

    /// `self − other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.add_scaled(other, -T::one())?;
        Ok(out)
    }

    /// Components in `b ‖ c ‖ W` order.
    pub fn iter(&self) -> impl Iterator<Item = T> + '_ {
        self.db.iter().chain(&self.dc).chain(&self.dw).copied()
    }

    fn iter_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.db.iter_mut().chain(self.dc.iter_mut()).chain(self.dw.iter_mut())
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.iter()
            .zip(other.iter())
            .fold(T::zero(), |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    /// `self += weight · E_{P(h|x)}[∂Energy/∂θ]` for one visible state.
    fn accumulate(&mut self, params: &RbmParams<T>, x: &[u8], weight: T) {
        let nv = params.n_visible();
        for (d, &xj) in self.db.iter_mut().zip(x) {
            *d = *d - weight * bit_value::<T>(xj);
        }
        for i in 0..params.n_hidden() {
            let wp = weight * sigmoid(params.hidden_preactivation(i, x));
            self.dc[i] = self.dc[i] - wp;
            let row = &mut self.dw[i * nv..(i + 1) * nv];
            for (d, &xj) in row.iter_mut().zip(x) {
                *d = *d - wp * bit_value::<T>(xj);
            }
        }
    }
}

/// A visible state entering a phase sum, with its weight.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTerm<T> {
    pub state: BitState,
    pub weight: T,
}

fn check_states<T: Scalar>(params: &RbmParams<T>, states: &[BitState]) -> Result<()> {
    states
        .iter()
        .try_for_each(|s| check_len("visible state", params.n_visible(), s.len()))
}

/// `E_{P(h|x)}[∂Energy(x,h)/∂θ]`: `db_j = −x_j`, `dc_i = −σ(c_i + W_i·x)`,
/// `dW_ij = −x_j σ(c_i + W_i·x)`.
pub fn per_example_phase<T: Scalar>(params: &RbmParams<T>, x: &BitState) -> Result<GradientDelta<T>> {
    check_len("visible state", params.n_visible(), x.len())?;
    let mut out = GradientDelta::zeros_like(params);
    out.accumulate(params, x.bits(), T::one());
    Ok(out)
}

/// `Σ_i w_i · per_example_phase(states_i)` without validation.
pub(crate) fn weighted_combination<T: Scalar>(
    params: &RbmParams<T>,
    states: &[BitState],
    weights: &[T],
) -> GradientDelta<T> {
    combine(params, states, weights)
}

fn combine<T: Scalar>(params: &RbmParams<T>, states: &[BitState], weights: &[T]) -> GradientDelta<T> {
    let mut out = GradientDelta::zeros_like(params);
    for (s, &w) in states.iter().zip(weights) {
        out.accumulate(params, s.bits(), w);
    }
    out
}

fn uniform_weights<T: Scalar>(n: usize) -> Vec<T> {
    weighted_softmax(&vec![T::zero(); n], &vec![T::one(); n])
}

/// Mean of the per-example phases over `batch`.
pub fn positive_phase<T: Scalar>(params: &RbmParams<T>, batch: &[BitState]) -> Result<GradientDelta<T>> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    check_states(params, batch)?;
    Ok(combine(params, batch, &uniform_weights(batch.len())))
}

/// Generalized weighted phase `Σ_i w_i · per_example_phase(y_i)`.
///
/// Weights must be nonnegative and sum to one within
/// [`WEIGHT_SUM_TOLERANCE`]; they are renormalized before use.
pub fn weighted_phase<T: Scalar>(params: &RbmParams<T>, terms: &[PhaseTerm<T>]) -> Result<GradientDelta<T>> {
    if terms.is_empty() {
        return Err(Error::Empty("phase terms"));
    }
    let mut sum = T::zero();
    for t in terms {
        check_len("visible state", params.n_visible(), t.state.len())?;
        if !(t.weight >= T::zero()) || !t.weight.is_finite() {
            return Err(Error::invalid(format!("phase weight {} is not a nonnegative number", t.weight)));
        }
        sum = sum + t.weight;
    }
    if (sum.as_f64() - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(Error::WeightSum { sum: sum.as_f64() });
    }
    let mut out = GradientDelta::zeros_like(params);
    for t in terms {
        out.accumulate(params, t.state.bits(), t.weight / sum);
    }
    Ok(out)
}

/// Relative probabilities of `states` within the set:
/// `exp(−F(x_i)) / Σ_j exp(−F(x_j))`. The partition function cancels.
pub fn batch_softmax_weights<T: Scalar>(params: &RbmParams<T>, states: &[BitState]) -> Result<Vec<T>> {
    if states.is_empty() {
        return Err(Error::Empty("states"));
    }
    check_states(params, states)?;
    Ok(free_energy_weights(params, states, &vec![T::one(); states.len()]))
}

/// `prior_i · exp(−F(x_i))`, normalized.
fn free_energy_weights<T: Scalar>(params: &RbmParams<T>, states: &[BitState], prior: &[T]) -> Vec<T> {
    let logits: Vec<T> = states
        .iter()
        .map(|s| -params.free_energy_unchecked(s.bits()))
        .collect();
    weighted_softmax(&logits, prior)
}

/// `k`-step Gibbs reconstructions of every batch element, in batch order.
pub fn reconstruct_batch<T: Scalar, R: Rng + ?Sized>(
    params: &RbmParams<T>,
    batch: &[BitState],
    k: usize,
    rng: &mut R,
) -> Result<Vec<BitState>> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    batch.iter().map(|x| params.reconstruct(x, k, rng)).collect()
}

/// CD-k negative phase: uniform mean over the reconstructions.
pub fn cd_negative_phase<T: Scalar, R: Rng + ?Sized>(
    params: &RbmParams<T>,
    batch: &[BitState],
    k: usize,
    rng: &mut R,
) -> Result<GradientDelta<T>> {
    let recon = reconstruct_batch(params, batch, k, rng)?;
    Ok(combine(params, &recon, &uniform_weights(recon.len())))
}

/// WCD-k negative phase: reconstructions weighted by their relative
/// probability within the batch.
pub fn wcd_negative_phase<T: Scalar, R: Rng + ?Sized>(
    params: &RbmParams<T>,
    batch: &[BitState],
    k: usize,
    rng: &mut R,
) -> Result<GradientDelta<T>> {
    let recon = reconstruct_batch(params, batch, k, rng)?;
    let w = free_energy_weights(params, &recon, &vec![T::one(); recon.len()]);
    Ok(combine(params, &recon, &w))
}

fn advance_chains<T: Scalar>(params: &RbmParams<T>, chains: &mut [GibbsChain]) -> Result<Vec<BitState>> {
    if chains.is_empty() {
        return Err(Error::Empty("persistent chains"));
    }
    chains
        .iter_mut()
        .map(|c| {
            c.step(params)?;
            Ok(c.visible().clone())
        })
        .collect()
}

/// PCD negative phase: advances every persistent chain by one sweep and
/// averages uniformly over the new chain states.
pub fn pcd_negative_phase<T: Scalar>(
    params: &RbmParams<T>,
    chains: &mut [GibbsChain],
) -> Result<GradientDelta<T>> {
    let states = advance_chains(params, chains)?;
    Ok(combine(params, &states, &uniform_weights(states.len())))
}

/// WPCD negative phase: as [`pcd_negative_phase`] but the chain states are
/// weighted by their relative probability among the chains.
pub fn wpcd_negative_phase<T: Scalar>(
    params: &RbmParams<T>,
    chains: &mut [GibbsChain],
) -> Result<GradientDelta<T>> {
    let states = advance_chains(params, chains)?;
    let w = free_energy_weights(params, &states, &vec![T::one(); states.len()]);
    Ok(combine(params, &states, &w))
}

/// Exact negative phase `Σ_x P(x) E_{P(h|x)}[∂Energy/∂θ]` over the whole
/// visible space. Accumulation runs over fixed index blocks that are merged
/// in ascending order.
pub fn exact_negative_phase<T: Scalar>(params: &RbmParams<T>, limit: usize) -> Result<GradientDelta<T>> {
    check_enumerable(params.n_visible(), limit)?;
    let model = compute_exact_distribution(params, limit)?;
    let nv = params.n_visible();
    let total = 1usize << nv;
    let block = total.min(1024);
    let partials: Vec<GradientDelta<T>> = (0..total / block)
        .into_par_iter()
        .map(|b| {
            let mut acc = GradientDelta::zeros_like(params);
            for idx in b * block..(b + 1) * block {
                let x = BitState::from_index(idx as u64, nv);
                acc.accumulate(params, x.bits(), model.log_probs()[idx].exp());
            }
            acc
        })
        .collect();
    let mut out = GradientDelta::zeros_like(params);
    for p in &partials {
        out.add_scaled(p, T::one())?;
    }
    Ok(out)
}

/// Gradient of the target-weighted log-likelihood `Σ p(x) ln P(x)`, pointing
/// uphill: exact negative phase minus the target-weighted data phase.
pub fn exact_loglik_gradient<T: Scalar>(
    params: &RbmParams<T>,
    dataset: &Dataset,
    limit: usize,
) -> Result<GradientDelta<T>> {
    check_len("dataset width", params.n_visible(), dataset.n_bits())?;
    let weights: Vec<T> = dataset.target_probs().iter().map(|&p| T::of(p)).collect();
    let positive = combine(params, dataset.states(), &weights);
    exact_negative_phase(params, limit)?.sub(&positive)
}

/// Which negative phase a training run uses.
///
/// Serialized in its text form (`cd1`, `wcd10`, `pcd`, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Exact,
    Cd { k: usize },
    Wcd { k: usize },
    Pcd,
    Wpcd,
}

impl EstimatorKind {
    pub fn is_persistent(self) -> bool {
        matches!(self, EstimatorKind::Pcd | EstimatorKind::Wpcd)
    }

    pub fn is_weighted(self) -> bool {
        matches!(self, EstimatorKind::Wcd { .. } | EstimatorKind::Wpcd)
    }

    pub fn validate(self) -> Result<()> {
        match self {
            EstimatorKind::Cd { k: 0 } | EstimatorKind::Wcd { k: 0 } => {
                Err(Error::invalid("CD/WCD need k >= 1"))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorKind::Exact => f.write_str("exact"),
            EstimatorKind::Cd { k } => write!(f, "cd{k}"),
            EstimatorKind::Wcd { k } => write!(f, "wcd{k}"),
            EstimatorKind::Pcd => f.write_str("pcd"),
            EstimatorKind::Wpcd => f.write_str("wpcd"),
        }
    }
}

/// Parses `exact`, `pcd`, `wpcd`, `cd<k>`, `wcd<k>` (`cd` alone means k = 1).
impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let parse_k = |digits: &str| -> Result<usize> {
            if digits.is_empty() {
                return Ok(1);
            }
            digits
                .parse()
                .map_err(|_| Error::invalid(format!("bad estimator {s:?}")))
        };
        let kind = match lower.as_str() {
            "exact" => EstimatorKind::Exact,
            "pcd" => EstimatorKind::Pcd,
            "wpcd" => EstimatorKind::Wpcd,
            l if l.starts_with("wcd") => EstimatorKind::Wcd { k: parse_k(&l[3..])? },
            l if l.starts_with("cd") => EstimatorKind::Cd { k: parse_k(&l[2..])? },
            _ => return Err(Error::invalid(format!("unknown estimator {s:?}"))),
        };
        kind.validate()?;
        Ok(kind)
    }
}

impl Serialize for EstimatorKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EstimatorKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// A negative-phase estimator together with the persistent chains it owns.
///
/// Persistent estimators start one chain per slot of the first training
/// batch, each chain on its own generator stream derived from `seed`.
#[derive(Debug, Clone)]
pub struct NegativePhase {
    kind: EstimatorKind,
    chains: Vec<GibbsChain>,
    enumeration_limit: usize,
}

impl NegativePhase {
    pub fn new(kind: EstimatorKind, first_batch: &[BitState], seed: u64, enumeration_limit: usize) -> Result<Self> {
        kind.validate()?;
        let chains = if kind.is_persistent() {
            if first_batch.is_empty() {
                return Err(Error::Empty("first batch for persistent chains"));
            }
            first_batch
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(i as u64);
                    GibbsChain::with_rng(s.clone(), rng)
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(NegativePhase {
            kind,
            chains,
            enumeration_limit,
        })
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    pub fn chains(&self) -> &[GibbsChain] {
        &self.chains
    }

    /// Negative phase for one update. `batch_weights` are the data weights of
    /// the batch (summing to one); CD and WCD carry them over to the
    /// reconstructions of the corresponding batch elements, which reduces to
    /// the plain uniform average when the targets are uniform.
    pub fn estimate<T: Scalar, R: Rng + ?Sized>(
        &mut self,
        params: &RbmParams<T>,
        batch: &[BitState],
        batch_weights: &[T],
        rng: &mut R,
    ) -> Result<GradientDelta<T>> {
        check_len("batch weights", batch.len(), batch_weights.len())?;
        match self.kind {
            EstimatorKind::Exact => exact_negative_phase(params, self.enumeration_limit),
            EstimatorKind::Cd { k } => {
                let recon = reconstruct_batch(params, batch, k, rng)?;
                let w = weighted_softmax(&vec![T::zero(); recon.len()], batch_weights);
                Ok(combine(params, &recon, &w))
            }
            EstimatorKind::Wcd { k } => {
                let recon = reconstruct_batch(params, batch, k, rng)?;
                let w = free_energy_weights(params, &recon, batch_weights);
                Ok(combine(params, &recon, &w))
            }
            EstimatorKind::Pcd => pcd_negative_phase(params, &mut self.chains),
            EstimatorKind::Wpcd => wpcd_negative_phase(params, &mut self.chains),
        }
    }
}
