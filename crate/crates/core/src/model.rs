//! Binary RBM parameterization, energies, factorized conditionals and block
//! Gibbs sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bits::BitState;
use crate::error::{check_len, Error, Result};
use crate::math::{sigmoid, softplus};
use crate::scalar::Scalar;

/// Parameters `{b, c, W}` of a binary RBM with energy
/// `E(x, h) = -b·x - c·h - h·W x`.
///
/// `W` is stored row-major with shape `n_hidden × n_visible`; row `i` holds
/// the incoming weights of hidden unit `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmParams<T> {
    n_visible: usize,
    n_hidden: usize,
    b: Vec<T>,
    c: Vec<T>,
    w: Vec<T>,
}

impl<T: Scalar> RbmParams<T> {
    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        assert!(n_visible > 0 && n_hidden > 0, "RBM layers must be non-empty");
        RbmParams {
            n_visible,
            n_hidden,
            b: vec![T::zero(); n_visible],
            c: vec![T::zero(); n_hidden],
            w: vec![T::zero(); n_visible * n_hidden],
        }
    }

    /// `w` is row-major `n_hidden × n_visible`.
    pub fn from_parts(b: Vec<T>, c: Vec<T>, w: Vec<T>) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::Empty("visible biases"));
        }
        if c.is_empty() {
            return Err(Error::Empty("hidden biases"));
        }
        check_len("weight matrix", b.len() * c.len(), w.len())?;
        let params = RbmParams {
            n_visible: b.len(),
            n_hidden: c.len(),
            b,
            c,
            w,
        };
        if !params.is_finite() {
            return Err(Error::invalid("parameters must be finite"));
        }
        Ok(params)
    }

    pub fn n_visible(&self) -> usize {
        self.n_visible
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn visible_bias(&self) -> &[T] {
        &self.b
    }

    pub fn hidden_bias(&self) -> &[T] {
        &self.c
    }

    pub fn weights(&self) -> &[T] {
        &self.w
    }

    pub fn weight_row(&self, i: usize) -> &[T] {
        &self.w[i * self.n_visible..(i + 1) * self.n_visible]
    }

    pub fn weight(&self, i: usize, j: usize) -> T {
        self.w[i * self.n_visible + j]
    }

    pub fn visible_bias_mut(&mut self) -> &mut [T] {
        &mut self.b
    }

    pub fn hidden_bias_mut(&mut self) -> &mut [T] {
        &mut self.c
    }

    pub fn weights_mut(&mut self) -> &mut [T] {
        &mut self.w
    }

    pub fn is_finite(&self) -> bool {
        self.b
            .iter()
            .chain(&self.c)
            .chain(&self.w)
            .all(|v| v.is_finite())
    }

    /// Total number of scalar parameters.
    pub fn len(&self) -> usize {
        self.b.len() + self.c.len() + self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Parameters flattened as `b ‖ c ‖ W`.
    pub fn flat(&self) -> impl Iterator<Item = T> + '_ {
        self.b.iter().chain(&self.c).chain(&self.w).copied()
    }

    /// Mutable access to the parameter at flat position `k` (`b ‖ c ‖ W`).
    pub fn flat_mut(&mut self, k: usize) -> &mut T {
        let (nv, nh) = (self.n_visible, self.n_hidden);
        if k < nv {
            &mut self.b[k]
        } else if k < nv + nh {
            &mut self.c[k - nv]
        } else {
            &mut self.w[k - nv - nh]
        }
    }

    pub fn cast<U: Scalar>(&self) -> RbmParams<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::of(x.as_f64())).collect();
        RbmParams {
            n_visible: self.n_visible,
            n_hidden: self.n_hidden,
            b: conv(&self.b),
            c: conv(&self.c),
            w: conv(&self.w),
        }
    }

    fn check_visible(&self, x: &BitState) -> Result<()> {
        check_len("visible state", self.n_visible, x.len())
    }

    fn check_hidden(&self, h: &BitState) -> Result<()> {
        check_len("hidden state", self.n_hidden, h.len())
    }

    pub fn energy(&self, x: &BitState, h: &BitState) -> Result<T> {
        self.check_visible(x)?;
        self.check_hidden(h)?;
        let (x, h) = (x.bits(), h.bits());
        let mut acc = T::zero();
        for (j, &xj) in x.iter().enumerate() {
            if xj == 1 {
                acc = acc + self.b[j];
            }
        }
        for (i, &hi) in h.iter().enumerate() {
            if hi == 1 {
                acc = acc + self.c[i];
                let row = self.weight_row(i);
                for (j, &xj) in x.iter().enumerate() {
                    if xj == 1 {
                        acc = acc + row[j];
                    }
                }
            }
        }
        Ok(-acc)
    }

    /// `F(x)` with `exp(-F(x)) = Σ_h exp(-E(x, h))`.
    pub fn free_energy(&self, x: &BitState) -> Result<T> {
        self.check_visible(x)?;
        Ok(self.free_energy_unchecked(x.bits()))
    }

    pub(crate) fn free_energy_unchecked(&self, x: &[u8]) -> T {
        let mut linear = T::zero();
        for (j, &xj) in x.iter().enumerate() {
            if xj == 1 {
                linear = linear + self.b[j];
            }
        }
        let mut hidden = T::zero();
        for i in 0..self.n_hidden {
            hidden = hidden + softplus(self.hidden_preactivation(i, x));
        }
        -linear - hidden
    }

    /// `c_i + W_i·x`.
    #[inline]
    pub(crate) fn hidden_preactivation(&self, i: usize, x: &[u8]) -> T {
        x.iter()
            .zip(self.weight_row(i))
            .fold(self.c[i], |z, (&xj, &w)| z + w * bit_value::<T>(xj))
    }

    /// `P(h_i = 1 | x) = σ(c_i + W_i·x)` for every hidden unit.
    pub fn hidden_activation_probs(&self, x: &BitState) -> Result<Vec<T>> {
        self.check_visible(x)?;
        Ok(self.hidden_probs_unchecked(x.bits()))
    }

    pub(crate) fn hidden_probs_unchecked(&self, x: &[u8]) -> Vec<T> {
        (0..self.n_hidden)
            .map(|i| sigmoid(self.hidden_preactivation(i, x)))
            .collect()
    }

    /// `P(x_j = 1 | h) = σ(b_j + (Wᵀh)_j)` for every visible unit.
    pub fn visible_activation_probs(&self, h: &BitState) -> Result<Vec<T>> {
        self.check_hidden(h)?;
        let mut z = self.b.clone();
        self.accumulate_visible_preactivation(h.bits(), &mut z);
        Ok(z.into_iter().map(sigmoid).collect())
    }

    #[inline]
    fn accumulate_visible_preactivation(&self, h: &[u8], z: &mut [T]) {
        for (i, &hi) in h.iter().enumerate() {
            if hi == 1 {
                for (zj, &wij) in z.iter_mut().zip(self.weight_row(i)) {
                    *zj = *zj + wij;
                }
            }
        }
    }

    /// One block Gibbs sweep `h ~ P(h|x)`, `x ~ P(x|h)` in place.
    ///
    /// A unit is set to 1 when its uniform draw is below its activation
    /// probability. Hidden units are drawn first, in index order, then the
    /// visible units.
    pub(crate) fn gibbs_sweep<R: Rng + ?Sized>(
        &self,
        visible: &mut [u8],
        hidden: &mut [u8],
        scratch: &mut [T],
        rng: &mut R,
    ) {
        for (i, hi) in hidden.iter_mut().enumerate() {
            let p = sigmoid(self.hidden_preactivation(i, visible));
            *hi = (T::of(rng.random::<f64>()) < p) as u8;
        }
        scratch.copy_from_slice(&self.b);
        self.accumulate_visible_preactivation(hidden, scratch);
        for (xj, &z) in visible.iter_mut().zip(scratch.iter()) {
            *xj = (T::of(rng.random::<f64>()) < sigmoid(z)) as u8;
        }
    }

    /// Runs `k` sweeps starting at `start`, drawing from `rng`.
    pub fn reconstruct<R: Rng + ?Sized>(
        &self,
        start: &BitState,
        k: usize,
        rng: &mut R,
    ) -> Result<BitState> {
        self.check_visible(start)?;
        if k == 0 {
            return Err(Error::invalid("Gibbs chain length k must be at least 1"));
        }
        let mut visible = start.clone();
        let mut hidden = vec![0u8; self.n_hidden];
        let mut scratch = vec![T::zero(); self.n_visible];
        for _ in 0..k {
            self.gibbs_sweep(visible.bits_mut(), &mut hidden, &mut scratch, rng);
        }
        Ok(visible)
    }
}

/// `1` for a set bit, `0` otherwise. Multiplying by this instead of
/// branching on the bit keeps the inner loops branch-free; the sums are
/// unchanged because `w · 0` contributes a signed zero.
#[inline(always)]
pub(crate) fn bit_value<T: Scalar>(b: u8) -> T {
    if b != 0 {
        T::one()
    } else {
        T::zero()
    }
}

/// A single Gibbs chain: current visible configuration plus its own
/// generator. Hidden states only exist transiently inside a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsChain {
    visible: BitState,
    rng: ChaCha8Rng,
}

impl GibbsChain {
    pub fn new(start: BitState, seed: u64) -> Self {
        GibbsChain {
            visible: start,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn with_rng(start: BitState, rng: ChaCha8Rng) -> Self {
        GibbsChain { visible: start, rng }
    }

    pub fn visible(&self) -> &BitState {
        &self.visible
    }

    pub fn step<T: Scalar>(&mut self, params: &RbmParams<T>) -> Result<()> {
        params.check_visible(&self.visible)?;
        let mut hidden = vec![0u8; params.n_hidden()];
        let mut scratch = vec![T::zero(); params.n_visible()];
        params.gibbs_sweep(self.visible.bits_mut(), &mut hidden, &mut scratch, &mut self.rng);
        Ok(())
    }

    /// Advances `steps` sweeps, reusing scratch buffers.
    pub fn advance<T: Scalar>(&mut self, params: &RbmParams<T>, steps: usize) -> Result<()> {
        params.check_visible(&self.visible)?;
        let mut hidden = vec![0u8; params.n_hidden()];
        let mut scratch = vec![T::zero(); params.n_visible()];
        for _ in 0..steps {
            params.gibbs_sweep(self.visible.bits_mut(), &mut hidden, &mut scratch, &mut self.rng);
        }
        Ok(())
    }
}

/// Functional form of [`GibbsChain::step`]: returns the advanced chain.
pub fn gibbs_step<T: Scalar>(params: &RbmParams<T>, chain: &GibbsChain) -> Result<GibbsChain> {
    let mut next = chain.clone();
    next.step(params)?;
    Ok(next)
}

/// The visible state after `k` Gibbs sweeps from `start`.
pub fn gibbs_chain_k<T: Scalar>(
    params: &RbmParams<T>,
    start: &BitState,
    k: usize,
    seed: u64,
) -> Result<BitState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    params.reconstruct(start, k, &mut rng)
}
