//! Model sampling and the Parzen-window unnormalized log-likelihood (uLL).
//!
//! Each sample `x_i` carries an isotropic Gaussian kernel of standard
//! deviation `σ`. A test point `y` scores
//! `ln G(y) = ln((1/N_s) Σ_i N(y; x_i, σ² I))` with the full Gaussian
//! density, normalization `(2πσ²)^(−d/2)` included, and the uLL is the mean of
//! `ln G` over the test points. Scores are only comparable under the same `σ`.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bits::BitState;
use crate::error::{check_len, Error, Result};
use crate::math::log_sum_exp;
use crate::model::{GibbsChain, RbmParams};
use crate::scalar::Scalar;

pub const DEFAULT_SIGMA: f64 = 0.2;
pub const DEFAULT_BURN_IN: usize = 1000;
pub const DEFAULT_THINNING: usize = 10;
pub const DEFAULT_CHAINS: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleMeta {
    /// Identifier of the checkpoint the samples came from (no whitespace).
    pub model_id: String,
    pub n_chains: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet<T> {
    dim: usize,
    samples: Vec<Vec<T>>,
    pub meta: SampleMeta,
}

impl<T: Scalar> SampleSet<T> {
    pub fn new(samples: Vec<Vec<T>>, meta: SampleMeta) -> Result<Self> {
        let dim = samples.first().ok_or(Error::Empty("sample set"))?.len();
        if dim == 0 {
            return Err(Error::Empty("sample vectors"));
        }
        for s in &samples {
            check_len("sample dimension", dim, s.len())?;
        }
        Ok(SampleSet { dim, samples, meta })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Vec<T>] {
        &self.samples
    }

    /// Header `d N_s n_chains burn_in thinning seed model_id`, then one sample
    /// per line: a bit string for binary samples, otherwise space-separated
    /// reals.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let m = &self.meta;
        let mut text = format!(
            "{} {} {} {} {} {} {}\n",
            self.dim,
            self.samples.len(),
            m.n_chains,
            m.burn_in,
            m.thinning,
            m.seed,
            if m.model_id.is_empty() { "-" } else { &m.model_id }
        );
        for s in &self.samples {
            if s.iter().all(|&v| v == T::zero() || v == T::one()) {
                text.extend(s.iter().map(|&v| if v == T::one() { '1' } else { '0' }));
            } else {
                let parts: Vec<String> = s.iter().map(|v| format!("{:.16e}", v.as_f64())).collect();
                text.push_str(&parts.join(" "));
            }
            text.push('\n');
        }
        out.write_all(text.as_bytes())?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::Parse { line, msg };
        let mut lines = input.lines().enumerate().filter(|(_, l)| {
            l.as_ref().map_or(true, |l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        });
        let (hline, header) = lines.next().ok_or_else(|| perr(1, "missing header".into()))?;
        let header = header?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 7 {
            return Err(perr(hline + 1, "header must be `d N_s n_chains burn_in thinning seed model_id`".into()));
        }
        let num = |k: usize| -> Result<u64> {
            h[k].parse::<u64>()
                .map_err(|e| perr(hline + 1, format!("bad header field {}: {e}", k + 1)))
        };
        let (dim, count) = (num(0)? as usize, num(1)? as usize);
        let meta = SampleMeta {
            n_chains: num(2)? as usize,
            burn_in: num(3)? as usize,
            thinning: num(4)? as usize,
            seed: num(5)?,
            model_id: h[6].to_string(),
        };
        let mut samples = Vec::with_capacity(count);
        for (idx, line) in lines {
            let line = line?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            let v: Vec<T> = if fields.len() == 1 && fields[0].chars().all(|c| c == '0' || c == '1') {
                let bits: BitState = fields[0].parse().map_err(|e: Error| perr(idx + 1, e.to_string()))?;
                bits.to_reals()
            } else {
                fields
                    .iter()
                    .map(|f| f.parse::<f64>().map(T::of).map_err(|e| perr(idx + 1, format!("bad value: {e}"))))
                    .collect::<Result<_>>()?
            };
            if v.len() != dim {
                return Err(perr(idx + 1, format!("sample has {} entries, expected {dim}", v.len())));
            }
            samples.push(v);
        }
        if samples.len() != count {
            return Err(perr(hline + 1, format!("header declares {count} samples, found {}", samples.len())));
        }
        SampleSet::new(samples, meta)
    }
}

/// Draws `n_samples` visible states from `n_chains` independent Gibbs chains.
///
/// Chain `c` starts from a uniformly random state drawn from generator stream
/// `c` of `seed`, discards `burn_in` sweeps and then records its state every
/// `thinning` sweeps. Sample `j` is the `(j / n_chains)`-th record of chain
/// `j mod n_chains`.
pub fn sample_model<T: Scalar>(
    params: &RbmParams<T>,
    n_samples: usize,
    burn_in: usize,
    thinning: usize,
    n_chains: usize,
    seed: u64,
) -> Result<SampleSet<T>> {
    if n_samples == 0 || n_chains == 0 || thinning == 0 {
        return Err(Error::invalid("sample count, chain count and thinning must be positive"));
    }
    let nv = params.n_visible();
    let per_chain: Vec<Vec<BitState>> = (0..n_chains)
        .into_par_iter()
        .map(|c| -> Result<Vec<BitState>> {
            let quota = (n_samples + n_chains - 1 - c) / n_chains;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let start: Vec<u8> = (0..nv).map(|_| rng.random_range(0..2u8)).collect();
            let mut chain = GibbsChain::with_rng(BitState::from_bits(start)?, rng);
            chain.advance(params, burn_in)?;
            let mut out = Vec::with_capacity(quota);
            for _ in 0..quota {
                chain.advance(params, thinning)?;
                out.push(chain.visible().clone());
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let samples = (0..n_samples)
        .map(|j| per_chain[j % n_chains][j / n_chains].to_reals())
        .collect();
    SampleSet::new(
        samples,
        SampleMeta {
            model_id: String::from("-"),
            n_chains,
            burn_in,
            thinning,
            seed,
        },
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParzenConfig {
    /// Kernel standard deviation shared by every sample.
    pub sigma: f64,
    /// Sample counts at which [`ull_curve`] reports the uLL, increasing.
    pub eval_points: Vec<usize>,
}

impl ParzenConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid("Parzen sigma must be positive"));
        }
        if self.eval_points.contains(&0) || self.eval_points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("eval points must be positive and strictly increasing"));
        }
        Ok(())
    }
}

/// Mean over `test` of `ln((1/N_s) Σ_i N(y; x_i, σ² I))`.
pub fn parzen_ull_points<T: Scalar>(test: &[Vec<T>], samples: &[Vec<T>], sigma: f64) -> Result<T> {
    if test.is_empty() {
        return Err(Error::Empty("test points"));
    }
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("Parzen sigma must be positive"));
    }
    let d = samples[0].len();
    for v in test.iter().chain(samples) {
        check_len("point dimension", d, v.len())?;
    }
    let sigma = T::of(sigma);
    let two_var = T::of(2.0) * sigma * sigma;
    let log_norm = T::of(d as f64 / 2.0) * (T::of(std::f64::consts::TAU) * sigma * sigma).ln();
    let log_ns = T::of(samples.len() as f64).ln();

    let per_point: Vec<T> = test
        .par_iter()
        .map_init(
            || Vec::with_capacity(samples.len()),
            |exponents: &mut Vec<T>, y| {
                exponents.clear();
                exponents.extend(samples.iter().map(|x| {
                    let sq = y
                        .iter()
                        .zip(x)
                        .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b));
                    -sq / two_var
                }));
                log_sum_exp(exponents) - log_ns - log_norm
            },
        )
        .collect();
    let total = per_point.into_iter().fold(T::zero(), |a, b| a + b);
    Ok(total / T::of(test.len() as f64))
}

/// uLL of `test` under `samples` (truncated to the largest eval point when
/// that is smaller than the set).
pub fn parzen_ull<T: Scalar>(test: &[Vec<T>], samples: &SampleSet<T>, config: &ParzenConfig) -> Result<T> {
    config.validate()?;
    let n = config
        .eval_points
        .last()
        .map_or(samples.len(), |&m| m.min(samples.len()));
    parzen_ull_points(test, &samples.samples[..n], config.sigma)
}

/// uLL on growing prefixes of the sample set, one value per eval point.
pub fn ull_curve<T: Scalar>(
    test: &[Vec<T>],
    samples: &SampleSet<T>,
    config: &ParzenConfig,
) -> Result<Vec<(usize, T)>> {
    config.validate()?;
    if let Some(&m) = config.eval_points.iter().find(|&&m| m > samples.len()) {
        return Err(Error::invalid(format!(
            "eval point {m} exceeds the {} available samples",
            samples.len()
        )));
    }
    config
        .eval_points
        .iter()
        .map(|&m| parzen_ull_points(test, &samples.samples[..m], config.sigma).map(|u| (m, u)))
        .collect()
}
