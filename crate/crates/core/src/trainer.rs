//! Gradient-ascent training loop, grid search and matched-parameter
//! estimator comparisons.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bits::BitState;
use crate::datasets::Dataset;
use crate::error::{check_len, Error, Result};
use crate::exact::{check_enumerable, exact_kl, DEFAULT_ENUMERATION_LIMIT};
use crate::gradients::{weighted_combination, EstimatorKind, GradientDelta, NegativePhase};
use crate::math::weighted_softmax;
use crate::model::RbmParams;
use crate::scalar::Scalar;

// Generator streams derived from the run seed.
const STREAM_INIT: u64 = 0;
const STREAM_TRAIN: u64 = 1;
const CHAIN_SEED_SALT: u64 = 0x5DEE_CE66_D1CE_4E5B;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    Fixed,
    /// `η_t = η_0 (1 − t/epochs)` with `t` the number of completed epochs.
    #[serde(alias = "linear_decay")]
    Linear,
}

impl Schedule {
    pub fn rate(self, base: f64, completed_epochs: usize, epochs: usize) -> f64 {
        match self {
            Schedule::Fixed => base,
            Schedule::Linear => base * (1.0 - completed_epochs as f64 / epochs as f64),
        }
    }
}

impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(Schedule::Fixed),
            "linear" | "linear_decay" => Ok(Schedule::Linear),
            other => Err(Error::invalid(format!("unknown schedule {other:?}"))),
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Schedule::Fixed => "fixed",
            Schedule::Linear => "linear",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BatchSize {
    Full,
    Size(usize),
}

impl FromStr for BatchSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("full") {
            return Ok(BatchSize::Full);
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(BatchSize::Size(n)),
            _ => Err(Error::invalid(format!("batch size must be `full` or a positive integer, got {s:?}"))),
        }
    }
}

impl fmt::Display for BatchSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BatchSize::Full => f.write_str("full"),
            BatchSize::Size(n) => write!(f, "{n}"),
        }
    }
}

impl Serialize for BatchSize {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BatchSize::Full => s.serialize_str("full"),
            BatchSize::Size(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for BatchSize {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(u64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Int(0) => Err(serde::de::Error::custom("batch size must be positive")),
            Repr::Int(n) => Ok(BatchSize::Size(n as usize)),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub estimator: EstimatorKind,
    pub n_hidden: usize,
    /// Standard deviation of the Gaussian weight initialization.
    pub init_sigma: f64,
    pub learning_rate: f64,
    pub schedule: Schedule,
    pub momentum: f64,
    /// Applied to `W` only.
    pub weight_decay: f64,
    pub batch_size: BatchSize,
    pub epochs: usize,
    pub seed: u64,
    /// Epochs between exact KL evaluations.
    pub kl_record_stride: usize,
    pub enumeration_limit: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            estimator: EstimatorKind::Cd { k: 1 },
            n_hidden: 16,
            init_sigma: 0.01,
            learning_rate: 0.01,
            schedule: Schedule::Fixed,
            momentum: 0.9,
            weight_decay: 0.0,
            batch_size: BatchSize::Full,
            epochs: 1000,
            seed: 0,
            kl_record_stride: 50,
            enumeration_limit: DEFAULT_ENUMERATION_LIMIT,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.estimator.validate()?;
        let fail = |m: &str| Err(Error::invalid(m.to_string()));
        if self.n_hidden == 0 {
            return fail("n_hidden must be positive");
        }
        if !(self.init_sigma > 0.0 && self.init_sigma.is_finite()) {
            return fail("init_sigma must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return fail("momentum must lie in [0, 1)");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return fail("weight_decay must be nonnegative");
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1");
        }
        if self.kl_record_stride == 0 {
            return fail("kl_record_stride must be positive");
        }
        if let BatchSize::Size(0) = self.batch_size {
            return fail("batch size must be positive");
        }
        Ok(())
    }
}

/// `W` entries i.i.d. `N(0, sigma²)`, biases zero.
pub fn init_params<T: Scalar>(n_visible: usize, n_hidden: usize, sigma: f64, seed: u64) -> Result<RbmParams<T>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("init sigma must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_INIT);
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut params = RbmParams::zeros(n_visible, n_hidden);
    for w in params.weights_mut() {
        *w = T::of(normal.sample(&mut rng));
    }
    Ok(params)
}

/// Heavy-ball velocity carried between updates.
#[derive(Debug, Clone, PartialEq)]
pub struct Momentum<T> {
    pub velocity: GradientDelta<T>,
}

impl<T: Scalar> Momentum<T> {
    pub fn new(params: &RbmParams<T>) -> Self {
        Momentum {
            velocity: GradientDelta::zeros_like(params),
        }
    }
}

/// One ascent update with `g = negative − positive`:
/// `v ← m v + η g`, `θ ← θ + v − η λ θ` (decay on `W` only).
///
/// On a non-finite result neither the parameters nor the velocity change.
pub fn sgd_step<T: Scalar>(
    params: &mut RbmParams<T>,
    positive: &GradientDelta<T>,
    negative: &GradientDelta<T>,
    state: &mut Momentum<T>,
    learning_rate: f64,
    momentum: f64,
    weight_decay: f64,
) -> Result<()> {
    check_len("positive phase visible", params.n_visible(), positive.n_visible())?;
    check_len("positive phase hidden", params.n_hidden(), positive.n_hidden())?;
    let g = negative.sub(positive)?;
    let (eta, mu, decay) = (T::of(learning_rate), T::of(momentum), T::of(weight_decay));

    let mut velocity = state.velocity.clone();
    velocity.scale(mu);
    velocity.add_scaled(&g, eta)?;
    if !velocity.is_finite() {
        return Err(Error::NonFinite { epoch: 0 });
    }
    let mut next = params.clone();
    for (p, &v) in next.visible_bias_mut().iter_mut().zip(&velocity.db) {
        *p = *p + v;
    }
    for (p, &v) in next.hidden_bias_mut().iter_mut().zip(&velocity.dc) {
        *p = *p + v;
    }
    for (p, &v) in next.weights_mut().iter_mut().zip(&velocity.dw) {
        *p = *p + v - eta * decay * *p;
    }
    if !next.is_finite() {
        return Err(Error::NonFinite { epoch: 0 });
    }
    *params = next;
    state.velocity = velocity;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlPoint {
    pub epoch: usize,
    pub kl: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum RunOutcome {
    Completed,
    /// Parameters became non-finite during `epoch`; the trace stops before it.
    Diverged { epoch: usize },
}

#[derive(Debug, Clone)]
pub struct RunRecord<T> {
    pub config: TrainConfig,
    pub kl_trace: Vec<KlPoint>,
    pub best_kl: f64,
    pub best_epoch: usize,
    pub best_params: RbmParams<T>,
    pub final_params: RbmParams<T>,
    pub outcome: RunOutcome,
    pub wall_time_secs: f64,
}

impl<T> RunRecord<T> {
    pub fn final_kl(&self) -> f64 {
        self.kl_trace.last().map_or(f64::INFINITY, |p| p.kl)
    }

    /// Mean KL over trace points in the last quarter of the recorded epochs.
    pub fn final_quarter_mean_kl(&self) -> f64 {
        let Some(last) = self.kl_trace.last() else {
            return f64::INFINITY;
        };
        let cut = last.epoch as f64 * 0.75;
        let tail: Vec<f64> = self
            .kl_trace
            .iter()
            .filter(|p| p.epoch as f64 > cut)
            .map(|p| p.kl)
            .collect();
        tail.iter().sum::<f64>() / tail.len() as f64
    }

    pub fn diverged(&self) -> bool {
        matches!(self.outcome, RunOutcome::Diverged { .. })
    }
}

fn batch_weights<T: Scalar>(probs: &[f64]) -> Vec<T> {
    let prior: Vec<T> = probs.iter().map(|&p| T::of(p)).collect();
    weighted_softmax(&vec![T::zero(); prior.len()], &prior)
}

/// Trains from a seeded initialization.
///
/// Each epoch visits every state once: one batch holding the whole space for
/// [`BatchSize::Full`], otherwise a fresh shuffle split into consecutive
/// batches. Within a batch the target probabilities, renormalized, weight the
/// positive phase. The exact KL to the target is recorded every
/// `kl_record_stride` epochs and after the last epoch.
pub fn train<T: Scalar>(dataset: &Dataset, config: &TrainConfig) -> Result<RunRecord<T>> {
    config.validate()?;
    check_enumerable(dataset.n_bits(), config.enumeration_limit)?;
    let start = Instant::now();
    let nv = dataset.n_bits();
    let mut params: RbmParams<T> = init_params(nv, config.n_hidden, config.init_sigma, config.seed)?;
    let mut momentum = Momentum::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(STREAM_TRAIN);

    let n = dataset.len();
    let batch_len = match config.batch_size {
        BatchSize::Full => n,
        BatchSize::Size(b) => b.min(n),
    };
    let mut order: Vec<usize> = (0..n).collect();
    let mut negative: Option<NegativePhase> = None;

    let mut trace = Vec::new();
    let mut best_kl = f64::INFINITY;
    let mut best_epoch = 0;
    let mut best_params = params.clone();
    let mut outcome = RunOutcome::Completed;

    'epochs: for epoch in 1..=config.epochs {
        let eta = config.schedule.rate(config.learning_rate, epoch - 1, config.epochs);
        if batch_len < n {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch_len) {
            let batch: Vec<BitState> = chunk.iter().map(|&k| dataset.states()[k].clone()).collect();
            let probs: Vec<f64> = chunk.iter().map(|&k| dataset.target_probs()[k]).collect();
            let weights: Vec<T> = batch_weights(&probs);
            let neg_phase = match negative.as_mut() {
                Some(neg) => neg,
                None => negative.insert(NegativePhase::new(
                    config.estimator,
                    &batch,
                    config.seed ^ CHAIN_SEED_SALT,
                    config.enumeration_limit,
                )?),
            };
            let positive = weighted_combination(&params, &batch, &weights);
            let neg = neg_phase.estimate(&params, &batch, &weights, &mut rng)?;
            match sgd_step(
                &mut params,
                &positive,
                &neg,
                &mut momentum,
                eta,
                config.momentum,
                config.weight_decay,
            ) {
                Ok(()) => {}
                Err(Error::NonFinite { .. }) => {
                    outcome = RunOutcome::Diverged { epoch };
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
        }
        if epoch % config.kl_record_stride == 0 || epoch == config.epochs {
            let kl = exact_kl(&params, dataset, config.enumeration_limit)?.as_f64();
            if !kl.is_finite() {
                outcome = RunOutcome::Diverged { epoch };
                break;
            }
            trace.push(KlPoint { epoch, kl });
            if kl < best_kl {
                best_kl = kl;
                best_epoch = epoch;
                best_params = params.clone();
            }
        }
    }

    Ok(RunRecord {
        config: config.clone(),
        kl_trace: trace,
        best_kl,
        best_epoch,
        best_params,
        final_params: params,
        outcome,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Hyperparameter mesh. Hidden sizes are multiples of the visible size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub hidden_multipliers: Vec<usize>,
    pub init_sigmas: Vec<f64>,
    pub learning_rates: Vec<f64>,
    pub momenta: Vec<f64>,
    pub schedules: Vec<Schedule>,
    /// Seeds per configuration: `base.seed, base.seed + 1, …`.
    pub repetitions: usize,
}

impl GridSpec {
    /// Coarse mesh used for the small benchmark problems.
    pub fn standard() -> Self {
        GridSpec {
            hidden_multipliers: vec![1, 2, 3, 4, 5],
            init_sigmas: vec![1.0, 0.1, 0.01, 0.001, 0.0001],
            learning_rates: vec![0.1, 0.01, 0.001, 0.0001, 0.00001],
            momenta: vec![0.9],
            schedules: vec![Schedule::Fixed],
            repetitions: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_multipliers.is_empty()
            || self.init_sigmas.is_empty()
            || self.learning_rates.is_empty()
            || self.momenta.is_empty()
            || self.schedules.is_empty()
            || self.repetitions == 0
        {
            return Err(Error::invalid("every grid axis needs at least one value"));
        }
        if self.hidden_multipliers.contains(&0) {
            return Err(Error::invalid("hidden multipliers must be positive"));
        }
        Ok(())
    }

    /// Every configuration × repetition, ordered by configuration key and then seed.
    pub fn configs(&self, base: &TrainConfig, n_visible: usize) -> Vec<TrainConfig> {
        let mut out = Vec::new();
        for &mult in &self.hidden_multipliers {
            for &sigma in &self.init_sigmas {
                for &lr in &self.learning_rates {
                    for &mom in &self.momenta {
                        for &schedule in &self.schedules {
                            for rep in 0..self.repetitions {
                                out.push(TrainConfig {
                                    n_hidden: mult * n_visible,
                                    init_sigma: sigma,
                                    learning_rate: lr,
                                    momentum: mom,
                                    schedule,
                                    seed: base.seed.wrapping_add(rep as u64),
                                    ..base.clone()
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct GridResult<T> {
    pub records: Vec<RunRecord<T>>,
    /// Index into `records` of the run with the smallest KL at any step.
    pub best: usize,
}

impl<T> GridResult<T> {
    pub fn best_record(&self) -> &RunRecord<T> {
        &self.records[self.best]
    }
}

/// Trains every mesh point. Runs execute on the current rayon pool; results
/// keep [`GridSpec::configs`] order. Diverged runs stay in the table.
pub fn grid_search<T: Scalar>(dataset: &Dataset, grid: &GridSpec, base: &TrainConfig) -> Result<GridResult<T>> {
    grid.validate()?;
    let configs = grid.configs(base, dataset.n_bits());
    for c in &configs {
        c.validate()?;
    }
    check_enumerable(dataset.n_bits(), base.enumeration_limit)?;
    let records = configs
        .par_iter()
        .map(|c| train::<T>(dataset, c))
        .collect::<Result<Vec<_>>>()?;
    let best = argmin_best_kl(&records);
    Ok(GridResult { records, best })
}

fn argmin_best_kl<T>(records: &[RunRecord<T>]) -> usize {
    records
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bk), (i, r)| {
            if r.best_kl < bk {
                (i, r.best_kl)
            } else {
                (bi, bk)
            }
        })
        .0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub estimator: EstimatorKind,
    pub n_hidden: usize,
    pub seed: u64,
    pub best_kl: f64,
    pub best_epoch: usize,
    pub final_kl: f64,
    pub final_quarter_mean_kl: f64,
    pub diverged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    /// Sample standard deviation (`n − 1` denominator).
    pub std: f64,
    pub n: usize,
}

impl Stats {
    pub fn of(values: &[f64]) -> Stats {
        let n = values.len();
        if n == 0 {
            return Stats { mean: f64::NAN, std: f64::NAN, n };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Stats { mean, std: var.sqrt(), n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: EstimatorKind,
    pub best_kl: Stats,
    pub final_quarter_mean_kl: Stats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub summaries: Vec<EstimatorSummary>,
}

/// Runs two estimators with shared hyperparameters over a hidden-size sweep
/// (multiples of the visible size; empty means `base.n_hidden` only) and the
/// given seeds.
pub fn paired_comparison<T: Scalar>(
    dataset: &Dataset,
    base: &TrainConfig,
    estimators: (EstimatorKind, EstimatorKind),
    hidden_multipliers: &[usize],
    seeds: &[u64],
) -> Result<(ComparisonReport, Vec<RunRecord<T>>)> {
    if seeds.is_empty() {
        return Err(Error::Empty("seeds"));
    }
    let hidden: Vec<usize> = if hidden_multipliers.is_empty() {
        vec![base.n_hidden]
    } else {
        hidden_multipliers.iter().map(|m| m * dataset.n_bits()).collect()
    };
    let mut configs = Vec::new();
    for est in [estimators.0, estimators.1] {
        for &nh in &hidden {
            for &seed in seeds {
                let c = TrainConfig {
                    estimator: est,
                    n_hidden: nh,
                    seed,
                    ..base.clone()
                };
                c.validate()?;
                configs.push(c);
            }
        }
    }
    check_enumerable(dataset.n_bits(), base.enumeration_limit)?;
    let records = configs
        .par_iter()
        .map(|c| train::<T>(dataset, c))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<ComparisonRow> = records
        .iter()
        .map(|r| ComparisonRow {
            estimator: r.config.estimator,
            n_hidden: r.config.n_hidden,
            seed: r.config.seed,
            best_kl: r.best_kl,
            best_epoch: r.best_epoch,
            final_kl: r.final_kl(),
            final_quarter_mean_kl: r.final_quarter_mean_kl(),
            diverged: r.diverged(),
        })
        .collect();
    let per_run = hidden.len() * seeds.len();
    let summaries = rows
        .chunks(per_run)
        .map(|chunk| EstimatorSummary {
            estimator: chunk[0].estimator,
            best_kl: Stats::of(&chunk.iter().map(|r| r.best_kl).collect::<Vec<_>>()),
            final_quarter_mean_kl: Stats::of(
                &chunk.iter().map(|r| r.final_quarter_mean_kl).collect::<Vec<_>>(),
            ),
        })
        .collect();
    Ok((ComparisonReport { rows, summaries }, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{gen_bars_stripes, gen_parity};
    use crate::exact::{compute_exact_distribution, dataset_loglikelihood};
    use crate::gradients::exact_loglik_gradient;

    fn quick(estimator: EstimatorKind, epochs: usize) -> TrainConfig {
        TrainConfig {
            estimator,
            n_hidden: 6,
            init_sigma: 0.1,
            learning_rate: 0.05,
            momentum: 0.5,
            epochs,
            seed: 3,
            kl_record_stride: 10,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn init_statistics_and_determinism() {
        let p: RbmParams<f64> = init_params(100, 100, 0.01, 7).unwrap();
        let n = p.weights().len() as f64;
        let mean = p.weights().iter().sum::<f64>() / n;
        let std = (p.weights().iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((std - 0.01).abs() < 0.001);
        assert!(p.visible_bias().iter().chain(p.hidden_bias()).all(|&v| v == 0.0));
        assert_eq!(p, init_params(100, 100, 0.01, 7).unwrap());
        assert!(init_params::<f64>(2, 2, 0.0, 1).is_err());
    }

    #[test]
    fn plain_step_without_momentum() {
        let mut p = RbmParams::<f64>::zeros(2, 1);
        let mut st = Momentum::new(&p);
        let pos = GradientDelta { db: vec![1.0, 0.0], dc: vec![0.5], dw: vec![0.0, 2.0] };
        let neg = GradientDelta { db: vec![0.0, 1.0], dc: vec![0.0], dw: vec![1.0, 0.0] };
        sgd_step(&mut p, &pos, &neg, &mut st, 0.1, 0.0, 0.0).unwrap();
        assert_eq!(p.visible_bias(), &[-0.1, 0.1]);
        assert_eq!(p.hidden_bias(), &[-0.05]);
        assert_eq!(p.weights(), &[0.1, -0.2]);
    }

    #[test]
    fn momentum_drift_is_geometric() {
        let mut p = RbmParams::<f64>::zeros(1, 1);
        let mut st = Momentum::new(&p);
        st.velocity.db[0] = 1.0;
        let zero = GradientDelta::zeros(1, 1);
        let steps = 40;
        for _ in 0..steps {
            sgd_step(&mut p, &zero, &zero, &mut st, 0.1, 0.9, 0.0).unwrap();
        }
        // Σ_{t=1..n} 0.9^t
        let expect = 0.9 * (1.0 - 0.9f64.powi(steps)) / (1.0 - 0.9);
        assert!((p.visible_bias()[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn weight_decay_touches_weights_only() {
        let mut p = RbmParams::<f64>::from_parts(vec![1.0], vec![1.0], vec![1.0]).unwrap();
        let mut st = Momentum::new(&p);
        let zero = GradientDelta::zeros(1, 1);
        sgd_step(&mut p, &zero, &zero, &mut st, 0.5, 0.0, 0.1).unwrap();
        assert_eq!(p.visible_bias(), &[1.0]);
        assert_eq!(p.hidden_bias(), &[1.0]);
        assert!((p.weights()[0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn non_finite_update_leaves_params_untouched() {
        let mut p = RbmParams::<f64>::zeros(1, 1);
        let before = p.clone();
        let mut st = Momentum::new(&p);
        let neg = GradientDelta { db: vec![f64::INFINITY], dc: vec![0.0], dw: vec![0.0] };
        let zero = GradientDelta::zeros(1, 1);
        assert!(matches!(
            sgd_step(&mut p, &zero, &neg, &mut st, 0.1, 0.0, 0.0),
            Err(Error::NonFinite { .. })
        ));
        assert_eq!(p, before);
        let wrong = GradientDelta::zeros(2, 1);
        assert!(sgd_step(&mut p, &wrong, &zero, &mut st, 0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn exact_step_increases_loglikelihood() {
        let d = gen_parity(4, true).unwrap();
        let mut p: RbmParams<f64> = init_params(4, 3, 0.5, 2).unwrap();
        let ll = |q: &RbmParams<f64>| dataset_loglikelihood(&d, &compute_exact_distribution(q, 25).unwrap()).unwrap();
        let before = ll(&p);
        let g = exact_loglik_gradient(&p, &d, 25).unwrap();
        let mut st = Momentum::new(&p);
        // sgd_step ascends along negative − positive, which is g itself
        sgd_step(&mut p, &GradientDelta::zeros(4, 3), &g, &mut st, 1e-3, 0.0, 0.0).unwrap();
        assert!(ll(&p) > before);
    }

    #[test]
    fn linear_schedule_reaches_zero_at_end() {
        assert_eq!(Schedule::Linear.rate(0.1, 0, 10), 0.1);
        assert_eq!(Schedule::Linear.rate(0.1, 10, 10), 0.0);
        assert_eq!(Schedule::Fixed.rate(0.1, 7, 10), 0.1);
    }

    #[test]
    fn single_epoch_yields_one_point() {
        let d = gen_bars_stripes(2, 2).unwrap();
        let r: RunRecord<f64> = train(&d, &quick(EstimatorKind::Cd { k: 1 }, 1)).unwrap();
        assert_eq!(r.kl_trace.len(), 1);
        assert_eq!(r.kl_trace[0].epoch, 1);
        let bad = TrainConfig { epochs: 0, ..quick(EstimatorKind::Cd { k: 1 }, 1) };
        assert!(train::<f64>(&d, &bad).is_err());
    }

    #[test]
    fn training_is_deterministic_and_tracks_best() {
        let d = gen_bars_stripes(2, 3).unwrap();
        for est in ["cd1", "wcd2", "pcd", "wpcd", "exact"] {
            let mut cfg = quick(est.parse().unwrap(), 60);
            cfg.batch_size = BatchSize::Size(4);
            let a: RunRecord<f64> = train(&d, &cfg).unwrap();
            let b: RunRecord<f64> = train(&d, &cfg).unwrap();
            assert_eq!(a.kl_trace, b.kl_trace, "{est}");
            assert_eq!(a.final_params, b.final_params);
            let min = a.kl_trace.iter().map(|p| p.kl).fold(f64::INFINITY, f64::min);
            assert_eq!(a.best_kl, min);
            let again = exact_kl(&a.best_params, &d, 25).unwrap();
            assert!((again - a.best_kl).abs() <= 1e-12);
            assert!(a.kl_trace.windows(2).all(|w| w[0].epoch < w[1].epoch));
        }
    }

    #[test]
    fn exact_training_kl_is_non_increasing() {
        let d = gen_bars_stripes(2, 2).unwrap();
        let cfg = TrainConfig {
            estimator: EstimatorKind::Exact,
            learning_rate: 0.01,
            momentum: 0.0,
            kl_record_stride: 5,
            epochs: 300,
            ..quick(EstimatorKind::Exact, 300)
        };
        let r: RunRecord<f64> = train(&d, &cfg).unwrap();
        assert!(r.kl_trace.windows(2).all(|w| w[1].kl <= w[0].kl + 1e-9));
        assert!(r.final_kl() < r.kl_trace[0].kl);
    }

    #[test]
    fn weighted_estimators_collapse_on_identical_reconstructions() {
        // one-state dataset: every batch, and so every reconstruction set, has one element
        let d = Dataset::uniform("one", 3, vec!["101".parse().unwrap()]).unwrap();
        let cd: RunRecord<f64> = train(&d, &quick(EstimatorKind::Cd { k: 3 }, 40)).unwrap();
        let wcd: RunRecord<f64> = train(&d, &quick(EstimatorKind::Wcd { k: 3 }, 40)).unwrap();
        assert_eq!(cd.final_params, wcd.final_params);
        assert_eq!(cd.kl_trace, wcd.kl_trace);
    }

    #[test]
    fn divergence_is_recorded_not_raised() {
        let d = gen_bars_stripes(2, 2).unwrap();
        let cfg = TrainConfig {
            learning_rate: f64::MAX,
            init_sigma: 1.0,
            ..quick(EstimatorKind::Cd { k: 1 }, 20)
        };
        let r: RunRecord<f64> = train(&d, &cfg).unwrap();
        assert!(r.diverged());
    }

    #[test]
    fn grid_bookkeeping() {
        let g = GridSpec::standard();
        assert_eq!(g.configs(&TrainConfig::default(), 9).len(), 1250);

        let d = gen_bars_stripes(2, 2).unwrap();
        let base = quick(EstimatorKind::Cd { k: 1 }, 20);
        let single = GridSpec {
            hidden_multipliers: vec![2],
            init_sigmas: vec![0.1],
            learning_rates: vec![0.05],
            momenta: vec![0.5],
            schedules: vec![Schedule::Fixed],
            repetitions: 1,
        };
        let res = grid_search::<f64>(&d, &single, &base).unwrap();
        let direct: RunRecord<f64> = train(&d, &TrainConfig { n_hidden: 8, ..base.clone() }).unwrap();
        assert_eq!(res.records.len(), 1);
        assert_eq!(res.records[0].kl_trace, direct.kl_trace);

        let mesh = GridSpec {
            learning_rates: vec![0.001, 0.05],
            repetitions: 2,
            ..single
        };
        let res = grid_search::<f64>(&d, &mesh, &base).unwrap();
        assert_eq!(res.records.len(), 4);
        let min = res.records.iter().map(|r| r.best_kl).fold(f64::INFINITY, f64::min);
        assert_eq!(res.best_record().best_kl, min);
        let empty = GridSpec { momenta: vec![], ..mesh };
        assert!(grid_search::<f64>(&d, &empty, &base).is_err());
    }

    #[test]
    fn comparison_bookkeeping() {
        let d = gen_bars_stripes(2, 2).unwrap();
        let base = quick(EstimatorKind::Cd { k: 1 }, 10);
        let seeds: Vec<u64> = (0..3).collect();
        let (rep, _) = paired_comparison::<f64>(
            &d,
            &base,
            (EstimatorKind::Cd { k: 1 }, EstimatorKind::Wcd { k: 1 }),
            &[1, 2],
            &seeds,
        )
        .unwrap();
        assert_eq!(rep.rows.len(), 2 * 2 * 3);
        assert_eq!(rep.summaries.len(), 2);

        let same = EstimatorKind::Pcd;
        let (rep, _) = paired_comparison::<f64>(&d, &base, (same, same), &[], &seeds).unwrap();
        assert_eq!(rep.summaries[0].best_kl, rep.summaries[1].best_kl);
    }

    #[test]
    fn config_text_forms() {
        let cfg = TrainConfig { batch_size: BatchSize::Size(100), estimator: EstimatorKind::Wcd { k: 10 }, ..TrainConfig::default() };
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains("\"wcd10\""));
        let back: TrainConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        let full: TrainConfig = serde_json::from_str(r#"{"batch_size":"full","schedule":"linear"}"#).unwrap();
        assert_eq!(full.batch_size, BatchSize::Full);
        assert_eq!(full.schedule, Schedule::Linear);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"bogus":1}"#).is_err());
        assert_eq!(Stats::of(&[1.0, 3.0]).std, 2f64.sqrt());
    }
}
