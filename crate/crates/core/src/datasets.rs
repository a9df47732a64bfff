//! Benchmark training spaces (states plus target probabilities), train/test
//! splitting and the plain-text dataset file format.
//!
//! File format: a header line `<name> <n_bits> <count>` followed by `count`
//! records `<bitstring> <probability>`, probabilities printed with 17
//! significant digits. Lines starting with `#` and blank lines are ignored.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bits::BitState;
use crate::error::{Error, Result};

/// Tolerance on `Σ target_probs = 1`.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Default `p_max / p_min` for the Gaussian-profile spaces.
pub const DEFAULT_P_RATIO: f64 = 100.0;

/// Names accepted by [`by_name`], in table order.
pub const BENCHMARK_NAMES: [&str; 9] = [
    "BS09", "BS16", "LSE11", "LSE15", "P08", "P10", "Int12", "Mult3G", "Mult3D",
];

/// A training space: distinct states with positive target probabilities
/// summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    n_bits: usize,
    states: Vec<BitState>,
    target_probs: Vec<f64>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        n_bits: usize,
        states: Vec<BitState>,
        target_probs: Vec<f64>,
    ) -> Result<Self> {
        check_records(n_bits, &states, &target_probs)?;
        let sum: f64 = target_probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidDataset(format!(
                "target probabilities sum to {sum:.17e}"
            )));
        }
        Ok(Dataset {
            name: name.into(),
            n_bits,
            states,
            target_probs,
        })
    }

    /// Uniform ("empirical") target distribution over `states`.
    pub fn uniform(name: impl Into<String>, n_bits: usize, states: Vec<BitState>) -> Result<Self> {
        let p = 1.0 / states.len() as f64;
        let probs = vec![p; states.len()];
        Dataset::new(name, n_bits, states, probs)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[BitState] {
        &self.states
    }

    pub fn target_probs(&self) -> &[f64] {
        &self.target_probs
    }

    /// `Σ p ln p` of the target distribution.
    pub fn neg_entropy(&self) -> f64 {
        self.target_probs.iter().map(|&p| p * p.ln()).sum()
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        write_records(out, &self.name, self.n_bits, &self.states, &self.target_probs)
    }

    pub fn to_file_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("dataset text is ASCII")
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let (name, n_bits, states, probs) = read_records(input)?;
        Dataset::new(name, n_bits, states, probs).map_err(|e| Error::Parse {
            line: 1,
            msg: e.to_string(),
        })
    }
}

/// Held-out states from [`split`]. Probabilities keep their values from the
/// full training space, so they do not sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    pub name: String,
    pub n_bits: usize,
    pub states: Vec<BitState>,
    pub target_probs: Vec<f64>,
}

impl TestSet {
    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        write_records(out, &self.name, self.n_bits, &self.states, &self.target_probs)
    }

    /// Reads either a dataset or a held-out file; normalization is not checked.
    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let (name, n_bits, states, target_probs) = read_records(input)?;
        Ok(TestSet {
            name,
            n_bits,
            states,
            target_probs,
        })
    }
}

impl From<Dataset> for TestSet {
    fn from(d: Dataset) -> Self {
        TestSet {
            name: d.name,
            n_bits: d.n_bits,
            states: d.states,
            target_probs: d.target_probs,
        }
    }
}

fn check_records(n_bits: usize, states: &[BitState], probs: &[f64]) -> Result<()> {
    if n_bits == 0 {
        return Err(Error::InvalidDataset("n_bits must be positive".into()));
    }
    if states.is_empty() {
        return Err(Error::InvalidDataset("no states".into()));
    }
    if states.len() != probs.len() {
        return Err(Error::InvalidDataset(format!(
            "{} states but {} probabilities",
            states.len(),
            probs.len()
        )));
    }
    let mut seen = HashSet::with_capacity(states.len());
    for (k, s) in states.iter().enumerate() {
        if s.len() != n_bits {
            return Err(Error::InvalidDataset(format!(
                "state {k} has {} bits, expected {n_bits}",
                s.len()
            )));
        }
        if !seen.insert(s) {
            return Err(Error::InvalidDataset(format!("duplicate state {s}")));
        }
    }
    if let Some(k) = probs.iter().position(|&p| !(p > 0.0 && p.is_finite())) {
        return Err(Error::InvalidDataset(format!(
            "probability of state {k} is not positive: {}",
            probs[k]
        )));
    }
    Ok(())
}

fn write_records<W: Write>(
    mut out: W,
    name: &str,
    n_bits: usize,
    states: &[BitState],
    probs: &[f64],
) -> Result<()> {
    let mut text = String::with_capacity(states.len() * (n_bits + 26));
    writeln!(text, "{name} {n_bits} {}", states.len()).unwrap();
    for (s, p) in states.iter().zip(probs) {
        writeln!(text, "{s} {p:.16e}").unwrap();
    }
    out.write_all(text.as_bytes())?;
    Ok(())
}

type Records = (String, usize, Vec<BitState>, Vec<f64>);

fn read_records<R: BufRead>(input: R) -> Result<Records> {
    let parse_err = |line: usize, msg: String| Error::Parse { line, msg };
    let mut header: Option<(String, usize, usize, usize)> = None;
    let mut states = Vec::new();
    let mut probs = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in input.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match &header {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err(lineno, "header must be `<name> <n_bits> <count>`".into()));
                }
                let n_bits = fields[1]
                    .parse::<usize>()
                    .map_err(|e| parse_err(lineno, format!("bad n_bits: {e}")))?;
                let count = fields[2]
                    .parse::<usize>()
                    .map_err(|e| parse_err(lineno, format!("bad count: {e}")))?;
                if n_bits == 0 || count == 0 {
                    return Err(parse_err(lineno, "n_bits and count must be positive".into()));
                }
                header = Some((fields[0].to_string(), n_bits, count, lineno));
            }
            Some((_, n_bits, count, _)) => {
                if fields.len() != 2 {
                    return Err(parse_err(lineno, "record must be `<bits> <probability>`".into()));
                }
                if states.len() == *count {
                    return Err(parse_err(lineno, format!("more than {count} records")));
                }
                let state: BitState = fields[0]
                    .parse()
                    .map_err(|e: Error| parse_err(lineno, e.to_string()))?;
                if state.len() != *n_bits {
                    return Err(parse_err(
                        lineno,
                        format!("state has {} bits, expected {n_bits}", state.len()),
                    ));
                }
                let p: f64 = fields[1]
                    .parse()
                    .map_err(|e| parse_err(lineno, format!("bad probability: {e}")))?;
                if !(p > 0.0 && p.is_finite()) {
                    return Err(parse_err(lineno, format!("probability {p} is not positive")));
                }
                if !seen.insert(state.clone()) {
                    return Err(parse_err(lineno, format!("duplicate state {state}")));
                }
                states.push(state);
                probs.push(p);
            }
        }
    }
    let (name, n_bits, count, header_line) =
        header.ok_or_else(|| parse_err(1, "missing header".into()))?;
    if states.len() != count {
        return Err(parse_err(
            header_line,
            format!("header declares {count} records, found {}", states.len()),
        ));
    }
    Ok((name, n_bits, states, probs))
}

/// Bars and stripes: every `rows × cols` image whose rows are each constant,
/// together with every image whose columns are each constant. The all-zero
/// and all-one images appear once. Sorted by canonical index.
pub fn gen_bars_stripes(rows: usize, cols: usize) -> Result<Dataset> {
    if rows < 2 || cols < 2 {
        return Err(Error::invalid("bars and stripes needs rows, cols >= 2"));
    }
    let n = rows * cols;
    if n > 64 {
        return Err(Error::invalid("bars and stripes image larger than 64 bits"));
    }
    let mut set = HashSet::new();
    for mask in 0..1u64 << rows {
        let bits = (0..n)
            .map(|p| ((mask >> (rows - 1 - p / cols)) & 1) as u8)
            .collect();
        set.insert(BitState::from_bits(bits)?);
    }
    for mask in 0..1u64 << cols {
        let bits = (0..n)
            .map(|p| ((mask >> (cols - 1 - p % cols)) & 1) as u8)
            .collect();
        set.insert(BitState::from_bits(bits)?);
    }
    let mut states: Vec<BitState> = set.into_iter().collect();
    states.sort_by_key(BitState::to_index);
    Dataset::uniform(format!("BS{n:02}"), n, states)
}

/// Labeled shifter ensemble over `n`-bit patterns. For each pattern (in
/// ascending order) and each label `001`, `010`, `100` the state is
/// `pattern ‖ label ‖ transformed`, where the transform is a circular shift
/// left by one, the identity, or a circular shift right by one.
pub fn gen_shifter(n: usize) -> Result<Dataset> {
    if !(2..=30).contains(&n) {
        return Err(Error::invalid("shifter pattern length must be in 2..=30"));
    }
    let labels: [(&str, fn(&BitState) -> BitState); 3] = [
        ("001", |s| s.rotate_left(1)),
        ("010", |s| s.clone()),
        ("100", |s| s.rotate_right(1)),
    ];
    let mut states = Vec::with_capacity(3 << n);
    for index in 0..1u64 << n {
        let pattern = BitState::from_index(index, n);
        for (code, transform) in &labels {
            let label: BitState = code.parse()?;
            states.push(pattern.concat(&label).concat(&transform(&pattern)));
        }
    }
    Dataset::uniform(format!("LSE{:02}", 2 * n + 3), 2 * n + 3, states)
}

/// Parity: all `n`-bit states with an even (or odd) number of ones.
pub fn gen_parity(n: usize, even: bool) -> Result<Dataset> {
    if !(1..=30).contains(&n) {
        return Err(Error::invalid("parity length must be in 1..=30"));
    }
    let want = if even { 0 } else { 1 };
    let states = (0..1u64 << n)
        .filter(|i| i.count_ones() % 2 == want)
        .map(|i| BitState::from_index(i, n))
        .collect();
    Dataset::uniform(format!("P{n:02}"), n, states)
}

/// Normalized Gaussian-like profile over positions `0..count`.
///
/// Unnormalized weights decay as `q(n) = p_max (p_min/p_max)^(n²/(count−1)²)`,
/// so `q(0) = p_max` and `q(count−1) = p_min`.
pub fn gaussian_profile(count: usize, p_max: f64, p_min: f64) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(Error::invalid("profile needs at least two positions"));
    }
    if !(p_min > 0.0 && p_max > p_min && p_max.is_finite()) {
        return Err(Error::invalid("profile needs p_max > p_min > 0"));
    }
    let q = unnormalized_profile(count, p_max, p_min);
    let total: f64 = q.iter().sum();
    Ok(q.into_iter().map(|v| v / total).collect())
}

pub(crate) fn unnormalized_profile(count: usize, p_max: f64, p_min: f64) -> Vec<f64> {
    let decay = (p_max / p_min).ln() / ((count - 1) as f64).powi(2);
    (0..count)
        .map(|n| p_max * (-decay * (n as f64).powi(2)).exp())
        .collect()
}

fn check_ratio(p_ratio: f64) -> Result<()> {
    if p_ratio > 1.0 && p_ratio.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("p_ratio must be a finite value > 1"))
    }
}

/// The integers `0..4096` as 12-bit states; integer `n` gets profile weight `p(n)`.
pub fn gen_int12(p_ratio: f64) -> Result<Dataset> {
    check_ratio(p_ratio)?;
    let probs = gaussian_profile(4096, p_ratio, 1.0)?;
    let states = (0..4096).map(|n| BitState::from_index(n, 12)).collect();
    Dataset::new("Int12", 12, states, probs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mult3Variant {
    Gauss,
    Discrete,
}

/// Group sums of the discrete variant, residues 0, 1, 2 (mod 3).
pub const MULT3_GROUP_MASS: [f64; 3] = [0.6, 0.3, 0.1];

/// `0..4096` ordered as multiples of three, then `≡ 1`, then `≡ 2 (mod 3)`.
pub fn mult3_order() -> Vec<u64> {
    (0..3)
        .flat_map(|r| (0..4096u64).filter(move |n| n % 3 == r))
        .collect()
}

/// The 12-bit integers in [`mult3_order`]. States are stored in list order.
pub fn gen_mult3(variant: Mult3Variant, p_ratio: f64) -> Result<Dataset> {
    let order = mult3_order();
    let probs = match variant {
        Mult3Variant::Gauss => {
            check_ratio(p_ratio)?;
            gaussian_profile(order.len(), p_ratio, 1.0)?
        }
        Mult3Variant::Discrete => {
            let sizes: Vec<usize> = (0..3)
                .map(|r| order.iter().filter(|&&n| n % 3 == r).count())
                .collect();
            order
                .iter()
                .map(|&n| {
                    let r = (n % 3) as usize;
                    MULT3_GROUP_MASS[r] / sizes[r] as f64
                })
                .collect()
        }
    };
    let name = match variant {
        Mult3Variant::Gauss => "Mult3G",
        Mult3Variant::Discrete => "Mult3D",
    };
    let states = order.iter().map(|&n| BitState::from_index(n, 12)).collect();
    Dataset::new(name, 12, states, probs)
}

/// One of the nine named benchmark spaces. `p_ratio` only affects the
/// Gaussian-profile spaces.
pub fn by_name(name: &str, p_ratio: f64) -> Result<Dataset> {
    match name {
        "BS09" => gen_bars_stripes(3, 3),
        "BS16" => gen_bars_stripes(4, 4),
        "LSE11" => gen_shifter(4),
        "LSE15" => gen_shifter(6),
        "P08" => gen_parity(8, true),
        "P10" => gen_parity(10, true),
        "Int12" => gen_int12(p_ratio),
        "Mult3G" => gen_mult3(Mult3Variant::Gauss, p_ratio),
        "Mult3D" => gen_mult3(Mult3Variant::Discrete, p_ratio),
        other => Err(Error::invalid(format!(
            "unknown dataset {other:?}; expected one of {}",
            BENCHMARK_NAMES.join(", ")
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

/// Number of training states: `round(fraction · len)`, halves rounded up.
pub fn train_size(len: usize, fraction: f64) -> usize {
    (fraction * len as f64 + 0.5).floor() as usize
}

/// Uniformly random train/test partition. The training part is renormalized;
/// the held-out part keeps its original probabilities. Both keep the original
/// state order.
pub fn split(dataset: &Dataset, spec: SplitSpec) -> Result<(Dataset, TestSet)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::invalid("train fraction must lie in (0, 1)"));
    }
    let n_train = train_size(dataset.len(), spec.train_fraction);
    if n_train == 0 || n_train == dataset.len() {
        return Err(Error::invalid(format!(
            "train fraction {} leaves an empty part of a {}-state dataset",
            spec.train_fraction,
            dataset.len()
        )));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let mut in_train = vec![false; dataset.len()];
    for &k in &order[..n_train] {
        in_train[k] = true;
    }

    let (mut train_states, mut train_probs) = (Vec::new(), Vec::new());
    let (mut test_states, mut test_probs) = (Vec::new(), Vec::new());
    for (k, (s, &p)) in dataset.states.iter().zip(&dataset.target_probs).enumerate() {
        if in_train[k] {
            train_states.push(s.clone());
            train_probs.push(p);
        } else {
            test_states.push(s.clone());
            test_probs.push(p);
        }
    }
    let mass: f64 = train_probs.iter().sum();
    let train_probs = train_probs.into_iter().map(|p| p / mass).collect();
    let train = Dataset::new(
        format!("{}-train", dataset.name),
        dataset.n_bits,
        train_states,
        train_probs,
    )?;
    let test = TestSet {
        name: format!("{}-test", dataset.name),
        n_bits: dataset.n_bits,
        states: test_states,
        target_probs: test_probs,
    };
    Ok((train, test))
}
