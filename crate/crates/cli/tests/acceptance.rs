//! Acceptance criteria. Runs as a plain binary (no libtest harness) so every
//! criterion prints its PASS/FAIL line. Set `ACCEPTANCE_ONLY=1,8` to run a
//! subset and `ACCEPTANCE_STRICT=1` to exit nonzero when any criterion fails.

use std::fs;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use twofloat::TwoFloat;

use wcd_core::datasets::{by_name, gen_mult3, Mult3Variant, BENCHMARK_NAMES, DEFAULT_P_RATIO};
use wcd_core::exact::compute_exact_distribution;
use wcd_core::gradients::{exact_loglik_gradient, exact_negative_phase, weighted_phase, PhaseTerm};
use wcd_core::parzen::{parzen_ull_points, sample_model};
use wcd_core::trainer::{grid_search, paired_comparison, train, GridSpec, Schedule, Stats};
use wcd_core::{BitState, Dataset, EstimatorKind, Rbm, RunRecord, TrainConfig};

const LIMIT: usize = wcd_core::DEFAULT_ENUMERATION_LIMIT;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn random_rbm(rng: &mut ChaCha8Rng, nv: usize, nh: usize) -> Rbm {
    let n = Normal::new(0.0, 1.0).unwrap();
    let mut draw = |len: usize| (0..len).map(|_| n.sample(rng)).collect::<Vec<f64>>();
    let (b, c, w) = (draw(nv), draw(nh), draw(nv * nh));
    Rbm::from_parts(b, c, w).unwrap()
}

fn random_dataset(rng: &mut ChaCha8Rng, nv: usize) -> Dataset {
    let space = 1u64 << nv;
    let size = rng.random_range(1..=space.min(20)) as usize;
    let mut idx: Vec<u64> = Vec::with_capacity(size);
    while idx.len() < size {
        let i = rng.random_range(0..space);
        if !idx.contains(&i) {
            idx.push(i);
        }
    }
    let raw: Vec<f64> = (0..size).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let states = idx.iter().map(|&i| BitState::from_index(i, nv)).collect();
    Dataset::new("random", nv, states, raw.iter().map(|p| p / total).collect()).unwrap()
}

// Double-double log-likelihood `Σ p (−F(x)) − ln Z` of flat parameters b‖c‖W.
fn loglik_dd(nv: usize, nh: usize, theta: &[TwoFloat], data: &Dataset) -> TwoFloat {
    let one = TwoFloat::from(1.0);
    let neg_f = |x: u64| {
        let bit = |j: usize| (x >> (nv - 1 - j)) & 1 == 1;
        let mut acc = TwoFloat::from(0.0);
        for j in 0..nv {
            if bit(j) {
                acc += theta[j];
            }
        }
        for i in 0..nh {
            let mut z = theta[nv + i];
            for j in 0..nv {
                if bit(j) {
                    z += theta[nv + nh + i * nv + j];
                }
            }
            acc += (one + z.exp()).ln();
        }
        acc
    };
    let all: Vec<TwoFloat> = (0..1u64 << nv).map(neg_f).collect();
    let max = all.iter().copied().fold(all[0], |m, v| if v > m { v } else { m });
    let z: TwoFloat = all.iter().fold(TwoFloat::from(0.0), |s, &v| s + (v - max).exp());
    let log_z = max + z.ln();
    data.states()
        .iter()
        .zip(data.target_probs())
        .fold(TwoFloat::from(0.0), |s, (x, &p)| s + TwoFloat::from(p) * all[x.to_index() as usize])
        - log_z
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let h = TwoFloat::from(1e-4);
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for _ in 0..50 {
        let nv = rng.random_range(2..=8);
        let nh = rng.random_range(1..=6);
        let p = random_rbm(&mut rng, nv, nh);
        let data = random_dataset(&mut rng, nv);
        let grad: Vec<f64> = exact_loglik_gradient(&p, &data, LIMIT).unwrap().iter().collect();
        let theta: Vec<TwoFloat> = p.flat().map(TwoFloat::from).collect();
        for (k, &g) in grad.iter().enumerate() {
            let at = |step: f64| {
                let mut t = theta.clone();
                t[k] += h * TwoFloat::from(step);
                loglik_dd(nv, nh, &t, &data)
            };
            // fourth-order central difference
            let d = (TwoFloat::from(8.0) * (at(1.0) - at(-1.0)) - (at(2.0) - at(-2.0)))
                / (TwoFloat::from(12.0) * h);
            let fd = d.hi() + d.lo();
            if fd.abs() > 1e-8 {
                worst = worst.max(((g - fd) / fd).abs());
                checked += 1;
            }
        }
    }
    outcome(
        worst <= 1e-5,
        format!("50 RBMs, {checked} components, max relative error {worst:.2e} (limit 1e-5)"),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let nv = rng.random_range(2..=8);
        let nh = rng.random_range(1..=6);
        let p = random_rbm(&mut rng, nv, nh);
        let dist = compute_exact_distribution(&p, LIMIT).unwrap();
        let terms: Vec<PhaseTerm<f64>> = dist
            .probs()
            .into_iter()
            .enumerate()
            .map(|(i, w)| PhaseTerm { state: BitState::from_index(i as u64, nv), weight: w })
            .collect();
        let weighted = weighted_phase(&p, &terms).unwrap();
        let exact = exact_negative_phase(&p, LIMIT).unwrap();
        worst = worst.max(weighted.max_abs_diff(&exact));
    }
    outcome(worst <= 1e-10, format!("20 RBMs, max abs difference {worst:.2e} (limit 1e-10)"))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    for _ in 0..30 {
        let nv = rng.random_range(1..=6);
        let nh = rng.random_range(1..=6);
        let p = random_rbm(&mut rng, nv, nh);
        let mut neg_e = Vec::with_capacity(1 << (nv + nh));
        for xi in 0..1u64 << nv {
            let x = BitState::from_index(xi, nv);
            for hi in 0..1u64 << nh {
                neg_e.push(-p.energy(&x, &BitState::from_index(hi, nh)).unwrap());
            }
        }
        let max = neg_e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let naive = max + neg_e.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let log_z = compute_exact_distribution(&p, LIMIT).unwrap().log_z();
        worst = worst.max(((log_z - naive) / naive).abs());
    }
    outcome(worst <= 1e-10, format!("30 RBMs, max relative error {worst:.2e} (limit 1e-10)"))
}

fn criterion_4() -> Outcome {
    let expected = [
        ("BS09", 14),
        ("BS16", 30),
        ("LSE11", 48),
        ("LSE15", 192),
        ("P08", 128),
        ("P10", 512),
        ("Int12", 4096),
        ("Mult3G", 4096),
        ("Mult3D", 4096),
    ];
    let mut bad = Vec::new();
    for (name, size) in expected {
        let n = by_name(name, DEFAULT_P_RATIO).unwrap().len();
        if n != size {
            bad.push(format!("{name}={n}"));
        }
    }
    assert_eq!(BENCHMARK_NAMES.len(), expected.len());
    let d = gen_mult3(Mult3Variant::Discrete, DEFAULT_P_RATIO).unwrap();
    let mut sums = [0.0f64; 3];
    for (s, &p) in d.states().iter().zip(d.target_probs()) {
        sums[(s.to_index() % 3) as usize] += p;
    }
    let mass_err = sums
        .iter()
        .zip([0.6, 0.3, 0.1])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    outcome(
        bad.is_empty() && mass_err <= 1e-12,
        format!(
            "sizes {}; Mult3D group sums {:.15}/{:.15}/{:.15} (max error {mass_err:.1e}, limit 1e-12)",
            if bad.is_empty() { "all match".to_string() } else { format!("mismatched: {}", bad.join(", ")) },
            sums[0],
            sums[1],
            sums[2]
        ),
    )
}

fn mini_grid(sigmas: &[f64], rates: &[f64]) -> GridSpec {
    GridSpec {
        hidden_multipliers: Vec::new(),
        init_sigmas: sigmas.to_vec(),
        learning_rates: rates.to_vec(),
        momenta: vec![0.9],
        schedules: vec![Schedule::Fixed],
        repetitions: 1,
    }
}

fn criterion_5() -> Outcome {
    let data = by_name("BS09", DEFAULT_P_RATIO).unwrap();
    let base = TrainConfig {
        estimator: EstimatorKind::Wcd { k: 10 },
        n_hidden: 45,
        momentum: 0.9,
        epochs: 20_000,
        kl_record_stride: 1_000,
        seed: 0,
        ..TrainConfig::default()
    };
    let tuned = tune(&data, &base, &[1.0, 0.1, 0.01], &[0.1, 0.01, 0.001]);
    let long = TrainConfig { epochs: 200_000, ..tuned };
    let best: Vec<f64> = (0..10)
        .map(|s| train::<f64>(&data, &TrainConfig { seed: s, ..long.clone() }).unwrap().best_kl)
        .collect();
    let st = Stats::of(&best);
    outcome(
        st.mean <= 0.01,
        format!(
            "BS09 WCD10 h45 σ={} η={} 2e5 epochs, 10 seeds: mean best KL {:.4} ± {:.4} (limit 0.01)",
            long.init_sigma, long.learning_rate, st.mean, st.std
        ),
    )
}

/// Picks `(σ, η)` by the smallest KL at any step over a one-seed mesh at
/// `base.n_hidden` hidden units.
fn tune(data: &Dataset, base: &TrainConfig, sigmas: &[f64], rates: &[f64]) -> TrainConfig {
    assert_eq!(base.n_hidden % data.n_bits(), 0);
    let mut grid = mini_grid(sigmas, rates);
    grid.hidden_multipliers = vec![base.n_hidden / data.n_bits()];
    let res = grid_search::<f64>(data, &grid, base).unwrap();
    let best = &res.best_record().config;
    TrainConfig {
        init_sigma: best.init_sigma,
        learning_rate: best.learning_rate,
        ..base.clone()
    }
}

struct Bs16Comparison {
    tuned: TrainConfig,
    cd: Vec<RunRecord>,
    wcd: Vec<RunRecord>,
}

fn bs16_comparison() -> Bs16Comparison {
    let data = by_name("BS16", DEFAULT_P_RATIO).unwrap();
    let base = TrainConfig {
        estimator: EstimatorKind::Cd { k: 1 },
        n_hidden: 16,
        momentum: 0.9,
        epochs: 100_000,
        kl_record_stride: 500,
        seed: 0,
        ..TrainConfig::default()
    };
    let tuned = tune(&data, &base, &[1.0, 0.1, 0.01], &[0.1, 0.01, 0.001]);
    let long = TrainConfig { epochs: 300_000, kl_record_stride: 1000, ..tuned };
    let seeds: Vec<u64> = (0..10).collect();
    let (_, records) = paired_comparison::<f64>(
        &data,
        &long,
        (EstimatorKind::Cd { k: 1 }, EstimatorKind::Wcd { k: 1 }),
        &[],
        &seeds,
    )
    .unwrap();
    let (cd, wcd) = records.into_iter().partition(|r| r.config.estimator == EstimatorKind::Cd { k: 1 });
    Bs16Comparison { tuned: long, cd, wcd }
}

fn criterion_6(cmp: &Bs16Comparison) -> Outcome {
    let cd = Stats::of(&cmp.cd.iter().map(|r| r.best_kl).collect::<Vec<_>>());
    let wcd = Stats::of(&cmp.wcd.iter().map(|r| r.best_kl).collect::<Vec<_>>());
    let pooled = ((cd.std.powi(2) + wcd.std.powi(2)) / 2.0).sqrt();
    let gap = cd.mean - wcd.mean;
    outcome(
        wcd.mean < cd.mean && gap > pooled,
        format!(
            "BS16 h16 σ={} η={} 3e5 epochs: CD1 {:.4} ± {:.4}, WCD1 {:.4} ± {:.4}, gap {:.4} vs pooled std {:.4}",
            cmp.tuned.init_sigma, cmp.tuned.learning_rate, cd.mean, cd.std, wcd.mean, wcd.std, gap, pooled
        ),
    )
}

fn criterion_7(cmp: &Bs16Comparison) -> Outcome {
    let ratio = |r: &RunRecord| r.final_kl() / r.best_kl;
    let wcd_ok = cmp.wcd.iter().filter(|r| ratio(r) <= 1.1).count();
    let cd_ok = cmp.cd.iter().filter(|r| ratio(r) > 1.5).count();
    let both = cmp.cd.iter().zip(&cmp.wcd).filter(|(c, w)| ratio(c) > 1.5 && ratio(w) <= 1.1).count();
    let n = cmp.cd.len();
    outcome(
        2 * both > n,
        format!(
            "seeds with the pattern: {both}/{n} (WCD1 final ≤ 1.1·min in {wcd_ok}, CD1 final > 1.5·min in {cd_ok})"
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let p = random_rbm(&mut rng, 4, 3);
    let exact = compute_exact_distribution(&p, LIMIT).unwrap().probs();
    let n = 1_000_000;
    let set = sample_model(&p, n, 1000, 10, 100, 808).unwrap();
    let mut counts = [0u64; 16];
    for s in set.samples() {
        let idx = s.iter().fold(0usize, |acc, &v| (acc << 1) | (v == 1.0) as usize);
        counts[idx] += 1;
    }
    let stat: f64 = counts
        .iter()
        .zip(&exact)
        .map(|(&o, &q)| (o as f64 - q * n as f64).powi(2) / (q * n as f64))
        .sum();
    let pval = ChiSquared::new(15.0).unwrap().sf(stat);
    outcome(pval > 0.01, format!("10^6 samples, chi-square {stat:.2} on 15 dof, p = {pval:.3} (limit > 0.01)"))
}

fn parzen_oracle(test: &[Vec<f64>], samples: &[Vec<f64>], sigma: f64) -> f64 {
    let d = test[0].len() as f64;
    let s2 = TwoFloat::from(sigma) * TwoFloat::from(sigma);
    let norm = (TwoFloat::from(2.0) * TwoFloat::from(std::f64::consts::PI) * s2).ln()
        * TwoFloat::from(d / 2.0);
    let mut total = TwoFloat::from(0.0);
    for y in test {
        let mut acc = TwoFloat::from(0.0);
        for x in samples {
            let mut sq = TwoFloat::from(0.0);
            for (a, b) in y.iter().zip(x) {
                let diff = TwoFloat::from(*a) - TwoFloat::from(*b);
                sq += diff * diff;
            }
            acc += (-sq / (TwoFloat::from(2.0) * s2)).exp();
        }
        total += (acc / TwoFloat::from(samples.len() as f64)).ln() - norm;
    }
    let mean = total / TwoFloat::from(test.len() as f64);
    mean.hi() + mean.lo()
}

fn criterion_9() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    let mut identity_err = 0.0f64;
    for (d, sigma) in [(1usize, 0.2), (9, 0.5), (16, 0.2), (64, 0.05)] {
        let y = vec![vec![1.0; d]];
        let u = parzen_ull_points(&y, &y, sigma).unwrap();
        let expect = -(d as f64 / 2.0) * (2.0 * std::f64::consts::PI * sigma * sigma).ln();
        identity_err = identity_err.max((u - expect).abs());
    }
    pass &= identity_err <= 1e-12;
    notes.push(format!("identity err {identity_err:.1e}"));

    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut pts = |n: usize, d: usize| -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..d).map(|_| rng.random_range(0..2) as f64).collect()).collect()
    };
    let (a, b) = (pts(40, 16), pts(12, 16));
    let base = parzen_ull_points(&b, &a, 0.2).unwrap();
    let mut shuffled_a = a.clone();
    shuffled_a.reverse();
    shuffled_a.rotate_left(7);
    let mut shuffled_b = b.clone();
    shuffled_b.rotate_left(5);
    let doubled: Vec<Vec<f64>> = a.iter().chain(&a).cloned().collect();
    let inv_err = [
        parzen_ull_points(&shuffled_b, &shuffled_a, 0.2).unwrap(),
        parzen_ull_points(&b, &doubled, 0.2).unwrap(),
    ]
    .iter()
    .map(|u| (u - base).abs())
    .fold(0.0, f64::max);
    pass &= inv_err <= 1e-12;
    notes.push(format!("invariance err {inv_err:.1e}"));

    let mut rng = ChaCha8Rng::seed_from_u64(910);
    let mut oracle_err = 0.0f64;
    for _ in 0..20 {
        let d = rng.random_range(1..=16);
        let sigma = rng.random_range(0.1..1.0);
        let mut real = |n: usize| -> Vec<Vec<f64>> {
            (0..n).map(|_| (0..d).map(|_| rng.random_range(-0.5..1.5)).collect()).collect()
        };
        let (s, t) = (real(10), real(5));
        let u = parzen_ull_points(&t, &s, sigma).unwrap();
        oracle_err = oracle_err.max((u - parzen_oracle(&t, &s, sigma)).abs());
    }
    pass &= oracle_err <= 1e-10;
    notes.push(format!("extended-precision err {oracle_err:.1e}"));

    let data = by_name("BS16", DEFAULT_P_RATIO).unwrap();
    let base = TrainConfig {
        estimator: EstimatorKind::Pcd,
        n_hidden: 16,
        momentum: 0.9,
        epochs: 100_000,
        kl_record_stride: 1_000,
        seed: 0,
        ..TrainConfig::default()
    };
    let tuned = tune(&data, &base, &[1.0, 0.1, 0.01], &[0.01, 0.001, 0.0001]);
    let seeds: Vec<u64> = (0..10).collect();
    let (_, records) =
        paired_comparison::<f64>(&data, &tuned, (EstimatorKind::Pcd, EstimatorKind::Wpcd), &[], &seeds).unwrap();
    let test: Vec<Vec<f64>> = data.states().iter().map(BitState::to_reals).collect();
    let ull = |r: &RunRecord| {
        let s = sample_model(&r.final_params, 10_000, 1000, 10, 100, r.config.seed).unwrap();
        parzen_ull_points(&test, s.samples(), 0.2).unwrap()
    };
    let (pcd, wpcd): (Vec<&RunRecord>, Vec<&RunRecord>) =
        records.iter().partition(|r| r.config.estimator == EstimatorKind::Pcd);
    let wins = pcd.iter().zip(&wpcd).filter(|(p, w)| ull(w) > ull(p)).count();
    pass &= wins >= 8;
    notes.push(format!(
        "WPCD > PCD uLL in {wins}/10 seed pairs (σ_init={} η={}, need ≥ 8)",
        tuned.init_sigma, tuned.learning_rate
    ));
    outcome(pass, notes.join("; "))
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| {
        let out = Command::new(env!("CARGO_BIN_EXE_wcd"))
            .current_dir(dir.path())
            .args(args)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    run(&["gen-data", "--name", "BS09", "--out", "bs09.txt"]);
    let train_args = |out: &'static str| {
        vec![
            "train", "--dataset", "bs09.txt", "--estimator", "wcd", "--k", "2", "--hidden", "18", "--sigma",
            "0.1", "--lr", "0.05", "--epochs", "2000", "--seed", "17", "--stride", "50", "--out", out,
        ]
    };
    run(&train_args("a"));
    run(&train_args("b"));
    let same = |f: &str| fs::read(dir.path().join("a").join(f)).unwrap() == fs::read(dir.path().join("b").join(f)).unwrap();
    let trace = same("trace.csv");
    let rest = ["summary.json", "best.json", "final.json"].iter().all(|f| same(f));
    outcome(
        trace && rest,
        format!("trace.csv identical: {trace}; summary and checkpoints identical: {rest}"),
    )
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wanted = |id: u32| only.as_ref().is_none_or(|v| v.contains(&id));

    let mut failures = 0;
    let mut report = |id: u32, name: &str, f: &dyn Fn() -> Outcome| {
        if !wanted(id) {
            return;
        }
        let t = Instant::now();
        let o = f();
        println!(
            "criterion {id:>2} [{}] {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
        if !o.pass {
            failures += 1;
        }
    };

    report(1, "gradient vs finite differences", &criterion_1);
    report(2, "full-space weighted phase", &criterion_2);
    report(3, "partition function vs double sum", &criterion_3);
    report(4, "dataset sizes and group masses", &criterion_4);
    report(5, "BS09 WCD10 best KL", &criterion_5);
    if wanted(6) || wanted(7) {
        let t = Instant::now();
        let cmp = bs16_comparison();
        println!("BS16 comparison runs: {:.1}s", t.elapsed().as_secs_f64());
        report(6, "BS16 WCD1 beats CD1", &|| criterion_6(&cmp));
        report(7, "BS16 KL trace shape", &|| criterion_7(&cmp));
    }
    report(8, "Gibbs sampler chi-square", &criterion_8);
    report(9, "Parzen estimator", &criterion_9);
    report(10, "deterministic train output", &criterion_10);

    if failures > 0 {
        println!("acceptance: {failures} criterion(s) failed");
        if std::env::var_os("ACCEPTANCE_STRICT").is_some() {
            std::process::exit(1);
        }
        return;
    }
    println!("acceptance: all criteria passed");
}
