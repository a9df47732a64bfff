use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use wcd_core::datasets::{by_name, split, SplitSpec};
use wcd_core::exact::{compute_exact_distribution, dataset_loglikelihood, kl_divergence};
use wcd_core::parzen::{sample_model, ull_curve, ParzenConfig};
use wcd_core::trainer::{grid_search, paired_comparison, train, GridSpec, RunOutcome};
use wcd_core::{checkpoint, BitState, EstimatorKind, RunRecord, TrainConfig};

use crate::args::*;
use crate::error::{CliError, CliResult};
use crate::files::{self, csv_bytes, json_bytes, num, Outputs};

/// Defaults, then the config file, then explicit flags.
pub fn resolve_config(estimator: Option<&EstimatorArgs>, ov: &TrainOverrides) -> CliResult<TrainConfig> {
    let mut cfg = match &ov.config {
        Some(path) => files::parse_toml("config", path, &files::read_text("config", path)?)?,
        None => TrainConfig::default(),
    };
    if let Some(est) = estimator {
        if let Some(kind) = est.estimator {
            cfg.estimator = kind;
        }
        if let Some(k) = est.k {
            cfg.estimator = match cfg.estimator {
                EstimatorKind::Cd { .. } => EstimatorKind::Cd { k },
                EstimatorKind::Wcd { .. } => EstimatorKind::Wcd { k },
                other => {
                    return Err(CliError::Invalid(format!("--k does not apply to estimator {other}")))
                }
            };
        }
    }
    macro_rules! set {
        ($flag:ident => $field:ident) => {
            if let Some(v) = ov.$flag.clone() {
                cfg.$field = v;
            }
        };
    }
    set!(hidden => n_hidden);
    set!(sigma => init_sigma);
    set!(lr => learning_rate);
    set!(schedule => schedule);
    set!(momentum => momentum);
    set!(decay => weight_decay);
    set!(batch => batch_size);
    set!(epochs => epochs);
    set!(seed => seed);
    set!(stride => kl_record_stride);
    set!(enumeration_limit => enumeration_limit);
    cfg.validate()?;
    Ok(cfg)
}

fn install_pool(jobs: Option<usize>) -> CliResult<()> {
    if let Some(j) = jobs {
        if j == 0 {
            return Err(CliError::Invalid("--jobs must be positive".into()));
        }
        // A pool may already exist when commands run in-process; keep it.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    Ok(())
}

#[derive(Serialize)]
struct Meta<'a> {
    command: &'a str,
    version: &'a str,
    args: Vec<String>,
    started_unix_secs: u64,
    wall_time_secs: f64,
}

fn meta_bytes(command: &str, started: SystemTime, clock: Instant) -> Vec<u8> {
    json_bytes(&Meta {
        command,
        version: env!("CARGO_PKG_VERSION"),
        args: std::env::args().collect(),
        started_unix_secs: started.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        wall_time_secs: clock.elapsed().as_secs_f64(),
    })
}

fn outcome_label(o: RunOutcome) -> String {
    match o {
        RunOutcome::Completed => "completed".into(),
        RunOutcome::Diverged { epoch } => format!("diverged@{epoch}"),
    }
}

fn report(summary: &str, written: &[PathBuf]) {
    println!("{summary}");
    for p in written {
        println!("  wrote {}", p.display());
    }
}

pub fn gen_data(a: &GenDataArgs) -> CliResult<()> {
    let ds = by_name(&a.name, a.p_ratio)?;
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from(format!("{}.txt", a.name)));
    let mut outputs = Outputs::default();
    let summary = match (a.split, &a.test_out) {
        (Some(fraction), Some(test_out)) => {
            let (tr, te) = split(&ds, SplitSpec { train_fraction: fraction, seed: a.split_seed })?;
            let mut buf = Vec::new();
            te.write_to(&mut buf)?;
            outputs.add(out.clone(), tr.to_file_string().into_bytes());
            outputs.add(test_out.clone(), buf);
            format!("{}: {} states, {} train / {} test", ds.name(), ds.len(), tr.len(), te.states.len())
        }
        _ => {
            outputs.add(out, ds.to_file_string().into_bytes());
            format!("{}: {} states over {} bits", ds.name(), ds.len(), ds.n_bits())
        }
    };
    report(&summary, &outputs.commit()?);
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    dataset: &'a str,
    config: &'a TrainConfig,
    best_kl: f64,
    best_epoch: usize,
    final_kl: f64,
    final_quarter_mean_kl: f64,
    outcome: RunOutcome,
}

fn trace_rows(r: &RunRecord) -> impl Iterator<Item = Vec<String>> + '_ {
    r.kl_trace.iter().map(|p| vec![p.epoch.to_string(), num(p.kl)])
}

pub fn train_cmd(a: &TrainArgs) -> CliResult<()> {
    let (started, clock) = (SystemTime::now(), Instant::now());
    let ds = files::read_dataset(&a.dataset)?;
    let cfg = resolve_config(Some(&a.estimator), &a.train)?;
    let r: RunRecord = train(&ds, &cfg)?;
    let summary = TrainSummary {
        dataset: ds.name(),
        config: &cfg,
        best_kl: r.best_kl,
        best_epoch: r.best_epoch,
        final_kl: r.final_kl(),
        final_quarter_mean_kl: r.final_quarter_mean_kl(),
        outcome: r.outcome,
    };
    let mut out = Outputs::default();
    out.add(a.out.join("trace.csv"), csv_bytes(&["epoch", "kl"], trace_rows(&r)));
    out.add(a.out.join("summary.json"), json_bytes(&summary));
    out.add(a.out.join("best.json"), checkpoint::to_json(&r.best_params).into_bytes());
    out.add(a.out.join("final.json"), checkpoint::to_json(&r.final_params).into_bytes());
    out.add(a.out.join("meta.json"), meta_bytes("train", started, clock));
    let line = format!(
        "{} {} on {}: best KL {} at epoch {}, final KL {} ({})",
        cfg.estimator,
        cfg.n_hidden,
        ds.name(),
        num(r.best_kl),
        r.best_epoch,
        num(r.final_kl()),
        outcome_label(r.outcome)
    );
    report(&line, &out.commit()?);
    Ok(())
}

pub fn grid_cmd(a: &GridArgs) -> CliResult<()> {
    let (started, clock) = (SystemTime::now(), Instant::now());
    install_pool(a.jobs)?;
    let ds = files::read_dataset(&a.dataset)?;
    let base = resolve_config(Some(&a.estimator), &a.train)?;
    let mut mesh: toml::Table = files::parse_toml("mesh", &a.mesh, &files::read_text("mesh", &a.mesh)?)?;
    if let Some(n) = a.seeds {
        mesh.insert("repetitions".into(), toml::Value::Integer(n as i64));
    }
    let grid: GridSpec = mesh
        .try_into()
        .map_err(|e| CliError::BadFile { what: "mesh", path: a.mesh.clone(), msg: e.to_string() })?;
    let result = grid_search::<f64>(&ds, &grid, &base)?;

    let runs = result.records.iter().enumerate().map(|(i, r)| {
        let c = &r.config;
        vec![
            i.to_string(),
            c.n_hidden.to_string(),
            num(c.init_sigma),
            num(c.learning_rate),
            num(c.momentum),
            c.schedule.to_string(),
            c.seed.to_string(),
            num(r.best_kl),
            r.best_epoch.to_string(),
            num(r.final_kl()),
            outcome_label(r.outcome),
        ]
    });
    let traces = result.records.iter().enumerate().flat_map(|(i, r)| {
        r.kl_trace.iter().map(move |p| vec![i.to_string(), p.epoch.to_string(), num(p.kl)])
    });
    let best = result.best_record();
    let summary = serde_json::json!({
        "dataset": ds.name(),
        "runs": result.records.len(),
        "diverged": result.records.iter().filter(|r| r.diverged()).count(),
        "best_run": result.best,
        "best_kl": best.best_kl,
        "best_epoch": best.best_epoch,
        "best_config": best.config,
    });
    let mut out = Outputs::default();
    out.add(
        a.out.join("runs.csv"),
        csv_bytes(
            &["run", "n_hidden", "init_sigma", "learning_rate", "momentum", "schedule", "seed",
              "best_kl", "best_epoch", "final_kl", "outcome"],
            runs,
        ),
    );
    out.add(a.out.join("traces.csv"), csv_bytes(&["run", "epoch", "kl"], traces));
    out.add(a.out.join("summary.json"), json_bytes(&summary));
    out.add(a.out.join("best.json"), checkpoint::to_json(&best.best_params).into_bytes());
    out.add(a.out.join("meta.json"), meta_bytes("grid", started, clock));
    let line = format!(
        "{} runs on {}: best KL {} (run {})",
        result.records.len(),
        ds.name(),
        num(best.best_kl),
        result.best
    );
    report(&line, &out.commit()?);
    Ok(())
}

pub fn compare_cmd(a: &CompareArgs) -> CliResult<()> {
    let (started, clock) = (SystemTime::now(), Instant::now());
    install_pool(a.jobs)?;
    let ds = files::read_dataset(&a.dataset)?;
    let base = resolve_config(None, &a.train)?;
    let [ea, eb] = <[EstimatorKind; 2]>::try_from(a.estimators.clone())
        .map_err(|_| CliError::Invalid("--estimators takes exactly two estimators".into()))?;
    let seeds: Vec<u64> = (0..a.seeds as u64).map(|i| base.seed.wrapping_add(i)).collect();
    let (rep, records) = paired_comparison::<f64>(&ds, &base, (ea, eb), &a.hidden_multipliers, &seeds)?;

    let rows = rep.rows.iter().map(|r| {
        vec![
            r.estimator.to_string(),
            r.n_hidden.to_string(),
            r.seed.to_string(),
            num(r.best_kl),
            r.best_epoch.to_string(),
            num(r.final_kl),
            num(r.final_quarter_mean_kl),
            r.diverged.to_string(),
        ]
    });
    let traces = records.iter().flat_map(|r| {
        let c = &r.config;
        r.kl_trace.iter().map(move |p| {
            vec![c.estimator.to_string(), c.n_hidden.to_string(), c.seed.to_string(), p.epoch.to_string(), num(p.kl)]
        })
    });
    let summary = serde_json::json!({
        "dataset": ds.name(),
        "base_config": base,
        "summaries": rep.summaries,
    });
    let mut out = Outputs::default();
    out.add(
        a.out.join("runs.csv"),
        csv_bytes(
            &["estimator", "n_hidden", "seed", "best_kl", "best_epoch", "final_kl", "final_quarter_mean_kl", "diverged"],
            rows,
        ),
    );
    out.add(a.out.join("traces.csv"), csv_bytes(&["estimator", "n_hidden", "seed", "epoch", "kl"], traces));
    out.add(a.out.join("summary.json"), json_bytes(&summary));
    out.add(a.out.join("meta.json"), meta_bytes("compare", started, clock));
    let line = rep
        .summaries
        .iter()
        .map(|s| format!("{}: best KL {} ± {}", s.estimator, num(s.best_kl.mean), num(s.best_kl.std)))
        .collect::<Vec<_>>()
        .join("; ");
    report(&line, &out.commit()?);
    Ok(())
}

pub fn eval_exact(a: &EvalExactArgs) -> CliResult<()> {
    let params = files::read_model(&a.model)?;
    let ds = files::read_dataset(&a.dataset)?;
    let dist = compute_exact_distribution(&params, a.enumeration_limit)?;
    println!("kl {}", num(kl_divergence(&ds, &dist)?));
    println!("loglik {}", num(dataset_loglikelihood(&ds, &dist)?));
    println!("log_z {}", num(dist.log_z()));
    Ok(())
}

pub fn sample_cmd(a: &SampleArgs) -> CliResult<()> {
    let params = files::read_model(&a.model)?;
    let mut set = sample_model(&params, a.n, a.burn_in, a.thin, a.chains, a.seed)?;
    set.meta.model_id = model_id(&a.model);
    let mut buf = Vec::new();
    set.write_to(&mut buf)?;
    files::write_atomic(&a.out, &buf)?;
    report(&format!("{} samples over {} bits", set.len(), set.dim()), &[a.out.clone()]);
    Ok(())
}

fn model_id(path: &Path) -> String {
    let name = path.file_name().map_or_else(|| "-".into(), |n| n.to_string_lossy().into_owned());
    name.split_whitespace().collect::<Vec<_>>().join("_")
}

pub fn eval_parzen(a: &EvalParzenArgs) -> CliResult<()> {
    let samples = files::read_samples(&a.samples)?;
    let test = files::read_test_set(&a.test)?;
    let points: Vec<Vec<f64>> = test.states.iter().map(BitState::to_reals).collect();
    let eval_points = if a.points.is_empty() { vec![samples.len()] } else { a.points.clone() };
    let cfg = ParzenConfig { sigma: a.sigma, eval_points };
    let curve = ull_curve(&points, &samples, &cfg)?;
    for (n, u) in &curve {
        println!("{n} {}", num(*u));
    }
    if let Some(out) = &a.out {
        let rows = curve.iter().map(|(n, u)| vec![n.to_string(), num(*u)]);
        files::write_atomic(out, &csv_bytes(&["n_samples", "ull"], rows))?;
        println!("  wrote {}", out.display());
    }
    Ok(())
}

pub fn export_profile(a: &ExportProfileArgs) -> CliResult<()> {
    let params = files::read_model(&a.model)?;
    let ds = files::read_dataset(&a.dataset)?;
    if ds.n_bits() != params.n_visible() {
        return Err(CliError::Invalid(format!(
            "model has {} visible units, dataset has {} bits",
            params.n_visible(),
            ds.n_bits()
        )));
    }
    let dist = compute_exact_distribution(&params, a.enumeration_limit)?;
    let row = |s: &BitState, target: f64| {
        let idx = s.to_index();
        vec![idx.to_string(), s.to_string(), num(target), num(dist.log_probs()[idx as usize].exp())]
    };
    let rows: Vec<Vec<String>> = if a.full_space {
        let mut target = vec![0.0; 1 << ds.n_bits()];
        for (s, &p) in ds.states().iter().zip(ds.target_probs()) {
            target[s.to_index() as usize] = p;
        }
        target
            .iter()
            .enumerate()
            .map(|(i, &p)| row(&BitState::from_index(i as u64, ds.n_bits()), p))
            .collect()
    } else {
        ds.states().iter().zip(ds.target_probs()).map(|(s, &p)| row(s, p)).collect()
    };
    let n = rows.len();
    files::write_atomic(&a.out, &csv_bytes(&["state_index", "state_bits", "target_prob", "model_prob"], rows))?;
    report(&format!("{n} profile rows"), &[a.out.clone()]);
    Ok(())
}
