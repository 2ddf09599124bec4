//! Validated command settings and their execution.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde_json::{json, Value};

use lilklucb_core::simulation::{estimate_coverage, membership_curve, run_repetitions};
use lilklucb_core::{
    chernoff_information, from_contest, gap_family, lil_klucb, parametric_means, parse_contest_csv,
    predicted_complexity_with, ucb_race, BoundScheme, ColumnMap, Environment, ExperimentOutput,
    Metadata, Prob, RunRecord, SchemeKind, DEFAULT_BOUND_N, DEFAULT_DELTA,
};

use crate::config::Merged;
use crate::{CliError, Emitted};

pub const DEFAULT_REPS: usize = 250;
pub const DEFAULT_K: usize = 5;
pub const DEFAULT_N: usize = 100;
pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_HORIZON: u64 = 10_000;
pub const DEFAULT_GRID_POINTS: usize = 64;
pub const TABLE1_N: [usize; 5] = [100, 200, 400, 800, 1600];
pub const TABLE1_ALPHA: [f64; 3] = [0.25, 1.0, 2.0];
/// Fewest `n` values accepted for a slope fit.
pub const MIN_SLOPE_POINTS: usize = 4;

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Where the arms of a race or identification run come from.
#[derive(Clone, Debug)]
pub enum Instance {
    Parametric { n: usize, alpha: f64 },
    Explicit(Vec<f64>),
    Contest { path: PathBuf, columns: ColumnMap, star_map: [f64; 3] },
}

#[derive(Clone, Debug)]
pub struct Common {
    schemes: Vec<BoundScheme>,
    bound_n: u32,
    delta: f64,
    reps: usize,
    seed: u64,
}

#[derive(Clone, Debug)]
pub enum Plan {
    Race {
        command: &'static str,
        common: Common,
        env: Environment,
        instance: Instance,
        contest_id: Option<u64>,
        budget: u64,
        snapshot_every: u64,
        k: usize,
    },
    Identify {
        common: Common,
        env: Environment,
        instance: Instance,
        budget: Option<u64>,
        grid_points: usize,
    },
    Table1 {
        ns: Vec<usize>,
        alphas: Vec<f64>,
    },
    Coverage {
        common: Common,
        mus: Vec<Prob>,
        horizon: u64,
    },
}

fn single<T: Copy + std::fmt::Display>(name: &str, values: &[T], default: T) -> Result<T, CliError> {
    match values {
        [] => Ok(default),
        [v] => Ok(*v),
        _ => Err(bad(format!("--{name} takes a single value for this command"))),
    }
}

fn common(m: &Merged, default_schemes: &[SchemeKind]) -> Result<Common, CliError> {
    let kinds = if m.schemes.is_empty() { default_schemes.to_vec() } else { m.schemes.clone() };
    let mut seen = Vec::new();
    for kind in &kinds {
        if seen.contains(kind) {
            return Err(bad(format!("scheme `{kind}` listed twice")));
        }
        seen.push(*kind);
    }
    let bound_n = m.bound_n.unwrap_or(DEFAULT_BOUND_N);
    let delta = m.delta.unwrap_or(DEFAULT_DELTA);
    let schemes = kinds
        .iter()
        .map(|&kind| BoundScheme::new(kind, bound_n, delta))
        .collect::<Result<Vec<_>, _>>()?;
    let reps = m.reps.unwrap_or(DEFAULT_REPS);
    if reps == 0 {
        return Err(bad("--reps must be at least 1"));
    }
    Ok(Common { schemes, bound_n, delta, reps, seed: m.seed })
}

fn instance(m: &Merged, contest: bool) -> Result<Instance, CliError> {
    if contest {
        let path = m.input.clone().ok_or_else(|| bad("replay needs --input <contest csv>"))?;
        if !m.means.is_empty() || !m.n.is_empty() || !m.alpha.is_empty() {
            return Err(bad("replay takes its arms from --input; drop --means/--n/--alpha"));
        }
        return Ok(Instance::Contest { path, columns: m.columns.clone(), star_map: m.star_map });
    }
    if !m.means.is_empty() {
        if !m.n.is_empty() || !m.alpha.is_empty() {
            return Err(bad("--means cannot be combined with --n/--alpha"));
        }
        return Ok(Instance::Explicit(m.means.clone()));
    }
    let n = single("n", &m.n, DEFAULT_N)?;
    let alpha = single("alpha", &m.alpha, DEFAULT_ALPHA)?;
    Ok(Instance::Parametric { n, alpha })
}

/// Builds the environment; contest files are read here so that parse errors
/// surface before any sampling starts.
fn environment(instance: &Instance, seed: u64) -> Result<(Environment, Option<u64>), CliError> {
    match instance {
        Instance::Parametric { n, alpha } => {
            if *n < 2 {
                return Err(bad(format!("--n must be at least 2, got {n}")));
            }
            let means = parametric_means(*n, *alpha)?;
            Ok((Environment::bernoulli(&means, seed)?, None))
        }
        Instance::Explicit(values) => {
            if values.len() < 2 {
                return Err(bad("--means needs at least 2 arms"));
            }
            let means = values.iter().map(|&v| Prob::new(v)).collect::<Result<Vec<_>, _>>()?;
            Ok((Environment::bernoulli(&means, seed)?, None))
        }
        Instance::Contest { path, columns, star_map } => {
            let parsed = parse_contest_csv(path, columns)?;
            let env = from_contest(&parsed.dataset, *star_map, seed)?;
            Ok((env, parsed.dataset.contest_id))
        }
    }
}

impl Plan {
    pub fn new(command: &'static str, m: &Merged) -> Result<Plan, CliError> {
        match command {
            "simulate" | "replay" => {
                let common = common(m, &[SchemeKind::KlTilted, SchemeKind::Sg1, SchemeKind::Sg2])?;
                let instance = instance(m, command == "replay")?;
                let (env, contest_id) = environment(&instance, m.seed)?;
                let n = env.num_arms();
                let k = m.k.unwrap_or(DEFAULT_K.min(n));
                if k == 0 || k > n {
                    return Err(bad(format!("--k must lie in [1, {n}], got {k}")));
                }
                let budget = m.budget.unwrap_or(100 * n as u64);
                if budget < n as u64 {
                    return Err(bad(format!("--budget {budget} is below the {n} initial pulls")));
                }
                let snapshot_every = m.snapshot_every.unwrap_or(2 * n as u64);
                if snapshot_every == 0 {
                    return Err(bad("--snapshot-every must be positive"));
                }
                Ok(Plan::Race { command, common, env, instance, contest_id, budget, snapshot_every, k })
            }
            "identify" => {
                let common = common(m, &[SchemeKind::KlPrime])?;
                let instance = instance(m, false)?;
                let (env, _) = environment(&instance, m.seed)?;
                let n = env.num_arms() as u64;
                if let Some(b) = m.budget {
                    if b < n {
                        return Err(bad(format!("--budget {b} is below the {n} initial pulls")));
                    }
                }
                let grid_points = m.grid_points.unwrap_or(DEFAULT_GRID_POINTS);
                if grid_points < 3 {
                    return Err(bad("--grid-points must be at least 3"));
                }
                Ok(Plan::Identify { common, env, instance, budget: m.budget, grid_points })
            }
            "table1" => {
                let ns = if m.n.is_empty() { TABLE1_N.to_vec() } else { m.n.clone() };
                let alphas = if m.alpha.is_empty() { TABLE1_ALPHA.to_vec() } else { m.alpha.clone() };
                if ns.len() < MIN_SLOPE_POINTS {
                    return Err(bad(format!(
                        "slope fits need at least {MIN_SLOPE_POINTS} values of --n, got {}",
                        ns.len()
                    )));
                }
                if let Some(n) = ns.iter().find(|&&n| n < 2) {
                    return Err(bad(format!("--n values must be at least 2, got {n}")));
                }
                let mut sorted = ns.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != ns.len() {
                    return Err(bad("--n values must be distinct"));
                }
                if let Some(a) = alphas.iter().find(|&&a| !(a > 0.0 && a.is_finite())) {
                    return Err(bad(format!("--alpha must be positive, got {a}")));
                }
                Ok(Plan::Table1 { ns: sorted, alphas })
            }
            "coverage" => {
                let common =
                    common(m, &[SchemeKind::KlTilted, SchemeKind::KlPrime, SchemeKind::Sg1])?;
                let raw = if m.mu.is_empty() { vec![0.1, 0.5, 0.9] } else { m.mu.clone() };
                let mus = raw.iter().map(|&v| Prob::new(v)).collect::<Result<Vec<_>, _>>()?;
                let horizon = m.horizon.unwrap_or(DEFAULT_HORIZON);
                if horizon == 0 {
                    return Err(bad("--horizon must be positive"));
                }
                Ok(Plan::Coverage { common, mus, horizon })
            }
            other => Err(bad(format!("unknown command `{other}`"))),
        }
    }

    pub fn execute(&self) -> Result<Vec<Emitted>, CliError> {
        match self {
            Plan::Race { command, common, env, instance, contest_id, budget, snapshot_every, k } => {
                common
                    .schemes
                    .iter()
                    .map(|scheme| {
                        let runs = run_repetitions(common.reps, common.seed, |_, seed| {
                            ucb_race(env, scheme, *budget, *snapshot_every, *k, seed)
                        })?;
                        let curve = membership_curve(&runs)?;
                        let mut meta = metadata(command, common, Some(scheme.kind()), instance);
                        meta.contest_id = *contest_id;
                        meta.k = Some(*k);
                        meta.extra.insert("budget".into(), json!(budget));
                        meta.extra.insert("snapshot_every".into(), json!(snapshot_every));
                        meta.extra.insert("top_mean".into(), json!(env.true_means()[0]));
                        meta.extra.insert(
                            "below_median_pull_fraction".into(),
                            json!(below_median_fraction(env, &runs)),
                        );
                        let mut out = ExperimentOutput::new(meta, &["samples", "membership_probability"]);
                        out.rows = curve.into_iter().map(|(s, p)| vec![s as f64, p]).collect();
                        Ok(Emitted { scheme: Some(scheme.kind()), output: out })
                    })
                    .collect()
            }
            Plan::Identify { common, env, instance, budget, grid_points } => {
                let means: Vec<Prob> =
                    env.true_means().iter().map(|&m| Prob::new(m)).collect::<Result<_, _>>()?;
                let prime = BoundScheme::new(SchemeKind::KlPrime, common.bound_n, common.delta)?;
                let predicted = predicted_complexity_with(&prime, &means, *grid_points)?;
                common
                    .schemes
                    .iter()
                    .map(|scheme| {
                        let runs = run_repetitions(common.reps, common.seed, |_, seed| {
                            lil_klucb(env, scheme, *budget, seed)
                        })?;
                        let out = identify_table(common, scheme, env, instance, &runs, *budget, predicted.total);
                        Ok(Emitted { scheme: Some(scheme.kind()), output: out })
                    })
                    .collect()
            }
            Plan::Table1 { ns, alphas } => Ok(vec![Emitted { scheme: None, output: table1(ns, alphas)? }]),
            Plan::Coverage { common, mus, horizon } => common
                .schemes
                .iter()
                .map(|scheme| {
                    let mut meta = metadata("coverage", common, Some(scheme.kind()), &Instance::Explicit(vec![]));
                    meta.extra.insert("horizon".into(), json!(horizon));
                    let mut out = ExperimentOutput::new(
                        meta,
                        &["mu", "t", "above_upper_rate", "below_lower_rate", "joint_rate"],
                    );
                    let mut rates = Vec::new();
                    for &mu in mus {
                        let report = estimate_coverage(scheme, mu, *horizon, common.reps, common.seed)?;
                        rates.push(json!({
                            "mu": report.mu,
                            "above_upper": report.above_upper_rate,
                            "below_lower": report.below_lower_rate,
                            "joint": report.joint_rate,
                        }));
                        out.rows.extend(
                            report.curve.iter().map(|&(t, a, b, j)| vec![report.mu, t as f64, a, b, j]),
                        );
                    }
                    out.metadata.extra.insert("rates".into(), Value::Array(rates));
                    Ok(Emitted { scheme: Some(scheme.kind()), output: out })
                })
                .collect(),
        }
    }
}

fn metadata(command: &str, common: &Common, scheme: Option<SchemeKind>, instance: &Instance) -> Metadata {
    let mut meta = Metadata {
        command: Some(command.to_string()),
        scheme: scheme.map(|s| s.to_string()),
        bound_n: Some(common.bound_n),
        delta: Some(common.delta),
        repetitions: Some(common.reps),
        seed: Some(common.seed),
        extra: BTreeMap::new(),
        ..Default::default()
    };
    match instance {
        Instance::Parametric { n, alpha } => {
            meta.n = Some(*n);
            meta.alpha = Some(*alpha);
        }
        Instance::Explicit(means) if !means.is_empty() => {
            meta.n = Some(means.len());
            meta.extra.insert("means".into(), json!(means));
        }
        Instance::Contest { path, .. } => {
            meta.extra.insert("input".into(), json!(path.display().to_string()));
        }
        Instance::Explicit(_) => {}
    }
    meta
}

/// Share of all pulls spent on arms whose mean is below the median mean.
fn below_median_fraction(env: &Environment, runs: &[RunRecord]) -> f64 {
    let means = env.true_means();
    let mut sorted = means.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len().is_multiple_of(2) { 0.5 * (sorted[mid - 1] + sorted[mid]) } else { sorted[mid] };
    let (low, total) = runs.iter().fold((0u64, 0u64), |(low, total), run| {
        let below: u64 = run
            .per_arm_pulls
            .iter()
            .zip(means)
            .filter(|(_, &m)| m < median)
            .map(|(&c, _)| c)
            .sum();
        (low + below, total + run.total_samples)
    });
    low as f64 / total as f64
}

fn median_u64(values: &mut [u64]) -> f64 {
    values.sort_unstable();
    let mid = values.len() / 2;
    if values.len().is_multiple_of(2) {
        0.5 * (values[mid - 1] as f64 + values[mid] as f64)
    } else {
        values[mid] as f64
    }
}

fn identify_table(
    common: &Common,
    scheme: &BoundScheme,
    env: &Environment,
    instance: &Instance,
    runs: &[RunRecord],
    budget: Option<u64>,
    predicted_total: f64,
) -> ExperimentOutput {
    let reps = runs.len() as f64;
    let errors = runs.iter().filter(|r| r.recommended != 0).count();
    let stopped = runs.iter().filter(|r| r.stopped).count();
    let mut totals: Vec<u64> = runs.iter().map(|r| r.total_samples).collect();
    let mean_samples = totals.iter().sum::<u64>() as f64 / reps;
    let median_samples = median_u64(&mut totals);

    let mut meta = metadata("identify", common, Some(scheme.kind()), instance);
    let extra = &mut meta.extra;
    extra.insert("error_rate".into(), json!(errors as f64 / reps));
    extra.insert("stopped_fraction".into(), json!(stopped as f64 / reps));
    extra.insert("mean_samples".into(), json!(mean_samples));
    extra.insert("median_samples".into(), json!(median_samples));
    extra.insert("predicted_total".into(), json!(predicted_total));
    extra.insert("predicted_note".into(), json!("up to the universal constant"));
    extra.insert("samples_to_predicted_ratio".into(), json!(mean_samples / predicted_total));
    if let Some(b) = budget {
        extra.insert("budget".into(), json!(b));
    }

    let mut out = ExperimentOutput::new(
        meta,
        &["arm", "true_mean", "mean_pulls", "median_pulls", "min_pulls", "max_pulls"],
    );
    for (arm, &mu) in env.true_means().iter().enumerate() {
        let mut pulls: Vec<u64> = runs.iter().map(|r| r.per_arm_pulls[arm]).collect();
        let mean = pulls.iter().sum::<u64>() as f64 / reps;
        let median = median_u64(&mut pulls);
        out.rows.push(vec![
            arm as f64,
            mu,
            mean,
            median,
            pulls[0] as f64,
            pulls[pulls.len() - 1] as f64,
        ]);
    }
    out
}

/// `(S_KL, S_SG)` for `mu_1 = 1`, `mu_i = 1 - gap_i`, `i = 2..=n`.
pub fn hardness_sums(n: usize, alpha: f64) -> Result<(f64, f64), CliError> {
    let gaps = gap_family(n, alpha)?;
    let mut s_kl = 0.0;
    let mut s_sg = 0.0;
    for &gap in &gaps[1..] {
        let mu = Prob::new((1.0 - gap).max(0.0))?;
        s_kl += 1.0 / chernoff_information(mu, Prob::ONE).get();
        s_sg += 1.0 / (gap * gap);
    }
    Ok((s_kl, s_sg))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64, CliError> {
    if xs.len() != ys.len() || xs.len() < MIN_SLOPE_POINTS {
        return Err(bad(format!("slope fits need at least {MIN_SLOPE_POINTS} points")));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(bad("slope fits need positive finite values"));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

pub fn table1(ns: &[usize], alphas: &[f64]) -> Result<ExperimentOutput, CliError> {
    let meta = Metadata { command: Some("table1".into()), ..Default::default() };
    let mut out = ExperimentOutput::new(
        meta,
        &["alpha", "n", "s_kl", "s_sg", "s_kl_over_n_ln_n"],
    );
    let mut slopes = Vec::new();
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    for &alpha in alphas {
        let sums = ns.iter().map(|&n| hardness_sums(n, alpha)).collect::<Result<Vec<_>, _>>()?;
        let kl: Vec<f64> = sums.iter().map(|s| s.0).collect();
        let sg: Vec<f64> = sums.iter().map(|s| s.1).collect();
        let kl_over_log: Vec<f64> = kl.iter().zip(&xs).map(|(s, n)| s / n.ln()).collect();
        for ((&n, &(s_kl, s_sg)), x) in ns.iter().zip(&sums).zip(&xs) {
            out.rows.push(vec![alpha, n as f64, s_kl, s_sg, s_kl / (x * x.ln())]);
        }
        slopes.push(json!({
            "alpha": alpha,
            "s_kl": loglog_slope(&xs, &kl)?,
            "s_kl_over_ln_n": loglog_slope(&xs, &kl_over_log)?,
            "s_sg": loglog_slope(&xs, &sg)?,
        }));
    }
    out.metadata.extra.insert("slopes".into(), Value::Array(slopes));
    Ok(out)
}
