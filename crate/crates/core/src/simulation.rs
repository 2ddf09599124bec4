//! Monte-Carlo harness: seeded repetitions, membership curves and coverage.
//!
//! Repetitions run on the ambient rayon pool and are collected in index
//! order, so results never depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bandit::{ucb_race, RunRecord};
use crate::confidence::{BoundScheme, Coverage};
use crate::environments::Environment;
use crate::error::{Error, Result};
use crate::kl_math::Prob;

/// SplitMix64 finaliser.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of repetition `rep`: `base ^ splitmix64(rep)`.
pub fn derive_seed(base: u64, rep: u64) -> u64 {
    base ^ splitmix64(rep)
}

/// Runs `f(rep, seed)` for every repetition and returns results in order.
pub fn run_repetitions<T, F>(reps: usize, base_seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync,
{
    (0..reps)
        .into_par_iter()
        .map(|rep| f(rep, derive_seed(base_seed, rep as u64)))
        .collect()
}

/// Averages the snapshot flags of several runs into `(samples, probability)`.
pub fn membership_curve(runs: &[RunRecord]) -> Result<Vec<(u64, f64)>> {
    let first = runs
        .first()
        .ok_or_else(|| Error::param("repetitions", "need at least one run"))?;
    let mut hits = vec![0usize; first.snapshots.len()];
    for run in runs {
        if run.snapshots.len() != hits.len()
            || run.snapshots.iter().zip(&first.snapshots).any(|(a, b)| a.0 != b.0)
        {
            return Err(Error::param("snapshots", "runs disagree on snapshot schedule"));
        }
        for (h, &(_, member)) in hits.iter_mut().zip(&run.snapshots) {
            *h += usize::from(member);
        }
    }
    Ok(first
        .snapshots
        .iter()
        .zip(hits)
        .map(|(&(samples, _), h)| (samples, h as f64 / runs.len() as f64))
        .collect())
}

/// Repeated [`ucb_race`] runs summarised as a membership curve.
pub fn race_curve(
    env: &Environment,
    scheme: &BoundScheme,
    budget: u64,
    snapshot_every: u64,
    k: usize,
    reps: usize,
    base_seed: u64,
) -> Result<Vec<(u64, f64)>> {
    let runs = run_repetitions(reps, base_seed, |_, seed| {
        ucb_race(env, scheme, budget, snapshot_every, k, seed)
    })?;
    membership_curve(&runs)
}

/// First sample count at which the curve reaches `level`.
pub fn first_reaching(curve: &[(u64, f64)], level: f64) -> Option<u64> {
    curve.iter().find(|&&(_, p)| p >= level).map(|&(s, _)| s)
}

/// First times at which a Bernoulli stream left its confidence interval.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Exits {
    pub above_upper: Option<u64>,
    pub below_lower: Option<u64>,
}

impl Exits {
    pub fn any(&self) -> Option<u64> {
        match (self.above_upper, self.below_lower) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageReport {
    pub mu: f64,
    pub horizon: u64,
    pub trajectories: usize,
    /// Fraction of streams where the true mean ever exceeded the upper bound.
    pub above_upper_rate: f64,
    /// Fraction of streams where the true mean ever fell below the lower bound.
    pub below_lower_rate: f64,
    pub joint_rate: f64,
    /// Cumulative rates `(t, above, below, joint)` at roughly log-spaced `t`.
    pub curve: Vec<(u64, f64, f64, f64)>,
}

fn trajectory_exits(checker: &crate::confidence::CoverageChecker, mu: f64, seed: u64) -> Exits {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut exits = Exits::default();
    let mut sum = 0.0;
    for t in 1..=checker.horizon() {
        if rng.gen::<f64>() < mu {
            sum += 1.0;
        }
        let mean = sum / t as f64;
        match checker.check(mean, t, mu) {
            Coverage::Inside => {}
            Coverage::AboveUpper => {
                exits.above_upper.get_or_insert(t);
            }
            Coverage::BelowLower => {
                exits.below_lower.get_or_insert(t);
            }
        }
        if exits.above_upper.is_some() && exits.below_lower.is_some() {
            break;
        }
    }
    exits
}

fn checkpoints(horizon: u64) -> Vec<u64> {
    let mut points = Vec::new();
    let mut t = 1u64;
    while t < horizon {
        points.push(t);
        t = (t + 1).max((t as f64 * 1.25).round() as u64);
    }
    points.push(horizon);
    points
}

/// Estimates how often iid Bernoulli(`mu`) streams leave the scheme's
/// interval at some `t <= horizon`.
pub fn estimate_coverage(
    scheme: &BoundScheme,
    mu: Prob,
    horizon: u64,
    trajectories: usize,
    base_seed: u64,
) -> Result<CoverageReport> {
    if horizon == 0 || trajectories == 0 {
        return Err(Error::param("horizon", "horizon and trajectory count must be positive"));
    }
    let checker = scheme.coverage_checker(horizon);
    let mu = mu.get();
    let exits = run_repetitions(trajectories, base_seed, |_, seed| {
        Ok(trajectory_exits(&checker, mu, seed))
    })?;
    let rate = |by: &dyn Fn(&Exits) -> Option<u64>, t: u64| {
        exits.iter().filter(|e| by(e).is_some_and(|s| s <= t)).count() as f64 / trajectories as f64
    };
    let curve = checkpoints(horizon)
        .into_iter()
        .map(|t| {
            (
                t,
                rate(&|e| e.above_upper, t),
                rate(&|e| e.below_lower, t),
                rate(&Exits::any, t),
            )
        })
        .collect();
    Ok(CoverageReport {
        mu,
        horizon,
        trajectories,
        above_upper_rate: rate(&|e| e.above_upper, horizon),
        below_lower_rate: rate(&|e| e.below_lower, horizon),
        joint_rate: rate(&Exits::any, horizon),
        curve,
    })
}
