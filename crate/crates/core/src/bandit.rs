//! lil-KLUCB best-arm identification, the fixed-budget UCB race used for
//! comparing confidence bounds, and the predicted sample-complexity bound.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::confidence::{BoundScheme, SchemeKind, DEFAULT_BOUND_N};
use crate::environments::Environment;
use crate::error::{Error, Result};
use crate::kl_math::{chernoff_crossing, Prob};

/// Pull count and reward sum of one arm.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ArmStats {
    pulls: u64,
    reward_sum: f64,
}

impl ArmStats {
    pub fn from_parts(pulls: u64, reward_sum: f64) -> Result<Self> {
        // allow a little float slack when the sum was rebuilt from a mean
        let slack = 1e-9 * pulls as f64;
        if !(reward_sum >= -slack && reward_sum <= pulls as f64 + slack) {
            return Err(Error::param(
                "reward_sum",
                format!("{reward_sum} is outside [0, {pulls}]"),
            ));
        }
        Ok(ArmStats {
            pulls,
            reward_sum: reward_sum.clamp(0.0, pulls as f64),
        })
    }

    #[inline]
    pub fn record(&mut self, reward: f64) {
        debug_assert!((0.0..=1.0).contains(&reward));
        self.pulls += 1;
        self.reward_sum += reward;
    }

    pub fn pulls(&self) -> u64 {
        self.pulls
    }

    pub fn reward_sum(&self) -> f64 {
        self.reward_sum
    }

    /// Empirical mean, or `None` before the first pull.
    pub fn mean(&self) -> Option<f64> {
        (self.pulls > 0).then(|| (self.reward_sum / self.pulls as f64).min(1.0))
    }

    pub(crate) fn checked_mean(&self) -> Result<f64> {
        self.mean().ok_or(Error::UnpulledArm { arm: 0 })
    }
}

/// Trace of a single bandit run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub recommended: usize,
    pub total_samples: u64,
    pub per_arm_pulls: Vec<u64>,
    /// False when the sampling budget ran out before the stopping rule fired.
    pub stopped: bool,
    /// `(total_samples, best arm among the empirical top k)`, sorted by samples.
    pub snapshots: Vec<(u64, bool)>,
    pub seed: u64,
}

/// Index of the largest empirical mean, exact ties broken uniformly at random.
pub fn top_index<R: Rng + ?Sized>(stats: &[ArmStats], rng: &mut R) -> Result<usize> {
    if stats.is_empty() {
        return Err(Error::param("stats", "no arms"));
    }
    let mut means = Vec::with_capacity(stats.len());
    for (arm, s) in stats.iter().enumerate() {
        means.push(s.mean().ok_or(Error::UnpulledArm { arm })?);
    }
    Ok(argmax_random_ties(&means, rng))
}

fn argmax_random_ties<R: Rng + ?Sized>(values: &[f64], rng: &mut R) -> usize {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties = values.iter().filter(|&&v| v == best).count();
    let pick = if ties > 1 { rng.gen_range(0..ties) } else { 0 };
    values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == best)
        .nth(pick)
        .map(|(i, _)| i)
        .unwrap()
}

/// Largest value excluding `skip`, lowest index among ties.
fn argmax_excluding(values: &[f64], skip: usize) -> usize {
    let mut best = usize::MAX;
    for (i, &v) in values.iter().enumerate() {
        if i != skip && (best == usize::MAX || v > values[best]) {
            best = i;
        }
    }
    best
}

/// Per-run bookkeeping shared by the two sampling loops.
struct ArmState<'a> {
    env: &'a Environment,
    stats: Vec<ArmStats>,
    total: u64,
}

impl<'a> ArmState<'a> {
    fn new(env: &'a Environment) -> Self {
        ArmState {
            env,
            stats: vec![ArmStats::default(); env.num_arms()],
            total: 0,
        }
    }

    fn pull<R: Rng + ?Sized>(&mut self, arm: usize, rng: &mut R) -> Result<f64> {
        let reward = self.env.sample(arm, rng)?;
        self.stats[arm].record(reward);
        self.total += 1;
        Ok(reward)
    }

    fn mean(&self, arm: usize) -> f64 {
        self.stats[arm].mean().unwrap_or(0.0)
    }

    fn pulls(&self) -> Vec<u64> {
        self.stats.iter().map(|s| s.pulls()).collect()
    }
}

/// Runs lil-KLUCB until the stopping rule fires or `budget` samples are used.
///
/// Every arm is sampled once; then, while
/// `L_TOP(delta / (n - 1)) <= max_{i != TOP} U_i(delta)`, both `TOP` and the
/// rival with the largest upper bound are sampled. The stopping test is
/// evaluated after each update, before the next pair of pulls.
pub fn lil_klucb(
    env: &Environment,
    scheme: &BoundScheme,
    budget: Option<u64>,
    seed: u64,
) -> Result<RunRecord> {
    let n = env.num_arms();
    if n < 2 {
        return Err(Error::param("arms", format!("need at least 2 arms, got {n}")));
    }
    if let Some(b) = budget {
        if b < n as u64 {
            return Err(Error::param(
                "budget",
                format!("budget {b} is smaller than the {n} initial pulls"),
            ));
        }
    }
    let top_scheme = scheme.with_delta(scheme.delta() / (n - 1) as f64)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = ArmState::new(env);
    let mut upper = vec![0.0; n];
    let mut lower = vec![0.0; n];
    let refresh = |state: &ArmState, arm: usize, upper: &mut [f64], lower: &mut [f64]| {
        let mean = state.mean(arm);
        let t = state.stats[arm].pulls();
        upper[arm] = scheme.upper(mean, t);
        lower[arm] = top_scheme.lower(mean, t);
    };

    for arm in 0..n {
        state.pull(arm, &mut rng)?;
        refresh(&state, arm, &mut upper, &mut lower);
    }

    loop {
        let means: Vec<f64> = (0..n).map(|i| state.mean(i)).collect();
        let top = argmax_random_ties(&means, &mut rng);
        let rival = argmax_excluding(&upper, top);
        if lower[top] > upper[rival] {
            return Ok(RunRecord {
                recommended: top,
                total_samples: state.total,
                per_arm_pulls: state.pulls(),
                stopped: true,
                snapshots: Vec::new(),
                seed,
            });
        }
        if budget.is_some_and(|b| state.total + 2 > b) {
            return Ok(RunRecord {
                recommended: top,
                total_samples: state.total,
                per_arm_pulls: state.pulls(),
                stopped: false,
                snapshots: Vec::new(),
                seed,
            });
        }
        for arm in [top, rival] {
            state.pull(arm, &mut rng)?;
            refresh(&state, arm, &mut upper, &mut lower);
        }
    }
}

/// Whether arm 0 ranks among the `k` largest empirical means, with exact
/// ties ordered uniformly at random.
fn best_in_top_k<R: Rng + ?Sized>(state: &ArmState, k: usize, rng: &mut R) -> bool {
    let best = state.mean(0);
    let others = (1..state.stats.len()).map(|i| state.mean(i));
    let (above, tied) = others.fold((0, 0), |(a, t), m| {
        if m > best {
            (a + 1, t)
        } else if m == best {
            (a, t + 1)
        } else {
            (a, t)
        }
    });
    if above >= k {
        return false;
    }
    let slots = k - above;
    tied < slots || rng.gen_range(0..=tied) < slots
}

/// Fixed-budget UCB sampling: after one pull per arm, always pull
/// `argmax_i U_i(delta)` until `budget` samples. Ties are broken at random:
/// an arm whose rewards have all been 1 sits exactly at `U = 1`, so a fixed
/// order would starve every arm behind the first such one.
///
/// Snapshots are taken after initialisation, whenever the sample count is a
/// multiple of `snapshot_every`, and at the budget. Each records whether the
/// true best arm (arm 0) is among the `k` empirically best arms.
pub fn ucb_race(
    env: &Environment,
    scheme: &BoundScheme,
    budget: u64,
    snapshot_every: u64,
    k: usize,
    seed: u64,
) -> Result<RunRecord> {
    let n = env.num_arms();
    if k == 0 || k > n {
        return Err(Error::param("k", format!("must lie in [1, {n}], got {k}")));
    }
    if budget < n as u64 {
        return Err(Error::param(
            "budget",
            format!("budget {budget} is smaller than the {n} initial pulls"),
        ));
    }
    if snapshot_every == 0 {
        return Err(Error::param("snapshot_every", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = ArmState::new(env);
    let mut upper = vec![0.0; n];
    for (arm, u) in upper.iter_mut().enumerate() {
        state.pull(arm, &mut rng)?;
        *u = scheme.upper(state.mean(arm), 1);
    }
    let mut snapshots = vec![(state.total, best_in_top_k(&state, k, &mut rng))];
    while state.total < budget {
        let arm = argmax_random_ties(&upper, &mut rng);
        state.pull(arm, &mut rng)?;
        upper[arm] = scheme.upper(state.mean(arm), state.stats[arm].pulls());
        if state.total.is_multiple_of(snapshot_every) || state.total == budget {
            snapshots.push((state.total, best_in_top_k(&state, k, &mut rng)));
        }
    }
    let means: Vec<f64> = (0..n).map(|i| state.mean(i)).collect();
    Ok(RunRecord {
        recommended: argmax_excluding(&means, usize::MAX),
        total_samples: state.total,
        per_arm_pulls: state.pulls(),
        stopped: false,
        snapshots,
        seed,
    })
}

/// Sample-complexity bound (with the universal constant set to 1) and the
/// stopping indices it is built from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityBound {
    /// One term per suboptimal arm (arms 2..n).
    pub per_arm_terms: Vec<f64>,
    pub best_arm_term: f64,
    pub total: f64,
    /// Minimising separation points, one per suboptimal arm.
    pub witness_mus: Vec<f64>,
    /// `xi_1` for the best arm followed by `xi_i` for each suboptimal arm.
    pub stopping_indices: Vec<u64>,
}

/// `max(ln(1/d), 1)`: the iterated-log factor, floored so the outer log stays positive.
fn log_inverse(d: f64) -> f64 {
    (1.0 / d).ln().max(1.0)
}

/// First `t >= 1` with `threshold(t) < level`, for a threshold decreasing in `t`.
pub fn first_crossing(scheme: &BoundScheme, level: f64) -> Result<u64> {
    if level.is_nan() || level <= 0.0 {
        return Err(Error::param("level", format!("must be positive, got {level}")));
    }
    let below = |t: u64| scheme.raw_threshold(t) < level;
    if below(1) {
        return Ok(1);
    }
    let mut hi = 2u64;
    while !below(hi) {
        hi = hi.checked_mul(2).ok_or_else(|| {
            Error::param("level", format!("{level} is below every threshold"))
        })?;
    }
    let mut lo = hi / 2;
    // threshold(lo) >= level > threshold(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if below(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Predicted sample complexity with the default KL-prime scheme (`N = 8`).
pub fn predicted_complexity(mus: &[Prob], delta: f64, grid_points: usize) -> Result<ComplexityBound> {
    let scheme = BoundScheme::new(SchemeKind::KlPrime, DEFAULT_BOUND_N, delta)?;
    predicted_complexity_with(&scheme, mus, grid_points)
}

/// Minimises the sample-complexity bound over a grid of separation points
/// `mu_i < m_i < mu_1`:
///
/// ```text
/// ln((n-1)/delta * L(D*(mu_1, m))) / D*(mu_1, m)
///     + sum_i ln(L(D*(mu_i, m_i)) / delta) / D*(mu_i, m_i),   m = max_i m_i
/// ```
///
/// with `L(d) = max(ln(1/d), 1)`. Each `m_i` ranges over `grid_points`
/// interior points of `(mu_i, mu_1)`. The stopping indices use
/// `delta^2` for suboptimal arms and `delta / (n - 1)` for the best arm.
pub fn predicted_complexity_with(
    scheme: &BoundScheme,
    mus: &[Prob],
    grid_points: usize,
) -> Result<ComplexityBound> {
    let n = mus.len();
    if n < 2 {
        return Err(Error::param("mus", "need at least 2 arms"));
    }
    if grid_points < 3 {
        return Err(Error::param("grid_points", format!("need at least 3, got {grid_points}")));
    }
    let mus: Vec<f64> = mus.iter().map(|p| p.get()).collect();
    if mus.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::param("mus", "means must be sorted in descending order"));
    }
    if mus[0] == mus[1] {
        return Err(Error::TiedBestArm(mus[0]));
    }
    let delta = scheme.delta();
    let best = mus[0];
    let chernoff = |x: f64, y: f64| chernoff_crossing(x, y).1;

    // candidate grid and per-arm term for every grid point, grids ascending
    let grids: Vec<Vec<(f64, f64)>> = mus[1..]
        .iter()
        .map(|&mu| {
            (1..=grid_points)
                .map(|j| {
                    let m = mu + (best - mu) * j as f64 / (grid_points + 1) as f64;
                    let d = chernoff(mu, m);
                    (m, (log_inverse(d) / delta).ln() / d)
                })
                .collect()
        })
        .collect();
    let best_term = |m: f64| {
        let d = chernoff(best, m);
        ((n - 1) as f64 / delta * log_inverse(d)).ln() / d
    };

    let mut candidates: Vec<f64> = grids.iter().flatten().map(|&(m, _)| m).collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    // for a cap `m`, each arm independently takes its cheapest grid point <= m
    let mut optimum: Option<(f64, Vec<usize>)> = None;
    for &cap in &candidates {
        let mut choice = Vec::with_capacity(n - 1);
        let mut sum = 0.0;
        for grid in &grids {
            let pick = grid
                .iter()
                .enumerate()
                .take_while(|(_, &(m, _))| m <= cap)
                .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
                .map(|(j, _)| j);
            match pick {
                Some(j) => {
                    sum += grid[j].1;
                    choice.push(j);
                }
                None => break,
            }
        }
        if choice.len() < n - 1 {
            continue;
        }
        let realised_max = choice
            .iter()
            .zip(&grids)
            .map(|(&j, g)| g[j].0)
            .fold(f64::NEG_INFINITY, f64::max);
        let value = best_term(realised_max) + sum;
        if optimum.as_ref().is_none_or(|(v, _)| value < *v) {
            optimum = Some((value, choice));
        }
    }
    let (_, choice) = optimum.expect("the largest candidate admits every arm");

    let witness_mus: Vec<f64> = choice.iter().zip(&grids).map(|(&j, g)| g[j].0).collect();
    let per_arm_terms: Vec<f64> = choice.iter().zip(&grids).map(|(&j, g)| g[j].1).collect();
    let cap = witness_mus.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let best_arm_term = best_term(cap);
    let total = best_arm_term + per_arm_terms.iter().sum::<f64>();

    let squared = scheme.with_delta(delta * delta)?;
    let top = scheme.with_delta(delta / (n - 1) as f64)?;
    let best_level = witness_mus
        .iter()
        .map(|&m| chernoff(best, m))
        .fold(f64::INFINITY, f64::min);
    let mut stopping_indices = vec![first_crossing(&top, best_level)?];
    for (&mu, &m) in mus[1..].iter().zip(&witness_mus) {
        stopping_indices.push(first_crossing(&squared, chernoff(mu, m))?);
    }

    Ok(ComplexityBound {
        per_arm_terms,
        best_arm_term,
        total,
        witness_mus,
        stopping_indices,
    })
}
