//! Reward-generating processes for simulations.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::data_ingest::ContestDataset;
use crate::error::{Error, Result};
use crate::kl_math::Prob;

/// Reward distribution of one arm; support is always inside `[0, 1]`.
#[derive(Clone, Debug)]
pub enum ArmDistribution {
    Bernoulli(f64),
    Discrete {
        values: Vec<f64>,
        weights: Vec<f64>,
        index: WeightedIndex<f64>,
    },
    /// Uniform resampling with replacement from an observed pool.
    Bootstrap(Vec<f64>),
}

fn check_support(values: &[f64]) -> Result<()> {
    match values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(&v) => Err(Error::InvalidProbability(v)),
        None => Ok(()),
    }
}

impl ArmDistribution {
    pub fn bernoulli(p: f64) -> Result<Self> {
        Ok(ArmDistribution::Bernoulli(Prob::new(p)?.get()))
    }

    pub fn discrete(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != weights.len() {
            return Err(Error::param(
                "weights",
                "need one weight per support value and at least one value",
            ));
        }
        check_support(&values)?;
        if weights.iter().any(|w| w.is_nan() || *w < 0.0) {
            return Err(Error::param("weights", "weights must be non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::param("weights", format!("weights sum to {total}, not 1")));
        }
        let index = WeightedIndex::new(&weights)
            .map_err(|e| Error::param("weights", e.to_string()))?;
        Ok(ArmDistribution::Discrete {
            values,
            weights,
            index,
        })
    }

    pub fn bootstrap(pool: Vec<f64>) -> Result<Self> {
        if pool.is_empty() {
            return Err(Error::param("pool", "bootstrap pool is empty"));
        }
        check_support(&pool)?;
        Ok(ArmDistribution::Bootstrap(pool))
    }

    /// Analytic mean of the distribution.
    pub fn mean(&self) -> f64 {
        match self {
            ArmDistribution::Bernoulli(p) => *p,
            ArmDistribution::Discrete { values, weights, .. } => {
                values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>().clamp(0.0, 1.0)
            }
            ArmDistribution::Bootstrap(pool) => {
                (pool.iter().sum::<f64>() / pool.len() as f64).clamp(0.0, 1.0)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ArmDistribution::Bernoulli(p) => {
                if rng.gen::<f64>() < *p {
                    1.0
                } else {
                    0.0
                }
            }
            ArmDistribution::Discrete { values, index, .. } => values[index.sample(rng)],
            ArmDistribution::Bootstrap(pool) => pool[rng.gen_range(0..pool.len())],
        }
    }
}

/// A set of arms ordered by decreasing mean, with a unique best arm at index 0.
#[derive(Clone, Debug)]
pub struct Environment {
    arms: Vec<ArmDistribution>,
    true_means: Vec<f64>,
    seed: u64,
}

impl Environment {
    /// Sorts the arms by decreasing mean (stable) and checks the best arm is unique.
    pub fn new(arms: Vec<ArmDistribution>, seed: u64) -> Result<Self> {
        if arms.is_empty() {
            return Err(Error::param("arms", "environment has no arms"));
        }
        let mut arms: Vec<(f64, ArmDistribution)> = arms.into_iter().map(|a| (a.mean(), a)).collect();
        arms.sort_by(|a, b| b.0.total_cmp(&a.0));
        if arms.len() >= 2 && arms[0].0 == arms[1].0 {
            return Err(Error::TiedBestArm(arms[0].0));
        }
        let (true_means, arms) = arms.into_iter().unzip();
        Ok(Environment {
            arms,
            true_means,
            seed,
        })
    }

    pub fn bernoulli(means: &[Prob], seed: u64) -> Result<Self> {
        let arms = means
            .iter()
            .map(|p| ArmDistribution::bernoulli(p.get()))
            .collect::<Result<_>>()?;
        Environment::new(arms, seed)
    }

    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn true_means(&self) -> &[f64] {
        &self.true_means
    }

    pub fn arms(&self) -> &[ArmDistribution] {
        &self.arms
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Same arms under a different seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        Environment {
            seed,
            ..self.clone()
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, arm: usize, rng: &mut R) -> Result<f64> {
        self.arms
            .get(arm)
            .map(|a| a.sample(rng))
            .ok_or(Error::ArmOutOfRange {
                index: arm,
                arms: self.arms.len(),
            })
    }
}

fn check_family(n: usize, alpha: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::param("n", format!("need at least 2 arms, got {n}")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param("alpha", format!("must be positive, got {alpha}")));
    }
    Ok(())
}

/// `mu_i = 1 - ((i - 1) / n)^alpha` for `i = 1..=n`.
pub fn parametric_means(n: usize, alpha: f64) -> Result<Vec<Prob>> {
    check_family(n, alpha)?;
    (0..n)
        .map(|i| Prob::new(1.0 - (i as f64 / n as f64).powf(alpha)))
        .collect()
}

/// `gap_i = (i / n)^alpha` for `i = 1..=n`.
pub fn gap_family(n: usize, alpha: f64) -> Result<Vec<f64>> {
    check_family(n, alpha)?;
    Ok((1..=n).map(|i| (i as f64 / n as f64).powf(alpha)).collect())
}

/// Default mapping of 1/2/3-star votes to rewards.
pub const DEFAULT_STAR_MAP: [f64; 3] = [0.0, 0.5, 1.0];

/// One bootstrap arm per caption, rewards given by `star_map`.
pub fn from_contest(dataset: &ContestDataset, star_map: [f64; 3], seed: u64) -> Result<Environment> {
    check_support(&star_map)?;
    let arms = dataset
        .captions
        .iter()
        .map(|caption| {
            if caption.total_votes() == 0 {
                return Err(Error::EmptyCaption(caption.text.clone()));
            }
            let pool = caption
                .star_counts
                .iter()
                .zip(star_map)
                .flat_map(|(&count, value)| std::iter::repeat_n(value, count as usize))
                .collect();
            ArmDistribution::bootstrap(pool)
        })
        .collect::<Result<Vec<_>>>()?;
    Environment::new(arms, seed)
}
