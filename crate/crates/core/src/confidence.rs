//! Anytime confidence sequences for the mean of `[0, 1]`-valued rewards.
//!
//! Four schemes share one interface:
//!
//! * [`SchemeKind::KlTilted`]: bounds from the tilted divergence
//!   `D((N mu_hat + m) / (N + 1), m) <= f_t(delta)`.
//! * [`SchemeKind::KlPrime`]: plain KL bounds `D(mu_hat, m) <= c(N) f_t(delta)`.
//! * [`SchemeKind::Sg1`]: the sub-Gaussian analogue built on the same
//!   union bound, radius `sqrt(((N+1)/N)^2 f_t(delta) / 2)`.
//! * [`SchemeKind::Sg2`]: the anytime sub-Gaussian radius of [`Sg2Radius`].
//!
//! Here `f_t(delta) = ln(kappa(N, delta) log2(2t) / delta) / t`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::bandit::ArmStats;
use crate::error::{Error, Result};
use crate::kl_math::{self, kl, Divergence, Prob};

/// Terms of the tail series summed explicitly before the integral bound.
pub const KAPPA_TERMS: u64 = 1_000_000;

/// Default tilt parameter `N`.
pub const DEFAULT_BOUND_N: u32 = 8;

/// Default confidence level.
pub const DEFAULT_DELTA: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeKind {
    #[serde(rename = "kl")]
    KlTilted,
    #[serde(rename = "kl-prime")]
    KlPrime,
    #[serde(rename = "sg1")]
    Sg1,
    #[serde(rename = "sg2")]
    Sg2,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [
        SchemeKind::KlTilted,
        SchemeKind::KlPrime,
        SchemeKind::Sg1,
        SchemeKind::Sg2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::KlTilted => "kl",
            SchemeKind::KlPrime => "kl-prime",
            SchemeKind::Sg1 => "sg1",
            SchemeKind::Sg2 => "sg2",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::param(
                    "scheme",
                    format!("unknown scheme `{s}` (expected kl, kl-prime, sg1 or sg2)"),
                )
            })
    }
}

/// Which side of the interval a check refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Upper,
    Lower,
}

/// Outcome of testing a candidate mean against a confidence interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coverage {
    Inside,
    /// The candidate exceeds the upper bound.
    AboveUpper,
    /// The candidate is below the lower bound.
    BelowLower,
}

fn check_power_of_two(n: u32) -> Result<u32> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::param("N", format!("must be a power of two, got {n}")));
    }
    Ok(n.trailing_zeros())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", format!("must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// `(S1 + N S2)^(N/(N+1))`, the delta-free factor of `kappa`.
///
/// `S2 = sum_{k >= l} (k+1)^(-(N+1)/N)` is summed to [`KAPPA_TERMS`] and
/// closed with `int_{K}^inf (x+1)^(-(N+1)/N) dx = N (K+1)^(-1/N)`, which
/// over-estimates the remainder.
fn kappa_base(n: u32) -> Result<f64> {
    static CACHE: OnceLock<Mutex<HashMap<u32, f64>>> = OnceLock::new();
    let l = check_power_of_two(n)?;
    let cache = CACHE.get_or_init(Default::default);
    if let Some(&v) = cache.lock().unwrap().get(&n) {
        return Ok(v);
    }
    let nf = f64::from(n);
    let exponent = -(nf + 1.0) / nf;
    let head: f64 = if l == 0 {
        0.0
    } else {
        (1..=n).map(|t| (2.0 * f64::from(t)).log2().powf(exponent)).sum()
    };
    let k_max = KAPPA_TERMS;
    // sum smallest terms first
    let explicit: f64 = (u64::from(l)..=k_max)
        .rev()
        .map(|k| ((k + 1) as f64).powf(exponent))
        .sum();
    let tail = nf * ((k_max + 1) as f64).powf(-1.0 / nf);
    let base = (head + nf * (explicit + tail)).powf(nf / (nf + 1.0));
    cache.lock().unwrap().insert(n, base);
    Ok(base)
}

/// `kappa(N, delta) = delta^(1/(N+1)) (S1 + N S2)^(N/(N+1))` with `N = 2^l`.
pub fn kappa(n: u32, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let base = kappa_base(n)?;
    Ok(delta.powf(1.0 / (f64::from(n) + 1.0)) * base)
}

/// `c(N) = (N + 1) / (N - ln(N + 1))`.
pub fn c_of_n(n: u32) -> Result<f64> {
    let nf = f64::from(n);
    let denom = nf - (nf + 1.0).ln();
    if n == 0 || denom <= 0.0 {
        return Err(Error::param("N", format!("c(N) undefined for N = {n}")));
    }
    Ok((nf + 1.0) / denom)
}

/// Riemann zeta for `s > 1`: explicit sum plus an Euler-Maclaurin tail.
fn zeta(s: f64) -> f64 {
    const K: u32 = 1000;
    let head: f64 = (1..K).map(|k| f64::from(k).powf(-s)).sum();
    let k = f64::from(K);
    head + k.powf(1.0 - s) / (s - 1.0) + 0.5 * k.powf(-s) + s * k.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * k.powf(-s - 3.0) / 720.0
}

/// Anytime sub-Gaussian deviation radius (the SG2 baseline).
///
/// For `sigma`-sub-Gaussian increments and any `eta > 1`, `x >= 8/(e-1)^2`,
///
/// ```text
/// P(exists t: S_t > sqrt(2 sigma^2 t (x + eta ln ln(e t))))
///     <= sqrt(e) zeta(eta) (sqrt(x / 8) + 1)^eta exp(-x)
/// ```
///
/// The radius for the mean is `sqrt(2 sigma^2 (x + eta ln ln(e t)) / t)`
/// with `sigma^2 = 1/4` and `x` chosen so the right side equals `delta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sg2Radius {
    pub eta: f64,
    pub delta: f64,
    level: f64,
}

impl Sg2Radius {
    pub const DEFAULT_ETA: f64 = 1.1;
    const VARIANCE: f64 = 0.25;

    pub fn new(delta: f64, eta: f64) -> Result<Self> {
        check_delta(delta)?;
        if eta.is_nan() || eta <= 1.0 {
            return Err(Error::param("eta", format!("must exceed 1, got {eta}")));
        }
        let e = std::f64::consts::E;
        let x_min = 8.0 / ((e - 1.0) * (e - 1.0));
        let log_tail = |x: f64| 0.5 + zeta(eta).ln() + eta * ((x / 8.0).sqrt() + 1.0).ln() - x;
        let target = delta.ln();
        // log_tail is decreasing for x >= x_min
        let level = if log_tail(x_min) <= target {
            x_min
        } else {
            let mut lo = x_min;
            let mut hi = x_min.max(1.0);
            while log_tail(hi) > target {
                hi *= 2.0;
            }
            for _ in 0..kl_math::MAX_BISECTION_ITERS {
                let mid = 0.5 * (lo + hi);
                if mid == lo || mid == hi {
                    break;
                }
                if log_tail(mid) > target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            hi
        };
        Ok(Sg2Radius { eta, delta, level })
    }

    /// The level `x(delta)`.
    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn radius(&self, t: u64) -> f64 {
        let t = t.max(1) as f64;
        let lil = (std::f64::consts::E * t).ln().ln();
        (2.0 * Self::VARIANCE * (self.level + self.eta * lil) / t).sqrt()
    }
}

/// `sg2_radius(t, delta)` with the default `eta`.
pub fn sg2_radius(t: u64, delta: f64) -> Result<f64> {
    Ok(Sg2Radius::new(delta, Sg2Radius::DEFAULT_ETA)?.radius(t))
}

/// An anytime confidence sequence: scheme kind, tilt `N`, confidence `delta`,
/// with `kappa` and `c(N)` precomputed.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundScheme {
    kind: SchemeKind,
    bound_n: u32,
    delta: f64,
    kappa_base: f64,
    kappa: f64,
    c: f64,
    sg2: Option<Sg2Radius>,
}

impl BoundScheme {
    pub fn new(kind: SchemeKind, bound_n: u32, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        let base = kappa_base(bound_n)?;
        let c = match kind {
            SchemeKind::KlPrime => c_of_n(bound_n)?,
            _ => 1.0,
        };
        let sg2 = match kind {
            SchemeKind::Sg2 => Some(Sg2Radius::new(delta, Sg2Radius::DEFAULT_ETA)?),
            _ => None,
        };
        Ok(BoundScheme {
            kind,
            bound_n,
            delta,
            kappa_base: base,
            kappa: delta.powf(1.0 / (f64::from(bound_n) + 1.0)) * base,
            c,
            sg2,
        })
    }

    /// The same scheme at a different confidence level.
    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        let sg2 = match self.sg2 {
            Some(r) => Some(Sg2Radius::new(delta, r.eta)?),
            None => None,
        };
        Ok(BoundScheme {
            delta,
            kappa: delta.powf(1.0 / (f64::from(self.bound_n) + 1.0)) * self.kappa_base,
            sg2,
            ..self.clone()
        })
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn bound_n(&self) -> u32 {
        self.bound_n
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `c(N)` for [`SchemeKind::KlPrime`], 1 otherwise.
    pub fn c(&self) -> f64 {
        self.c
    }

    /// `f_t(delta)` scaled by `c` (KL-prime only); clamped at zero.
    pub fn threshold(&self, t: u64) -> Divergence {
        Divergence::new(self.raw_threshold(t)).unwrap_or(Divergence::ZERO)
    }

    #[inline]
    pub(crate) fn raw_threshold(&self, t: u64) -> f64 {
        let t = t.max(1) as f64;
        let arg = self.kappa * (2.0 * t).log2() / self.delta;
        (self.c * arg.ln() / t).max(0.0)
    }

    fn sub_gaussian_radius(&self, t: u64) -> f64 {
        match self.sg2 {
            Some(r) => r.radius(t),
            None => {
                let nf = f64::from(self.bound_n);
                let tilt = (nf + 1.0) / nf;
                (0.5 * tilt * tilt * self.raw_threshold(t)).sqrt()
            }
        }
    }

    /// Upper confidence bound from an empirical mean over `t` samples.
    pub(crate) fn upper(&self, mean: f64, t: u64) -> f64 {
        match self.kind {
            SchemeKind::KlTilted => {
                kl_math::tilted_upper(mean, self.raw_threshold(t), self.bound_n)
            }
            SchemeKind::KlPrime => kl_math::kl_upper(mean, self.raw_threshold(t)),
            SchemeKind::Sg1 | SchemeKind::Sg2 => (mean + self.sub_gaussian_radius(t)).min(1.0),
        }
    }

    pub(crate) fn lower(&self, mean: f64, t: u64) -> f64 {
        match self.kind {
            SchemeKind::KlTilted => {
                kl_math::tilted_lower(mean, self.raw_threshold(t), self.bound_n)
            }
            SchemeKind::KlPrime => kl_math::kl_lower(mean, self.raw_threshold(t)),
            SchemeKind::Sg1 | SchemeKind::Sg2 => (mean - self.sub_gaussian_radius(t)).max(0.0),
        }
    }

    pub fn upper_bound(&self, stats: &ArmStats) -> Result<Prob> {
        let mean = stats.checked_mean()?;
        Prob::new(self.upper(mean, stats.pulls()))
    }

    pub fn lower_bound(&self, stats: &ArmStats) -> Result<Prob> {
        let mean = stats.checked_mean()?;
        Prob::new(self.lower(mean, stats.pulls()))
    }

    /// Whether `mu` lies in the interval built from `mean` over `t` samples.
    ///
    /// Equivalent to comparing against [`upper_bound`](Self::upper_bound) and
    /// [`lower_bound`](Self::lower_bound) but needs one divergence
    /// evaluation instead of an inversion.
    pub fn coverage(&self, mean: f64, t: u64, mu: f64) -> Coverage {
        if mu == mean {
            return Coverage::Inside;
        }
        let outside = match self.kind {
            SchemeKind::KlTilted => {
                kl_math::tilted_kl(mean, mu, self.bound_n) > self.raw_threshold(t)
            }
            SchemeKind::KlPrime => kl(mean, mu) > self.raw_threshold(t),
            SchemeKind::Sg1 | SchemeKind::Sg2 => (mu - mean).abs() > self.sub_gaussian_radius(t),
        };
        match (outside, mu > mean) {
            (false, _) => Coverage::Inside,
            (true, true) => Coverage::AboveUpper,
            (true, false) => Coverage::BelowLower,
        }
    }

    /// Deviation sequence `z_t` of the tilted scheme for a true mean `mu`.
    ///
    /// Solves `D(mu + N/(N+1) z, mu) = f_t(delta)` for `z` in `(0, 1 - mu]`
    /// (upper side) or `D(mu - N/(N+1) z, mu) = f_t(delta)` for `z` in
    /// `(0, mu]` (lower side). When no solution exists the boundary value
    /// `1 - mu` (resp. `mu`) is returned.
    pub fn deviation_z(&self, mu: Prob, t: u64, side: Side) -> Result<f64> {
        if self.kind != SchemeKind::KlTilted {
            return Err(Error::param(
                "scheme",
                format!("deviation sequence is defined for `kl`, not `{}`", self.kind),
            ));
        }
        if t == 0 {
            return Err(Error::param("t", "must be at least 1"));
        }
        let mu = mu.get();
        let nf = f64::from(self.bound_n);
        let shrink = nf / (nf + 1.0);
        let f = self.raw_threshold(t);
        let room = match side {
            Side::Upper => 1.0 - mu,
            Side::Lower => mu,
        };
        let sign = match side {
            Side::Upper => 1.0,
            Side::Lower => -1.0,
        };
        let divergence = |x: f64| kl((mu + sign * x).clamp(0.0, 1.0), mu);
        let x_max = shrink * room;
        if room == 0.0 || divergence(x_max) <= f {
            return Ok(room);
        }
        // bisect on the shifted distance x = N/(N+1) z, then rescale
        let (mut inside, mut outside) = (0.0, x_max);
        for _ in 0..kl_math::MAX_BISECTION_ITERS {
            let mid = kl_math::float_midpoint(inside, outside);
            if mid == inside || mid == outside {
                break;
            }
            if divergence(mid) <= f {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        Ok(inside / shrink)
    }
}

/// Per-`t` thresholds (or radii) precomputed up to a horizon, for checking
/// coverage along long reward streams.
#[derive(Clone, Debug)]
pub struct CoverageChecker {
    kind: SchemeKind,
    bound_n: u32,
    /// Divergence threshold for KL schemes, radius for sub-Gaussian ones; index `t - 1`.
    levels: Vec<f64>,
}

impl CoverageChecker {
    pub fn horizon(&self) -> u64 {
        self.levels.len() as u64
    }

    /// Same answer as [`BoundScheme::coverage`] for `1 <= t <= horizon`.
    #[inline]
    pub fn check(&self, mean: f64, t: u64, mu: f64) -> Coverage {
        if mu == mean {
            return Coverage::Inside;
        }
        let level = self.levels[(t - 1) as usize];
        let outside = match self.kind {
            SchemeKind::KlTilted => kl_math::tilted_kl(mean, mu, self.bound_n) > level,
            SchemeKind::KlPrime => kl(mean, mu) > level,
            SchemeKind::Sg1 | SchemeKind::Sg2 => (mu - mean).abs() > level,
        };
        match (outside, mu > mean) {
            (false, _) => Coverage::Inside,
            (true, true) => Coverage::AboveUpper,
            (true, false) => Coverage::BelowLower,
        }
    }
}

impl BoundScheme {
    pub fn coverage_checker(&self, horizon: u64) -> CoverageChecker {
        let levels = (1..=horizon)
            .map(|t| match self.kind {
                SchemeKind::KlTilted | SchemeKind::KlPrime => self.raw_threshold(t),
                SchemeKind::Sg1 | SchemeKind::Sg2 => self.sub_gaussian_radius(t),
            })
            .collect();
        CoverageChecker {
            kind: self.kind,
            bound_n: self.bound_n,
            levels,
        }
    }
}

impl fmt::Display for BoundScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (N={}, delta={})", self.kind, self.bound_n, self.delta)
    }
}
