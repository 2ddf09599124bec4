//! Bernoulli relative entropy, its one-sided inverses, and Chernoff information.
//!
//! All logarithms are natural. Inverses are computed by bisection on the
//! probability argument and always return the endpoint that lies inside the
//! feasible set, so `D(p, kl_upper_inverse(p, b)) <= b` holds exactly in
//! floating point.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Iteration cap for every bisection in this module.
pub const MAX_BISECTION_ITERS: usize = 200;

/// Number of points in the monotonicity pre-scan of the tilted inverses.
pub const PRESCAN_POINTS: usize = 64;

/// A probability in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Prob(f64);

impl Prob {
    pub const ZERO: Prob = Prob(0.0);
    pub const ONE: Prob = Prob(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Prob(value))
        } else {
            Err(Error::InvalidProbability(value))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Prob {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Prob::new(value)
    }
}

impl From<Prob> for f64 {
    fn from(p: Prob) -> f64 {
        p.0
    }
}

impl fmt::Display for Prob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A relative entropy value in `[0, +inf]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Divergence(f64);

impl Divergence {
    pub const ZERO: Divergence = Divergence(0.0);
    pub const INFINITE: Divergence = Divergence(f64::INFINITY);

    pub fn new(value: f64) -> Result<Self> {
        if value >= 0.0 {
            Ok(Divergence(value))
        } else {
            Err(Error::InvalidDivergence(value))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// `D(p, q)` on raw floats. Callers guarantee both arguments lie in `[0, 1]`.
#[inline]
pub(crate) fn kl(p: f64, q: f64) -> f64 {
    let mut d = 0.0;
    if p > 0.0 {
        if q == 0.0 {
            return f64::INFINITY;
        }
        d += p * (p / q).ln();
    }
    if p < 1.0 {
        if q == 1.0 {
            return f64::INFINITY;
        }
        d += (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln();
    }
    // rounding can leave a tiny negative value when p and q are adjacent floats
    d.max(0.0)
}

/// `D((N p + m) / (N + 1), m)`, the divergence of the tilted confidence bounds.
#[inline]
pub(crate) fn tilted_kl(p: f64, m: f64, n: u32) -> f64 {
    let n = f64::from(n);
    let mixed = ((n * p + m) / (n + 1.0)).clamp(0.0, 1.0);
    kl(mixed, m)
}

/// Bernoulli relative entropy `D(p, q)` with `0 log 0 = 0`.
///
/// Infinite exactly when `q = 0 < p` or `q = 1 > p`.
pub fn bernoulli_kl(p: Prob, q: Prob) -> Divergence {
    Divergence(kl(p.0, q.0))
}

/// Midpoint of two non-negative floats in IEEE bit order.
///
/// Far-apart endpoints split near their geometric mean, close ones near the
/// arithmetic mean, so any bracket inside `[0, 1]` shrinks to adjacent floats
/// in at most 64 steps, even when the root is as small as `1e-300`.
#[inline]
pub(crate) fn float_midpoint(a: f64, b: f64) -> f64 {
    debug_assert!(a >= 0.0 && b >= 0.0);
    let (x, y) = (a.to_bits(), b.to_bits());
    let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
    f64::from_bits(lo + (hi - lo) / 2)
}

/// Finds the boundary of `{x : f(x) <= bound}` on the segment from `inside`
/// to `outside`, where `f(inside) <= bound < f(outside)` and `f` is
/// nondecreasing when moving from `inside` towards `outside`.
///
/// Bisects until the two endpoints are adjacent floats (or the iteration cap
/// is hit) and returns the feasible endpoint.
fn bisect_boundary(f: impl Fn(f64) -> f64, mut inside: f64, mut outside: f64, bound: f64) -> f64 {
    for _ in 0..MAX_BISECTION_ITERS {
        let mid = float_midpoint(inside, outside);
        if mid == inside || mid == outside {
            break;
        }
        if f(mid) <= bound {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

/// Level-set boundary with a pre-scan guarding the monotonicity assumption.
///
/// `f(inside)` must be zero. When the scan finds `f` nondecreasing this is a
/// plain bisection over the whole segment; otherwise the outermost scan
/// interval that crosses `bound` is bracketed and bisected, which still
/// returns the extreme point of the feasible set up to the scan resolution.
pub(crate) fn scanned_boundary(f: impl Fn(f64) -> f64, inside: f64, outside: f64, bound: f64) -> f64 {
    if f(outside) <= bound {
        return outside;
    }
    let step = (outside - inside) / (PRESCAN_POINTS - 1) as f64;
    let point = |k: usize| {
        if k == PRESCAN_POINTS - 1 {
            outside
        } else {
            inside + step * k as f64
        }
    };
    let values: Vec<f64> = (0..PRESCAN_POINTS).map(|k| f(point(k))).collect();
    let monotone = values.windows(2).all(|w| w[1] >= w[0]);
    if monotone {
        return bisect_boundary(&f, inside, outside, bound);
    }
    // Walk back from the outside end to the last feasible scan point.
    let last_feasible = (0..PRESCAN_POINTS)
        .rev()
        .find(|&k| values[k] <= bound)
        .unwrap_or(0);
    bisect_boundary(&f, point(last_feasible), point(last_feasible + 1), bound)
}

pub(crate) fn kl_upper(p: f64, bound: f64) -> f64 {
    if bound <= 0.0 {
        return p;
    }
    if kl(p, 1.0) <= bound {
        return 1.0;
    }
    bisect_boundary(|m| kl(p, m), p, 1.0, bound)
}

pub(crate) fn kl_lower(p: f64, bound: f64) -> f64 {
    if bound <= 0.0 {
        return p;
    }
    if kl(p, 0.0) <= bound {
        return 0.0;
    }
    bisect_boundary(|m| kl(p, m), p, 0.0, bound)
}

pub(crate) fn tilted_upper(p: f64, bound: f64, n: u32) -> f64 {
    if bound <= 0.0 {
        return p;
    }
    scanned_boundary(|m| tilted_kl(p, m, n), p, 1.0, bound)
}

pub(crate) fn tilted_lower(p: f64, bound: f64, n: u32) -> f64 {
    if bound <= 0.0 {
        return p;
    }
    scanned_boundary(|m| tilted_kl(p, m, n), p, 0.0, bound)
}

/// `sup { m >= p : D(p, m) <= bound }`.
pub fn kl_upper_inverse(p: Prob, bound: Divergence) -> Prob {
    Prob(kl_upper(p.0, bound.0))
}

/// `inf { m <= p : D(p, m) <= bound }`.
pub fn kl_lower_inverse(p: Prob, bound: Divergence) -> Prob {
    Prob(kl_lower(p.0, bound.0))
}

/// `sup { m >= p : D((N p + m) / (N + 1), m) <= bound }`.
pub fn tilted_kl_upper_inverse(p: Prob, bound: Divergence, n: u32) -> Result<Prob> {
    check_tilt(n)?;
    Ok(Prob(tilted_upper(p.0, bound.0, n)))
}

/// `inf { m <= p : D((N p + m) / (N + 1), m) <= bound }`.
pub fn tilted_kl_lower_inverse(p: Prob, bound: Divergence, n: u32) -> Result<Prob> {
    check_tilt(n)?;
    Ok(Prob(tilted_lower(p.0, bound.0, n)))
}

fn check_tilt(n: u32) -> Result<()> {
    if n == 0 {
        return Err(Error::param("N", "tilt parameter must be at least 1"));
    }
    Ok(())
}

/// Crossing point `z*` and value `D*(x, y)` of the Chernoff information.
///
/// Returns `(z*, D*)`. For equal arguments `z* = x` and `D* = 0`.
pub(crate) fn chernoff_crossing(x: f64, y: f64) -> (f64, f64) {
    let (a, b) = if x <= y { (x, y) } else { (y, x) };
    if a == b {
        return (a, 0.0);
    }
    // D(z, 1) is infinite for z < 1 and D(z, 0) for z > 0, so the crossing
    // sits on the degenerate endpoint.
    if b == 1.0 {
        return (1.0, kl(1.0, a));
    }
    if a == 0.0 {
        return (0.0, kl(0.0, b));
    }
    // g(z) = D(z, a) - D(z, b) is strictly increasing on [a, b], negative at a
    // and positive at b.
    let mut lo = a;
    let mut hi = b;
    for _ in 0..MAX_BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if kl(mid, a) < kl(mid, b) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let z = 0.5 * (lo + hi);
    (z, kl(z, a))
}

/// Chernoff information `D*(x, y) = D(z*, x) = D(z*, y)`.
///
/// Symmetric in its arguments; zero when they coincide.
pub fn chernoff_information(x: Prob, y: Prob) -> Divergence {
    Divergence(chernoff_crossing(x.0, y.0).1)
}

/// Closed-form lower bound on `D*(mu, mu + gap)`:
/// `-log(sqrt(mu (mu + gap)) + sqrt((1 - mu)(1 - mu - gap)))`.
pub fn chernoff_floor(mu: Prob, gap: f64) -> Result<Divergence> {
    let mu = mu.0;
    if gap.is_nan() || gap < 0.0 {
        return Err(Error::param("gap", format!("must be non-negative, got {gap}")));
    }
    if mu + gap > 1.0 {
        return Err(Error::param(
            "gap",
            format!("mu + gap = {} exceeds 1", mu + gap),
        ));
    }
    let hi = mu + gap;
    let affinity = (mu * hi).sqrt() + ((1.0 - mu) * (1.0 - hi)).sqrt();
    Ok(Divergence((-affinity.ln()).max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(v: f64) -> Prob {
        Prob::new(v).unwrap()
    }

    fn d(v: f64) -> Divergence {
        Divergence::new(v).unwrap()
    }

    #[test]
    fn prob_rejects_out_of_range_and_nan() {
        assert!(Prob::new(-0.1).is_err());
        assert!(Prob::new(1.0 + 1e-12).is_err());
        assert!(Prob::new(f64::NAN).is_err());
        assert!(Prob::new(0.0).is_ok());
        assert!(Prob::new(1.0).is_ok());
        assert!(Divergence::new(-1e-300).is_err());
        assert!(Divergence::new(f64::NAN).is_err());
        assert!(Divergence::new(f64::INFINITY).is_ok());
    }

    #[test]
    fn kl_edge_conventions() {
        assert_eq!(bernoulli_kl(p(0.5), p(0.5)).get(), 0.0);
        assert_eq!(bernoulli_kl(p(0.0), p(0.0)).get(), 0.0);
        assert_eq!(bernoulli_kl(p(1.0), p(1.0)).get(), 0.0);
        assert!(bernoulli_kl(p(0.3), p(0.0)).is_infinite());
        assert!(bernoulli_kl(p(0.3), p(1.0)).is_infinite());
        assert_eq!(bernoulli_kl(p(0.0), p(0.5)).get(), 2f64.ln());
        assert_relative_eq!(bernoulli_kl(p(1.0), p(0.5)).get(), std::f64::consts::LN_2);
    }

    #[test]
    fn kl_matches_high_precision_value() {
        // D(0.3, 0.7) = 0.4 ln(7/3), evaluated at 40 digits with mpmath.
        let expected = 0.338_919_144_154_881_4;
        assert_relative_eq!(bernoulli_kl(p(0.3), p(0.7)).get(), expected, max_relative = 1e-14);
    }

    #[test]
    fn inverse_trivial_cases() {
        assert_eq!(kl_upper_inverse(p(0.5), Divergence::ZERO).get(), 0.5);
        assert_eq!(kl_lower_inverse(p(0.5), Divergence::ZERO).get(), 0.5);
        for v in [0.0, 0.2, 0.9, 1.0] {
            assert_eq!(kl_upper_inverse(p(v), Divergence::INFINITE).get(), 1.0);
            assert_eq!(kl_lower_inverse(p(v), Divergence::INFINITE).get(), 0.0);
            assert_eq!(tilted_kl_upper_inverse(p(v), Divergence::INFINITE, 8).unwrap().get(), 1.0);
            assert_eq!(tilted_kl_lower_inverse(p(v), Divergence::INFINITE, 8).unwrap().get(), 0.0);
        }
        assert_eq!(tilted_kl_upper_inverse(p(0.5), Divergence::ZERO, 8).unwrap().get(), 0.5);
        assert_eq!(tilted_kl_lower_inverse(p(0.5), Divergence::ZERO, 8).unwrap().get(), 0.5);
        assert!(tilted_kl_upper_inverse(p(0.5), d(0.1), 0).is_err());
    }

    #[test]
    fn inverse_roundtrip_examples() {
        let up = kl_upper_inverse(p(0.5), d(0.1)).get();
        assert!(up > 0.5);
        assert!((kl(0.5, up) - 0.1).abs() <= 1e-9);
        let lo = kl_lower_inverse(p(0.5), d(0.1)).get();
        assert!(lo < 0.5);
        assert!((kl(0.5, lo) - 0.1).abs() <= 1e-9);
        // symmetric around 1/2
        assert_relative_eq!(up, 1.0 - lo, epsilon = 1e-12);

        let tu = tilted_kl_upper_inverse(p(0.3), d(0.05), 8).unwrap().get();
        assert!((kl((8.0 * 0.3 + tu) / 9.0, tu) - 0.05).abs() <= 1e-9);
        let tl = tilted_kl_lower_inverse(p(0.3), d(0.05), 8).unwrap().get();
        assert!(tl < 0.3);
        assert!((kl((8.0 * 0.3 + tl) / 9.0, tl) - 0.05).abs() <= 1e-9);
    }

    #[test]
    fn tilted_interval_is_wider_than_plain() {
        // the tilted divergence is smaller than D(p, m), so its bound reaches further
        let plain = kl_upper_inverse(p(0.4), d(0.02)).get();
        let tilted = tilted_kl_upper_inverse(p(0.4), d(0.02), 8).unwrap().get();
        assert!(tilted > plain);
    }

    #[test]
    fn scan_fallback_finds_rightmost_crossing() {
        // Non-monotone profile: feasible on [0, 0.3] and again on [0.6, 0.8].
        let f = |x: f64| {
            if x < 0.3 {
                x
            } else if x < 0.6 {
                1.0
            } else {
                (x - 0.6) * 2.5
            }
        };
        let sup = scanned_boundary(f, 0.0, 1.0, 0.5);
        assert!((sup - 0.8).abs() < 1e-12, "sup = {sup}");
        // mirrored direction
        let g = |x: f64| f(1.0 - x);
        let inf = scanned_boundary(g, 1.0, 0.0, 0.5);
        assert!((inf - 0.2).abs() < 1e-12, "inf = {inf}");
    }

    #[test]
    fn chernoff_examples() {
        for v in [0.0, 0.3, 1.0] {
            assert_eq!(chernoff_information(p(v), p(v)).get(), 0.0);
        }
        // x = 1 - y forces z* = 1/2
        let (z, value) = chernoff_crossing(0.25, 0.75);
        assert_relative_eq!(z, 0.5, epsilon = 1e-15);
        assert_relative_eq!(value, kl(0.5, 0.25), max_relative = 1e-14);

        let (z, value) = chernoff_crossing(0.3, 0.8);
        assert!(z > 0.3 && z < 0.8);
        assert!((kl(z, 0.3) - kl(z, 0.8)).abs() <= 1e-10);
        assert_eq!(value, kl(z, 0.3));
    }

    #[test]
    fn chernoff_degenerate_endpoints() {
        // D(z, 1) is infinite below 1, so D*(x, 1) = D(1, x) = -ln x
        assert_relative_eq!(chernoff_information(p(0.25), p(1.0)).get(), 4f64.ln());
        assert_relative_eq!(chernoff_information(p(0.0), p(0.75)).get(), 4f64.ln());
        assert!(chernoff_information(p(0.0), p(1.0)).is_infinite());
    }

    #[test]
    fn chernoff_floor_examples() {
        assert!(chernoff_floor(p(0.3), 0.0).unwrap().get().abs() < 1e-15);
        assert!(chernoff_floor(p(0.3), 1e-9).unwrap().get() < 1e-15);
        let gap: f64 = 0.4;
        assert_relative_eq!(
            chernoff_floor(p(0.0), gap).unwrap().get(),
            -0.5 * (1.0 - gap).ln(),
            max_relative = 1e-14
        );
        let floor = chernoff_floor(p(0.2), 0.3).unwrap().get();
        assert!(floor > 0.0);
        assert!(floor <= chernoff_information(p(0.2), p(0.5)).get());
        assert!(chernoff_floor(p(0.8), 0.3).is_err());
        assert!(chernoff_floor(p(0.2), -0.1).is_err());
    }

    #[test]
    fn prob_serde_validates() {
        let ok: Prob = serde_json::from_str("0.25").unwrap();
        assert_eq!(ok.get(), 0.25);
        assert!(serde_json::from_str::<Prob>("1.5").is_err());
    }
}
