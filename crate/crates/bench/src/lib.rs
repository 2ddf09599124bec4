//! Shared fixtures for the benchmarks.

use lilklucb_core::{parametric_means, Environment, Prob};

/// `(p, bound)` pairs spread over the unit interval and several bound scales.
pub fn inverse_cases() -> Vec<(Prob, f64)> {
    let mut cases = Vec::new();
    for i in 1..20 {
        for b in [1e-4, 1e-2, 0.3] {
            cases.push((Prob::new(f64::from(i) / 20.0).unwrap(), b));
        }
    }
    cases
}

/// Bernoulli arms with means `1 - ((i-1)/n)^alpha`.
pub fn parametric_env(n: usize, alpha: f64) -> Environment {
    Environment::bernoulli(&parametric_means(n, alpha).unwrap(), 0).unwrap()
}
