//! Hoeffding confidence bounds for classifier accuracy.
//!
//! Logarithms are natural throughout.

use rand::Rng;

use crate::error::{domain, Result};
use crate::rng::rng_for;

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(domain(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(())
}

/// Probability of confidence `exp(−2ε²n)`; one for `n = 0`.
pub fn poc(epsilon: f64, n: u64) -> f64 {
    (-2.0 * epsilon * epsilon * n as f64).exp()
}

/// Smallest `n` with `2·exp(−2ε²n) ≤ α`, i.e. `⌈ln(2/α) / (2ε²)⌉`.
pub fn min_samples(epsilon: f64, alpha: f64) -> Result<u64> {
    check_epsilon(epsilon)?;
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(domain(format!("alpha must lie in (0, 2], got {alpha}")));
    }
    let raw = (2.0 / alpha).ln() / (2.0 * epsilon * epsilon);
    let mut n = raw.ceil().max(0.0) as u64;
    // guard the ceiling against rounding in the closed form
    while n > 0 && 2.0 * poc(epsilon, n - 1) <= alpha {
        n -= 1;
    }
    while 2.0 * poc(epsilon, n) > alpha {
        n += 1;
    }
    Ok(n)
}

/// Bootstrap view of how far an observed accuracy may drift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointProbability {
    /// Fraction of resampled means with `|m* − m̂| ≥ ε`.
    pub two_sided: f64,
    /// Fraction of resampled means with `m* − m̂ ≥ ε`.
    pub one_sided: f64,
    /// `|m̂ − true_error|` for the observed indicators.
    pub observed_deviation: f64,
    /// Two-sided Hoeffding bound `2·exp(−2ε²n)`, capped at one.
    pub bound: f64,
}

/// Bootstrap estimate of `Pr(|mean(ν) − E[ν]| ≥ ε)` from 0/1 classifier
/// results, resampling around the observed mean.
pub fn empirical_point_probability(
    results: &[u8],
    true_error: f64,
    epsilon: f64,
    resamples: usize,
    seed: u64,
) -> Result<PointProbability> {
    check_epsilon(epsilon)?;
    if results.is_empty() {
        return Err(domain("no classifier results"));
    }
    if results.iter().any(|&r| r > 1) {
        return Err(domain("classifier results must be 0 or 1"));
    }
    if resamples == 0 {
        return Err(domain("at least one bootstrap resample is required"));
    }
    let n = results.len();
    let ones = results.iter().filter(|&&r| r == 1).count();
    let mean = ones as f64 / n as f64;
    let mut rng = rng_for(seed, &[]);
    let (mut two, mut one) = (0usize, 0usize);
    for _ in 0..resamples {
        let hits = (0..n).filter(|_| results[rng.random_range(0..n)] == 1).count();
        let dev = hits as f64 / n as f64 - mean;
        // tolerance absorbs the rounding of hits / n
        if dev.abs() >= epsilon - 1e-12 {
            two += 1;
        }
        if dev >= epsilon - 1e-12 {
            one += 1;
        }
    }
    Ok(PointProbability {
        two_sided: two as f64 / resamples as f64,
        one_sided: one as f64 / resamples as f64,
        observed_deviation: (mean - true_error).abs(),
        bound: (2.0 * poc(epsilon, n as u64)).min(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poc_values() {
        assert!((poc(0.25, 45) - 0.003_607).abs() < 1e-6);
        assert!((poc(0.25, 45) - (-5.625f64).exp()).abs() < 1e-15);
        assert_eq!(poc(0.3, 0), 1.0);
        assert!(poc(0.3, 10) > poc(0.3, 11));
        assert!(poc(0.3, 10) > poc(0.31, 10));
    }

    #[test]
    fn min_samples_values() {
        assert_eq!(min_samples(0.05, 0.05).unwrap(), 738);
        assert_eq!(min_samples(0.25, 0.1).unwrap(), 24);
        assert_eq!(min_samples(0.1, 2.0).unwrap(), 0);
        assert!(min_samples(0.1, 0.0).is_err());
        assert!(min_samples(0.0, 0.1).is_err());
    }

    #[test]
    fn min_samples_matches_direct_search() {
        for &eps in &[0.02, 0.05, 0.1, 0.25, 0.5, 0.9] {
            for &alpha in &[0.001, 0.01, 0.05, 0.1, 0.5, 1.0, 1.9] {
                let n = min_samples(eps, alpha).unwrap();
                let direct = (0u64..).find(|&m| 2.0 * (-2.0 * eps * eps * m as f64).exp() <= alpha).unwrap();
                assert_eq!(n, direct, "eps {eps} alpha {alpha}");
                assert!(poc(eps, n) <= alpha / 2.0);
            }
        }
    }

    #[test]
    fn point_probability_degenerate_cases() {
        let r = empirical_point_probability(&[1; 50], 1.0, 0.1, 500, 1).unwrap();
        assert_eq!(r.two_sided, 0.0);
        assert_eq!(r.observed_deviation, 0.0);
        let one = empirical_point_probability(&[1], 1.0, 0.5, 100, 2).unwrap();
        assert!(one.two_sided == 0.0 || one.two_sided == 1.0);
        assert!(empirical_point_probability(&[], 0.5, 0.1, 10, 0).is_err());
        assert!(empirical_point_probability(&[2], 0.5, 0.1, 10, 0).is_err());
    }

    #[test]
    fn bernoulli_half_stays_under_the_bound() {
        let mut rng = rng_for(77, &[]);
        let results: Vec<u8> = (0..1000).map(|_| rng.random_bool(0.5) as u8).collect();
        let r = empirical_point_probability(&results, 0.5, 0.05, 4000, 3).unwrap();
        let bound = 2.0 * (-5.0f64).exp();
        assert!(r.two_sided <= bound + 3.0 * (bound / 4000.0).sqrt());
        assert!(r.one_sided <= r.two_sided);
    }
}
