//! Distributions over the number of mixture components `K >= 1`, with
//! deterministic truncated summation for expectations.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng64;

/// Tail mass allowed beyond the truncation point.
const TAIL_TOL: f64 = 1e-12;
const MAX_SUPPORT: usize = 100_000;

/// A distribution on the number of components `K ∈ {1, 2, ...}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KDistribution {
    /// `K - 1 ~ Poisson(lambda)`.
    ShiftedPoisson { lambda: f64 },
    /// `P(K = k) = s (1-s)^(k-1)`.
    Geometric { s: f64 },
    /// Explicit pmf for `K = 1, 2, ..., probs.len()`.
    Explicit { probs: Vec<f64> },
}

impl KDistribution {
    pub fn validate(&self) -> Result<()> {
        match self {
            KDistribution::ShiftedPoisson { lambda } => {
                if *lambda <= 0.0 || !lambda.is_finite() {
                    return Err(Error::Argument(format!("lambda must be positive, got {lambda}")));
                }
            }
            KDistribution::Geometric { s } => {
                if !(*s > 0.0 && *s < 1.0) {
                    return Err(Error::Argument(format!("s must lie in (0,1), got {s}")));
                }
            }
            KDistribution::Explicit { probs } => {
                if probs.is_empty() {
                    return Err(Error::Argument("empty explicit pmf".into()));
                }
                if probs.iter().any(|&q| q < 0.0 || !q.is_finite()) {
                    return Err(Error::Argument("pmf entries must be nonnegative".into()));
                }
                let mass: f64 = probs.iter().sum();
                if (mass - 1.0).abs() > 1e-10 {
                    return Err(Error::Argument(format!(
                        "explicit pmf must sum to 1 within 1e-10, got {mass}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Truncated pmf over `K = 1..=k_max` with total mass `>= 1 - 1e-12`.
    /// Returns the probabilities and the truncation point `k_max`.
    pub fn truncated(&self) -> Result<(Vec<f64>, usize)> {
        self.validate()?;
        match self {
            KDistribution::ShiftedPoisson { lambda } => {
                let mut probs = Vec::new();
                let mut q = (-lambda).exp(); // P(K=1) = P(Poisson = 0)
                let mut mass = 0.0;
                for k in 1..=MAX_SUPPORT {
                    probs.push(q);
                    mass += q;
                    if 1.0 - mass <= TAIL_TOL {
                        break;
                    }
                    q *= lambda / k as f64;
                }
                let k_max = probs.len();
                Ok((probs, k_max))
            }
            KDistribution::Geometric { s } => {
                let k_max = ((TAIL_TOL.ln() / (1.0 - s).ln()).ceil() as usize).max(1);
                let k_max = k_max.min(MAX_SUPPORT);
                let probs: Vec<f64> =
                    (1..=k_max).map(|k| s * (1.0 - s).powi(k as i32 - 1)).collect();
                Ok((probs, k_max))
            }
            KDistribution::Explicit { probs } => Ok((probs.clone(), probs.len())),
        }
    }

    /// Expectation of `f(K)` by truncated summation. The neglected tail
    /// contributes at most `1e-12 * sup|f|`.
    pub fn expect(&self, f: impl Fn(usize) -> f64) -> Result<f64> {
        let (probs, _) = self.truncated()?;
        Ok(probs
            .iter()
            .enumerate()
            .map(|(i, &q)| q * f(i + 1))
            .sum())
    }

    /// Draw `K` by inverse CDF over the truncated support.
    pub fn sample(&self, rng: &mut Rng64) -> Result<usize> {
        let (probs, k_max) = self.truncated()?;
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, &q) in probs.iter().enumerate() {
            acc += q;
            if u < acc {
                return Ok(i + 1);
            }
        }
        Ok(k_max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn truncation_keeps_mass() {
        for dist in [
            KDistribution::ShiftedPoisson { lambda: 2.5569 },
            KDistribution::Geometric { s: 0.2847 },
            KDistribution::Explicit { probs: vec![0.25, 0.5, 0.25] },
        ] {
            let (probs, k_max) = dist.truncated().unwrap();
            let mass: f64 = probs.iter().sum();
            assert!(mass >= 1.0 - 1e-10, "{dist:?} mass {mass}");
            assert_eq!(probs.len(), k_max);
        }
    }

    #[test]
    fn geometric_inverse_moment() {
        // E[1/K] for Geometric(s) is -s ln(s) / (1-s).
        let s = 0.2847;
        let dist = KDistribution::Geometric { s };
        let closed = -s * s.ln() / (1.0 - s);
        let summed = dist.expect(|k| 1.0 / k as f64).unwrap();
        assert_abs_diff_eq!(summed, closed, epsilon = 1e-10);
        assert_abs_diff_eq!(summed, 0.5, epsilon = 1e-3);
    }

    #[test]
    fn shifted_poisson_inverse_moment() {
        // E[1/(Z+2)] for Z ~ Poisson(lambda) is (lambda - 1 + e^-lambda)/lambda^2.
        let lambda = 2.5569;
        let dist = KDistribution::ShiftedPoisson { lambda };
        let closed = (lambda - 1.0 + (-lambda).exp()) / (lambda * lambda);
        let summed = dist.expect(|k| 1.0 / (k as f64 + 1.0)).unwrap();
        assert_abs_diff_eq!(summed, closed, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(KDistribution::ShiftedPoisson { lambda: 0.0 }.validate().is_err());
        assert!(KDistribution::Geometric { s: 1.0 }.validate().is_err());
        assert!(KDistribution::Explicit { probs: vec![0.7, 0.7] }.validate().is_err());
    }
}
