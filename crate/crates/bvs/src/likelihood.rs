//! Marginal likelihoods for the normal linear model under a g-prior on the
//! selected coefficients, with the intercept and noise variance handled by
//! centering, and exact posterior enumeration over the hypercube.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use riskcal_core::error::{Error, Result};
use riskcal_core::estimator::GammaPosterior;
use riskcal_core::model::{enumerate_gamma, GammaVector, Model};
use riskcal_core::prior::PriorSpec;

/// A regression dataset: `n x p` design matrix and length-`n` response.
#[derive(Clone, Debug)]
pub struct LinearDataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl LinearDataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() < 3 {
            return Err(Error::Argument(format!(
                "need at least 3 observations, got {}",
                x.nrows()
            )));
        }
        if x.nrows() != y.len() {
            return Err(Error::Argument(format!(
                "design has {} rows but response has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("non-finite entries in dataset".into()));
        }
        Ok(Self { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }
}

/// Marginal-likelihood treatment of the model coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LikelihoodConfig {
    /// Fixed-g Zellner prior; `g = n` is the unit-information default.
    GPrior { g: f64 },
    /// Heavy-tailed mixture: inverse-gamma(1/2, n/2) on g, integrated by
    /// exp-sinh quadrature in log domain.
    ZellnerSiow { nodes: usize },
}

impl LikelihoodConfig {
    pub fn unit_information(n: usize) -> Self {
        LikelihoodConfig::GPrior { g: n as f64 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LikelihoodConfig::GPrior { g } => {
                if *g > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Argument(format!("g must be positive, got {g}")))
                }
            }
            LikelihoodConfig::ZellnerSiow { nodes } => {
                if *nodes >= 32 {
                    Ok(())
                } else {
                    Err(Error::Argument(format!("need at least 32 quadrature nodes, got {nodes}")))
                }
            }
        }
    }
}

/// Centered response and design with the total sum of squares, shared by
/// every model evaluation on one dataset.
pub struct CenteredData {
    x: DMatrix<f64>,
    y: DVector<f64>,
    tss: f64,
    n: usize,
}

impl CenteredData {
    pub fn new(data: &LinearDataset) -> Self {
        let n = data.n();
        let y_mean = data.y.mean();
        let y: DVector<f64> = data.y.map(|v| v - y_mean);
        let mut x = data.x.clone();
        for j in 0..x.ncols() {
            let mean = x.column(j).mean();
            for i in 0..n {
                x[(i, j)] -= mean;
            }
        }
        let tss = y.norm_squared();
        Self { x, y, tss, n }
    }

    /// Coefficient of determination of the selected columns, with rank
    /// deficiency collapsed to the achievable subspace.
    pub fn r_squared(&self, gamma: &GammaVector) -> (f64, bool) {
        if gamma.size() == 0 || self.tss <= 0.0 {
            return (0.0, false);
        }
        let cols: Vec<usize> = gamma.support().collect();
        let sub = self.x.select_columns(cols.iter());
        let svd = sub.clone().svd(true, true);
        let sigma_max = svd.singular_values.max();
        let eps = sigma_max * (self.n.max(cols.len()) as f64) * f64::EPSILON;
        let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
        let beta = svd.solve(&self.y, eps).expect("svd least squares");
        let rss = (&self.y - sub * beta).norm_squared();
        let r2 = (1.0 - rss / self.tss).clamp(0.0, 1.0);
        (r2, rank < cols.len())
    }
}

/// Log Bayes factor of `gamma` against the null model under a fixed g.
fn log_bf_fixed_g(n: usize, size: usize, r2: f64, g: f64) -> f64 {
    let nf = n as f64;
    0.5 * (nf - 1.0 - size as f64) * (1.0 + g).ln() - 0.5 * (nf - 1.0) * (1.0 + g * (1.0 - r2)).ln()
}

/// Log density of the inverse-gamma(1/2, n/2) mixing law at g.
fn log_ig_density(g: f64, n: usize) -> f64 {
    let b = n as f64 / 2.0;
    0.5 * b.ln() - ln_gamma(0.5) - 1.5 * g.ln() - b / g
}

/// Outcome of one marginal-likelihood evaluation.
#[derive(Clone, Copy, Debug)]
pub struct LogMarginal {
    /// log BF(γ : null); `-inf` when the model exceeds the size guard.
    pub value: f64,
    /// Selected columns were collinear; fit used the achievable subspace.
    pub rank_deficient: bool,
}

/// Log marginal likelihood of a model, normalized so the null model is 0.
/// Models with more than `n - 3` variables are excluded with `-inf`.
pub fn log_marginal(
    data: &LinearDataset,
    gamma: &GammaVector,
    cfg: &LikelihoodConfig,
) -> Result<f64> {
    Ok(log_marginal_centered(&CenteredData::new(data), gamma, cfg)?.value)
}

pub fn log_marginal_centered(
    centered: &CenteredData,
    gamma: &GammaVector,
    cfg: &LikelihoodConfig,
) -> Result<LogMarginal> {
    cfg.validate()?;
    let n = centered.n;
    let size = gamma.size();
    if size == 0 {
        return Ok(LogMarginal { value: 0.0, rank_deficient: false });
    }
    if size + 3 > n {
        return Ok(LogMarginal { value: f64::NEG_INFINITY, rank_deficient: false });
    }
    let (r2, rank_deficient) = centered.r_squared(gamma);
    let value = match cfg {
        LikelihoodConfig::GPrior { g } => log_bf_fixed_g(n, size, r2, *g),
        LikelihoodConfig::ZellnerSiow { nodes } => {
            // exp-sinh: g = exp(pi/2 sinh v) turns the algebraic tail of the
            // integrand into double-exponential decay, so the trapezoid rule
            // over v converges rapidly even when R^2 is close to 1.
            let half_pi = std::f64::consts::FRAC_PI_2;
            let (lo, hi) = (-4.0, 4.0);
            let h = (hi - lo) / (*nodes as f64 - 1.0);
            let mut terms = Vec::with_capacity(*nodes);
            for k in 0..*nodes {
                let v: f64 = lo + k as f64 * h;
                let g = (half_pi * v.sinh()).exp();
                let log_weight = (h * half_pi * v.cosh()).ln() + (half_pi * v.sinh());
                terms.push(log_bf_fixed_g(n, size, r2, g) + log_ig_density(g, n) + log_weight);
            }
            log_sum_exp(&terms)
        }
    };
    Ok(LogMarginal { value, rank_deficient })
}

pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Exact posterior over all 2^p models by log-sum-exp normalization.
pub fn enumerate_posterior(
    data: &LinearDataset,
    prior: &PriorSpec,
    cfg: &LikelihoodConfig,
) -> Result<GammaPosterior> {
    let p = data.p();
    if p > 20 {
        return Err(Error::Capacity(format!(
            "posterior enumeration requires p <= 20, got {p}"
        )));
    }
    let centered = CenteredData::new(data);
    let models: Vec<GammaVector> = enumerate_gamma(p)?.collect();
    let log_bf: Vec<f64> = models
        .iter()
        .map(|m| Ok(log_marginal_centered(&centered, m, cfg)?.value))
        .collect::<Result<Vec<f64>>>()?;
    posterior_from_log_bf(&models, &log_bf, prior)
}

/// Combine precomputed log Bayes factors with a model prior.
pub fn posterior_from_log_bf(
    models: &[GammaVector],
    log_bf: &[f64],
    prior: &PriorSpec,
) -> Result<GammaPosterior> {
    let log_post: Vec<f64> = models
        .iter()
        .zip(log_bf)
        .map(|(m, &bf)| {
            let pmf = prior.pmf(&Model::Gamma(*m))?;
            Ok(if pmf == 0.0 || bf.is_infinite() {
                f64::NEG_INFINITY
            } else {
                pmf.ln() + bf
            })
        })
        .collect::<Result<_>>()?;
    let norm = log_sum_exp(&log_post);
    if norm.is_infinite() {
        return Err(Error::Argument(
            "degenerate posterior: every model was excluded".into(),
        ));
    }
    let probs: Vec<f64> = log_post.iter().map(|lp| (lp - norm).exp()).collect();
    let total: f64 = probs.iter().sum();
    GammaPosterior::new(models.to_vec(), probs.iter().map(|q| q / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn toy_dataset() -> LinearDataset {
        // n = 8, p = 2, moderate signal on the first column.
        let x = DMatrix::from_row_slice(
            8,
            2,
            &[
                0.5, -1.2, //
                -0.3, 0.7, //
                1.8, 0.2, //
                -0.9, -0.4, //
                0.1, 1.5, //
                -1.4, -0.8, //
                0.7, 0.3, //
                -0.5, -0.3,
            ],
        );
        let y = DVector::from_row_slice(&[1.2, -0.8, 3.4, -1.7, 0.4, -2.9, 1.5, -1.1]);
        LinearDataset::new(x, y).unwrap()
    }

    #[test]
    fn null_model_is_normalized_to_zero() {
        let data = toy_dataset();
        let null = GammaVector::null(2);
        for cfg in [
            LikelihoodConfig::GPrior { g: 8.0 },
            LikelihoodConfig::ZellnerSiow { nodes: 64 },
        ] {
            assert_eq!(log_marginal(&data, &null, &cfg).unwrap(), 0.0);
        }
    }

    #[test]
    fn zero_fit_gain_is_penalized() {
        // R^2 = 0 gives ((n-1-s)/2 - (n-1)/2) log(1+g) < 0.
        let n = 8;
        let g = 8.0;
        let v = log_bf_fixed_g(n, 1, 0.0, g);
        assert_abs_diff_eq!(v, -0.5 * (1.0 + g).ln(), epsilon = 1e-12);
        assert!(v < 0.0);
    }

    #[test]
    fn zellner_siow_matches_trapezoid_oracle() {
        // Independent oracle: fine-grid trapezoid over v = log g, a
        // different change of variables, with 2^20 intervals.
        let data = toy_dataset();
        let centered = CenteredData::new(&data);
        let cfg = LikelihoodConfig::ZellnerSiow { nodes: 128 };
        for gamma in ["10", "01", "11"] {
            let gamma: GammaVector = gamma.parse().unwrap();
            let fast = log_marginal_centered(&centered, &gamma, &cfg).unwrap().value;
            let (r2, _) = centered.r_squared(&gamma);
            let n = data.n();
            let m: usize = 1 << 20;
            let (lo, hi) = (-30.0f64, 80.0f64);
            let h = (hi - lo) / m as f64;
            let f = |v: f64| -> f64 {
                let g = v.exp();
                // integrand dg = integrand * g dv, accumulated in logs
                let log_term = log_bf_fixed_g(n, gamma.size(), r2, g) + log_ig_density(g, n) + v;
                log_term.exp()
            };
            let mut total = 0.5 * (f(lo) + f(hi));
            for i in 1..m {
                total += f(lo + i as f64 * h);
            }
            let slow = (total * h).ln();
            assert_abs_diff_eq!(fast, slow, epsilon = 1e-6);
        }
    }

    #[test]
    fn size_guard_excludes_models() {
        let data = toy_dataset();
        // n = 8 allows at most 5 variables; build a wider dataset to test.
        let x = DMatrix::from_fn(5, 4, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let y = DVector::from_fn(5, |i, _| i as f64 - 2.0);
        let wide = LinearDataset::new(x, y).unwrap();
        let cfg = LikelihoodConfig::GPrior { g: 5.0 };
        let too_big: GammaVector = "1110".parse().unwrap();
        assert_eq!(
            log_marginal(&wide, &too_big, &cfg).unwrap(),
            f64::NEG_INFINITY
        );
        let ok: GammaVector = "1100".parse().unwrap();
        assert!(log_marginal(&wide, &ok, &cfg).unwrap().is_finite());
        drop(data);
    }

    #[test]
    fn duplicated_column_is_occams_razor() {
        // Identical fit with one more parameter loses log marginal mass.
        let base = toy_dataset();
        let mut x = DMatrix::zeros(8, 3);
        x.set_column(0, &base.x().column(0));
        x.set_column(1, &base.x().column(1));
        x.set_column(2, &base.x().column(0)); // duplicate
        let data = LinearDataset::new(x, base.y().clone()).unwrap();
        let cfg = LikelihoodConfig::GPrior { g: 8.0 };
        let centered = CenteredData::new(&data);
        let small = log_marginal_centered(&centered, &"100".parse().unwrap(), &cfg).unwrap();
        let big = log_marginal_centered(&centered, &"101".parse().unwrap(), &cfg).unwrap();
        assert!(big.value < small.value);
        assert!(big.rank_deficient);
        assert!(!small.rank_deficient);
    }

    #[test]
    fn scaling_response_leaves_posterior_unchanged() {
        let data = toy_dataset();
        let scaled = LinearDataset::new(data.x().clone(), data.y() * 3.7).unwrap();
        let prior = PriorSpec::BetaBinomial { a_omega: 1.0, b_omega: 1.0 };
        let cfg = LikelihoodConfig::GPrior { g: 8.0 };
        let a = enumerate_posterior(&data, &prior, &cfg).unwrap();
        let b = enumerate_posterior(&scaled, &prior, &cfg).unwrap();
        for ((_, pa), (_, pb)) in a.entries().zip(b.entries()) {
            assert_abs_diff_eq!(pa, pb, epsilon = 1e-9);
        }
    }

    #[test]
    fn point_mass_prior_gives_point_mass_posterior() {
        use riskcal_core::prior::TablePrior;
        let data = toy_dataset();
        let models: Vec<Model> = enumerate_gamma(2).unwrap().map(Model::Gamma).collect();
        let table = TablePrior::new(models, vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let posterior = enumerate_posterior(
            &data,
            &PriorSpec::Table(table),
            &LikelihoodConfig::GPrior { g: 8.0 },
        )
        .unwrap();
        let probs: Vec<f64> = posterior.entries().map(|(_, q)| q).collect();
        assert_abs_diff_eq!(probs[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_posterior_is_an_error() {
        use riskcal_core::prior::TablePrior;
        // n = 5 admits at most 2 variables; a prior concentrated on the
        // excluded full model leaves nothing to normalize.
        let x = DMatrix::from_fn(5, 3, |i, j| ((i * 5 + j * 2) % 7) as f64 - 3.0);
        let y = DVector::from_fn(5, |i, _| i as f64);
        let data = LinearDataset::new(x, y).unwrap();
        let models: Vec<Model> = enumerate_gamma(3).unwrap().map(Model::Gamma).collect();
        let mut probs = vec![0.0; 8];
        probs[7] = 1.0; // the all-ones model
        let prior = PriorSpec::Table(TablePrior::new(models, probs).unwrap());
        let err = enumerate_posterior(&data, &prior, &LikelihoodConfig::GPrior { g: 5.0 })
            .unwrap_err();
        assert!(err.to_string().contains("degenerate"), "{err}");
    }

    #[test]
    fn inclusion_probabilities_are_table_sums() {
        let data = toy_dataset();
        let posterior = enumerate_posterior(
            &data,
            &PriorSpec::UniformGamma,
            &LikelihoodConfig::GPrior { g: 8.0 },
        )
        .unwrap();
        let q = posterior.inclusion_probabilities();
        for (i, &qi) in q.iter().enumerate() {
            let direct: f64 = posterior
                .entries()
                .filter(|(m, _)| m.bit(i))
                .map(|(_, prob)| prob)
                .sum();
            assert_abs_diff_eq!(qi, direct, epsilon = 1e-12);
        }
    }
}
