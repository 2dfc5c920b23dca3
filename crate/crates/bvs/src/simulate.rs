//! Synthetic-data generation and the replicated variable-selection study:
//! Hamming distances to a reference Bayes estimator and model sizes,
//! averaged over replicates, across a prior grid and a loss grid.

use nalgebra::{DMatrix, DVector};
use rand::distributions::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::Normal;

use riskcal_core::error::{Error, Result};
use riskcal_core::estimator::{highest_probability_model, quantile_probability_model};
use riskcal_core::loss::LossSpec;
use riskcal_core::model::GammaVector;
use riskcal_core::prior::PriorSpec;
use riskcal_core::rng::{child_seed, rng_from_seed, Rng64};

use crate::likelihood::{
    log_marginal_centered, posterior_from_log_bf, CenteredData, LikelihoodConfig, LinearDataset,
};

/// Draw a dataset with i.i.d. standard-normal design entries and
/// y = Xβ + ε, ε i.i.d. normal(0, σ²).
pub fn simulate_dataset(
    n: usize,
    p: usize,
    beta: &[f64],
    sigma2: f64,
    rng: &mut Rng64,
) -> Result<LinearDataset> {
    if beta.len() != p {
        return Err(Error::Argument(format!(
            "beta has {} entries but p = {p}",
            beta.len()
        )));
    }
    if sigma2 < 0.0 {
        return Err(Error::Argument("noise variance must be nonnegative".into()));
    }
    let std_normal = Normal::new(0.0, 1.0).expect("valid normal");
    let x = DMatrix::from_fn(n, p, |_, _| std_normal.sample(rng));
    let noise_sd = sigma2.sqrt();
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let mut v = 0.0;
        for j in 0..p {
            v += x[(i, j)] * beta[j];
        }
        y[i] = v + noise_sd * std_normal.sample(rng);
    }
    LinearDataset::new(x, y)
}

/// Full specification of one simulation study.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n: usize,
    pub p: usize,
    pub beta: Vec<f64>,
    pub sigma2: f64,
    pub replicates: usize,
    pub priors: Vec<PriorSpec>,
    pub losses: Vec<LossSpec>,
    /// Indices into `priors` / `losses` of the reference Bayes estimator.
    pub reference_prior: usize,
    pub reference_loss: usize,
    pub likelihood: LikelihoodConfig,
    pub master_seed: u64,
}

impl SimulationConfig {
    /// Desk-scale defaults mirroring the study layout: seven generalized
    /// Hamming weights plus zero-one, matched beta-binomial priors plus
    /// uniform, reference at the symmetric pair.
    pub fn desk_scale(n: usize, seed: u64) -> Self {
        let p = 10;
        let mut beta = vec![0.0; p];
        for (j, b) in beta.iter_mut().enumerate().take(6) {
            *b = if j < 3 { 1.0 } else { -1.0 };
        }
        let weights = [0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3];
        // Keep the complementary shape on the same one-decimal grid.
        let mut priors: Vec<PriorSpec> = weights
            .iter()
            .map(|&a| PriorSpec::BetaBinomial {
                a_omega: a,
                b_omega: ((2.0 - a) * 10.0).round() / 10.0,
            })
            .collect();
        priors.push(PriorSpec::UniformGamma);
        let mut losses: Vec<LossSpec> = weights.iter().map(|&a| LossSpec::Gh { a }).collect();
        losses.push(LossSpec::ZeroOne);
        SimulationConfig {
            n,
            p,
            beta,
            sigma2: 9.0,
            replicates: 200,
            priors,
            losses,
            reference_prior: 3,
            reference_loss: 3,
            likelihood: LikelihoodConfig::GPrior { g: n as f64 },
            master_seed: seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < 1 {
            return Err(Error::Argument("need at least one replicate".into()));
        }
        if self.beta.len() != self.p {
            return Err(Error::Argument("beta length must equal p".into()));
        }
        if self.reference_prior >= self.priors.len() || self.reference_loss >= self.losses.len() {
            return Err(Error::Argument("reference pair must index the grids".into()));
        }
        for prior in &self.priors {
            prior.validate()?;
            if prior.space() != riskcal_core::model::SpaceKind::Hypercube {
                return Err(Error::Argument(format!("{prior} is not a hypercube prior")));
            }
        }
        for loss in &self.losses {
            if !matches!(loss, LossSpec::Gh { .. } | LossSpec::ZeroOne) {
                return Err(Error::Argument(format!(
                    "simulation losses must be GH(a) or zero-one, got {loss}"
                )));
            }
        }
        self.likelihood.validate()
    }
}

pub use riskcal_core::report::ReportTable;

/// Simulation outputs: Hamming distance to the reference estimator and
/// model size, as mean/SE tables over replicates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulationReport {
    pub distance: ReportTable,
    pub size: ReportTable,
}

/// Run the replicated study. Replicates execute in parallel on split seeds
/// and the result is deterministic given the master seed.
pub fn run_simulation(cfg: &SimulationConfig) -> Result<SimulationReport> {
    cfg.validate()?;
    let n_losses = cfg.losses.len();
    let n_priors = cfg.priors.len();
    let models: Vec<GammaVector> = riskcal_core::model::enumerate_gamma(cfg.p)?.collect();

    let per_replicate: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            run_one_replicate(cfg, &models, child_seed(cfg.master_seed, r as u64))
                .map_err(|e| Error::Argument(format!("replicate {r}: {e}")))
        })
        .collect();

    let mut dist_acc = vec![vec![(0.0, 0.0); n_priors]; n_losses];
    let mut size_acc = vec![vec![(0.0, 0.0); n_priors]; n_losses];
    for rep in per_replicate {
        let (dist, size) = rep?;
        for li in 0..n_losses {
            for pi in 0..n_priors {
                let d = dist[li * n_priors + pi];
                let s = size[li * n_priors + pi];
                dist_acc[li][pi].0 += d;
                dist_acc[li][pi].1 += d * d;
                size_acc[li][pi].0 += s;
                size_acc[li][pi].1 += s * s;
            }
        }
    }

    let reps = cfg.replicates as f64;
    let finish = |acc: &Vec<Vec<(f64, f64)>>| -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut mean = vec![vec![0.0; n_priors]; n_losses];
        let mut se = vec![vec![0.0; n_priors]; n_losses];
        for li in 0..n_losses {
            for pi in 0..n_priors {
                let (sum, sumsq) = acc[li][pi];
                let m = sum / reps;
                let var = (sumsq / reps - m * m).max(0.0);
                mean[li][pi] = m;
                se[li][pi] = (var / reps).sqrt();
            }
        }
        (mean, se)
    };

    let row_names: Vec<String> = cfg.losses.iter().map(|l| l.name()).collect();
    let col_names: Vec<String> = cfg.priors.iter().map(|p| p.to_string()).collect();
    let (dist_mean, dist_se) = finish(&dist_acc);
    let (size_mean, size_se) = finish(&size_acc);
    Ok(SimulationReport {
        distance: ReportTable {
            row_names: row_names.clone(),
            col_names: col_names.clone(),
            mean: dist_mean,
            se: dist_se,
        },
        size: ReportTable { row_names, col_names, mean: size_mean, se: size_se },
    })
}

fn run_one_replicate(
    cfg: &SimulationConfig,
    models: &[GammaVector],
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rng = rng_from_seed(seed);
    let data = simulate_dataset(cfg.n, cfg.p, &cfg.beta, cfg.sigma2, &mut rng)?;
    let centered = CenteredData::new(&data);
    let log_bf: Vec<f64> = models
        .iter()
        .map(|m| Ok(log_marginal_centered(&centered, m, &cfg.likelihood)?.value))
        .collect::<Result<_>>()?;

    let n_priors = cfg.priors.len();
    let n_losses = cfg.losses.len();
    let mut estimates: Vec<GammaVector> = Vec::with_capacity(n_losses * n_priors);
    for prior in &cfg.priors {
        let posterior = posterior_from_log_bf(models, &log_bf, prior)?;
        let q = posterior.inclusion_probabilities();
        for loss in &cfg.losses {
            let estimate = match loss {
                LossSpec::Gh { a } => quantile_probability_model(&q, *a)?,
                LossSpec::ZeroOne => highest_probability_model(&posterior),
                other => {
                    return Err(Error::Argument(format!("unsupported simulation loss {other}")))
                }
            };
            estimates.push(estimate);
        }
    }
    // estimates is prior-major; tables are loss-major.
    let at = |li: usize, pi: usize| estimates[pi * n_losses + li];
    let reference = at(cfg.reference_loss, cfg.reference_prior);
    let mut dist = vec![0.0; n_losses * n_priors];
    let mut size = vec![0.0; n_losses * n_priors];
    for li in 0..n_losses {
        for pi in 0..n_priors {
            let est = at(li, pi);
            dist[li * n_priors + pi] = est.hamming(&reference) as f64;
            size[li * n_priors + pi] = est.size() as f64;
        }
    }
    Ok((dist, size))
}
