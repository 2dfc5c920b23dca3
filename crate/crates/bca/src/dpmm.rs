//! Collapsed Gibbs sampler for a Dirichlet-process mixture of univariate
//! normals with a conjugate normal–inverse-gamma base measure.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use riskcal_core::error::{Error, Result};
use riskcal_core::estimator::CoClustering;
use riskcal_core::model::Partition;
use riskcal_core::rng::rng_from_seed;

/// Normal–inverse-gamma base measure: μ ~ N(m0, σ²/k0), σ² ~ IG(a0, b0).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NigBase {
    pub m0: f64,
    pub k0: f64,
    pub a0: f64,
    pub b0: f64,
}

impl NigBase {
    /// Empirical-Bayes defaults: location at the data mean, a nearly flat
    /// mean (k0 = 0.01), and prior scale matched to the data variance.
    pub fn empirical(data: &[f64]) -> Self {
        let n = data.len() as f64;
        let mean = data.iter().sum::<f64>() / n;
        let var = data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        Self { m0: mean, k0: 0.01, a0: 2.0, b0: var.max(1e-12) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k0 > 0.0 && self.a0 > 0.0 && self.b0 > 0.0 && self.m0.is_finite() {
            Ok(())
        } else {
            Err(Error::Argument(format!("invalid base measure {self:?}")))
        }
    }
}

/// Sampler configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpmmConfig {
    /// CRP concentration.
    pub theta: f64,
    pub base: NigBase,
    /// Total Gibbs sweeps, including burn-in.
    pub iterations: usize,
    pub burn_in: usize,
    /// Record every `thinning`-th sweep after burn-in.
    pub thinning: usize,
    pub seed: u64,
    /// Replace every likelihood term by 1, so draws target the CRP prior.
    #[serde(default)]
    pub prior_only: bool,
}

impl DpmmConfig {
    /// Desk-scale defaults: 20k sweeps, 5k burn-in, thinning 5.
    pub fn desk_scale(theta: f64, base: NigBase, seed: u64) -> Self {
        Self { theta, base, iterations: 20_000, burn_in: 5_000, thinning: 5, seed, prior_only: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta <= 0.0 || !self.theta.is_finite() {
            return Err(Error::Argument(format!("theta must be positive, got {}", self.theta)));
        }
        if self.iterations <= self.burn_in {
            return Err(Error::Argument("iterations must exceed burn-in".into()));
        }
        if self.thinning < 1 {
            return Err(Error::Argument("thinning must be at least 1".into()));
        }
        self.base.validate()
    }

    fn summary(&self) -> String {
        format!(
            "theta={},iters={},burnin={},thin={},prior_only={}",
            self.theta, self.iterations, self.burn_in, self.thinning, self.prior_only
        )
    }
}

/// Where a draw set came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Sampler { config: String, seed: u64 },
    File { path: String },
}

/// Posterior partition draws, all canonical and of one `p`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartitionDrawSet {
    draws: Vec<Partition>,
    provenance: Provenance,
}

impl PartitionDrawSet {
    pub fn new(draws: Vec<Partition>, provenance: Provenance) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::Argument("empty draw set".into()));
        }
        let p = draws[0].n_items();
        if draws.iter().any(|z| z.n_items() != p) {
            return Err(Error::Argument("draws must share one p".into()));
        }
        Ok(Self { draws, provenance })
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let posterior = riskcal_core::estimator::PartitionPosterior::from_csv(path)?;
        Self::new(
            posterior.draws().to_vec(),
            Provenance::File { path: path.display().to_string() },
        )
    }

    pub fn draws(&self) -> &[Partition] {
        &self.draws
    }

    pub fn into_draws(self) -> Vec<Partition> {
        self.draws
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn p(&self) -> usize {
        self.draws[0].n_items()
    }

    pub fn to_csv(&self, path: &std::path::Path) -> Result<()> {
        riskcal_core::estimator::PartitionPosterior::new(self.draws.clone())?.to_csv(path)
    }
}

/// Empirical co-clustering frequencies of a draw set.
pub fn coclustering_matrix(draws: &PartitionDrawSet) -> CoClustering {
    CoClustering::from_draws(draws.draws()).expect("validated draw set")
}

/// Sufficient statistics of one cluster with cached posterior-predictive
/// parameters.
#[derive(Clone, Debug)]
struct ClusterStat {
    n: usize,
    sum: f64,
    sumsq: f64,
    // cached Student-t predictive: location, log-scale constant, df terms
    loc: f64,
    inv_nu_s2: f64,
    log_norm: f64,
    half_nu_plus: f64,
}

impl ClusterStat {
    fn empty(base: &NigBase) -> Self {
        let mut stat =
            Self { n: 0, sum: 0.0, sumsq: 0.0, loc: 0.0, inv_nu_s2: 0.0, log_norm: 0.0, half_nu_plus: 0.0 };
        stat.refresh(base);
        stat
    }

    fn add(&mut self, x: f64, base: &NigBase) {
        self.n += 1;
        self.sum += x;
        self.sumsq += x * x;
        self.refresh(base);
    }

    fn removed(&mut self, x: f64, base: &NigBase) {
        self.n -= 1;
        self.sum -= x;
        self.sumsq -= x * x;
        self.refresh(base);
    }

    /// Recompute the posterior-predictive Student-t parameters:
    /// ν = 2 a_n, location m_n, scale² = b_n (k_n + 1) / (a_n k_n).
    fn refresh(&mut self, base: &NigBase) {
        let n = self.n as f64;
        let k_n = base.k0 + n;
        let m_n = (base.k0 * base.m0 + self.sum) / k_n;
        let a_n = base.a0 + 0.5 * n;
        let ss = if self.n > 0 { (self.sumsq - self.sum * self.sum / n).max(0.0) } else { 0.0 };
        let b_n = base.b0
            + 0.5 * ss
            + if self.n > 0 {
                0.5 * base.k0 * n * (self.sum / n - base.m0).powi(2) / k_n
            } else {
                0.0
            };
        let nu = 2.0 * a_n;
        let s2 = b_n * (k_n + 1.0) / (a_n * k_n);
        self.loc = m_n;
        self.inv_nu_s2 = 1.0 / (nu * s2);
        self.half_nu_plus = 0.5 * (nu + 1.0);
        self.log_norm = ln_gamma(0.5 * (nu + 1.0))
            - ln_gamma(0.5 * nu)
            - 0.5 * (nu * std::f64::consts::PI * s2).ln();
    }

    fn log_predictive(&self, x: f64) -> f64 {
        let z = x - self.loc;
        self.log_norm - self.half_nu_plus * (1.0 + z * z * self.inv_nu_s2).ln()
    }
}

/// Run the collapsed Gibbs sampler. Each sweep reassigns every item given
/// the rest, with existing-cluster weight n_l · m_l(x_i) and new-cluster
/// weight θ · m_0(x_i); draws are recorded after burn-in at the thinning
/// stride. Deterministic given the seed.
pub fn dpmm_sample(data: &[f64], cfg: &DpmmConfig) -> Result<PartitionDrawSet> {
    cfg.validate()?;
    if data.len() < 2 {
        return Err(Error::Argument("need at least 2 data points".into()));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::Argument("non-finite data".into()));
    }
    let p = data.len();
    let base = cfg.base;
    let mut rng = rng_from_seed(cfg.seed);

    // Start from singletons: coalescing through single-item moves is easy,
    // while splitting a large mixed cluster is a rare event.
    let empty_stat = ClusterStat::empty(&base);
    let mut labels: Vec<usize> = (0..p).collect();
    let mut clusters: Vec<ClusterStat> = data
        .iter()
        .map(|&x| {
            let mut stat = ClusterStat::empty(&base);
            stat.add(x, &base);
            stat
        })
        .collect();

    let mut draws = Vec::new();
    let mut weights: Vec<f64> = Vec::with_capacity(p + 1);
    for sweep in 0..cfg.iterations {
        for i in 0..p {
            let x = data[i];
            // Detach item i.
            let old = labels[i];
            clusters[old].removed(x, &base);
            if clusters[old].n == 0 {
                let last = clusters.len() - 1;
                clusters.swap_remove(old);
                if old != last {
                    for l in labels.iter_mut() {
                        if *l == last {
                            *l = old;
                        }
                    }
                }
            }
            // Allocation weights in log domain.
            weights.clear();
            let mut max = f64::NEG_INFINITY;
            for stat in &clusters {
                let lw = (stat.n as f64).ln()
                    + if cfg.prior_only { 0.0 } else { stat.log_predictive(x) };
                weights.push(lw);
                max = max.max(lw);
            }
            let new_lw =
                cfg.theta.ln() + if cfg.prior_only { 0.0 } else { empty_stat.log_predictive(x) };
            weights.push(new_lw);
            max = max.max(new_lw);
            let mut total = 0.0;
            for w in weights.iter_mut() {
                *w = (*w - max).exp();
                total += *w;
            }
            let mut u = rng.gen::<f64>() * total;
            let mut choice = weights.len() - 1;
            for (c, &w) in weights.iter().enumerate() {
                if u < w {
                    choice = c;
                    break;
                }
                u -= w;
            }
            if choice == clusters.len() {
                clusters.push(ClusterStat::empty(&base));
            }
            clusters[choice].add(x, &base);
            labels[i] = choice;
        }
        if sweep >= cfg.burn_in && (sweep - cfg.burn_in).is_multiple_of(cfg.thinning) {
            let canonical: Vec<u64> = labels.iter().map(|&l| l as u64 + 1).collect();
            draws.push(Partition::from_labels(&canonical)?);
        }
    }
    PartitionDrawSet::new(
        draws,
        Provenance::Sampler { config: cfg.summary(), seed: cfg.seed },
    )
}
