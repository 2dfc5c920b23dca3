//! Prior families over both model spaces: exact pmf evaluation, sampling,
//! marginal summaries, and hyperparameter calibration to a target summary.

mod kdist;

pub use kdist::KDistribution;

use std::fmt;
use std::path::Path;

use rand::distributions::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::{
    enumerate_partitions, stirling2, GammaVector, Model, Partition, SpaceKind,
};
use crate::quad::integrate_unit;
use crate::rng::Rng64;

/// Tagged prior family with hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "kebab-case")]
pub enum PriorSpec {
    /// Uniform on the hypercube.
    UniformGamma,
    /// Inclusion indicators i.i.d. Bernoulli(ω) with ω ~ Beta(a_ω, b_ω).
    BetaBinomial { a_omega: f64, b_omega: f64 },
    /// π(γ) ∝ p^(-κ|γ|) 1(|γ| <= s_max).
    TruncExpDecay { kappa: f64, s_max: usize },
    /// Uniform on the partition lattice.
    UniformPartition,
    /// Chinese restaurant process with concentration θ.
    Crp { theta: f64 },
    /// Two-parameter CRP with discount σ and concentration θ.
    Crp2 { sigma: f64, theta: f64 },
    /// Dirichlet-multinomial mixture: K ~ q_K, weights ~ Dirichlet_K(α),
    /// labels i.i.d. categorical.
    DirMult { alpha: f64, k: KDistribution },
    /// K ~ q_K, labels i.i.d. uniform on K symbols.
    BalanceNeutral { k: KDistribution },
    /// Explicit probability table over an enumerated support.
    Table(TablePrior),
}

impl PriorSpec {
    pub fn crp(theta: f64) -> Result<Self> {
        let spec = PriorSpec::Crp { theta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn crp2(sigma: f64, theta: f64) -> Result<Self> {
        let spec = PriorSpec::Crp2 { sigma, theta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn beta_binomial(a_omega: f64, b_omega: f64) -> Result<Self> {
        let spec = PriorSpec::BetaBinomial { a_omega, b_omega };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PriorSpec::UniformGamma | PriorSpec::UniformPartition => Ok(()),
            PriorSpec::BetaBinomial { a_omega, b_omega } => {
                if *a_omega > 0.0 && *b_omega > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Argument(format!(
                        "beta-binomial shapes must be positive, got ({a_omega}, {b_omega})"
                    )))
                }
            }
            PriorSpec::TruncExpDecay { kappa, s_max } => {
                if *kappa < 2.0 {
                    return Err(Error::Argument(format!("kappa must be >= 2, got {kappa}")));
                }
                if *s_max < 1 {
                    return Err(Error::Argument("s_max must be >= 1".into()));
                }
                Ok(())
            }
            PriorSpec::Crp { theta } => {
                if *theta > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Argument(format!("theta must be positive, got {theta}")))
                }
            }
            PriorSpec::Crp2 { sigma, theta } => {
                if !(*sigma > 0.0 && *sigma < 1.0) {
                    return Err(Error::Argument(format!("sigma must lie in (0,1), got {sigma}")));
                }
                if *theta <= -*sigma || !theta.is_finite() {
                    return Err(Error::Argument(format!(
                        "theta must exceed -sigma, got theta={theta}, sigma={sigma}"
                    )));
                }
                Ok(())
            }
            PriorSpec::DirMult { alpha, k } => {
                if *alpha <= 0.0 || !alpha.is_finite() {
                    return Err(Error::Argument(format!("alpha must be positive, got {alpha}")));
                }
                k.validate()
            }
            PriorSpec::BalanceNeutral { k } => k.validate(),
            PriorSpec::Table(t) => t.validate(),
        }
    }

    /// Which model space this family lives on.
    pub fn space(&self) -> SpaceKind {
        match self {
            PriorSpec::UniformGamma
            | PriorSpec::BetaBinomial { .. }
            | PriorSpec::TruncExpDecay { .. } => SpaceKind::Hypercube,
            PriorSpec::UniformPartition
            | PriorSpec::Crp { .. }
            | PriorSpec::Crp2 { .. }
            | PriorSpec::DirMult { .. }
            | PriorSpec::BalanceNeutral { .. } => SpaceKind::Partitions,
            PriorSpec::Table(t) => t.space,
        }
    }

    /// Prior marginal inclusion probability P(γ_i = 1), identical across
    /// coordinates for every supported family.
    pub fn marginal_inclusion(&self, p: usize) -> Result<f64> {
        self.validate()?;
        match self {
            PriorSpec::UniformGamma => Ok(0.5),
            PriorSpec::BetaBinomial { a_omega, b_omega } => Ok(a_omega / (a_omega + b_omega)),
            PriorSpec::TruncExpDecay { .. } => {
                let q = self.size_pmf(p)?;
                Ok(q.iter().enumerate().map(|(s, &qs)| s as f64 / p as f64 * qs).sum())
            }
            PriorSpec::Table(t) if t.space == SpaceKind::Hypercube => {
                let qs = self.marginal_inclusion_vec(p)?;
                let (lo, hi) = (
                    qs.iter().cloned().fold(f64::INFINITY, f64::min),
                    qs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                );
                if hi - lo > 1e-9 {
                    return Err(Error::Argument(format!(
                        "table prior is not exchangeable: inclusion probabilities span [{lo}, {hi}]"
                    )));
                }
                Ok(0.5 * (lo + hi))
            }
            _ => Err(Error::Argument(format!(
                "{self} is not a hypercube-space family"
            ))),
        }
    }

    /// Per-coordinate marginal inclusion probabilities (hypercube families).
    pub fn marginal_inclusion_vec(&self, p: usize) -> Result<Vec<f64>> {
        match self {
            PriorSpec::Table(t) if t.space == SpaceKind::Hypercube => {
                let mut q = vec![0.0; p];
                for (m, prob) in t.entries() {
                    let g = m.as_gamma()?;
                    if g.p() != p {
                        return Err(Error::Argument(format!(
                            "table prior has p={}, requested {p}",
                            g.p()
                        )));
                    }
                    for i in g.support() {
                        q[i] += prob;
                    }
                }
                Ok(q)
            }
            _ => Ok(vec![self.marginal_inclusion(p)?; p]),
        }
    }

    /// Prior co-clustering probability P(z_i = z_j), i ≠ j, for the
    /// closed-form exchangeable partition families.
    pub fn coclustering(&self) -> Result<f64> {
        self.validate()?;
        match self {
            PriorSpec::Crp { theta } => Ok(1.0 / (theta + 1.0)),
            PriorSpec::Crp2 { sigma, theta } => Ok((1.0 - sigma) / (theta + 1.0)),
            PriorSpec::DirMult { alpha, k } => {
                k.expect(|kk| (1.0 + alpha) / (alpha * kk as f64 + 1.0))
            }
            PriorSpec::BalanceNeutral { k } => k.expect(|kk| 1.0 / kk as f64),
            _ => Err(Error::Argument(format!(
                "{self} has no closed-form co-clustering probability"
            ))),
        }
    }

    /// Exact prior probability of a model. Models outside the support get 0.
    pub fn pmf(&self, m: &Model) -> Result<f64> {
        self.validate()?;
        if self.space() != m.space() {
            return Err(Error::Argument(format!(
                "model space mismatch: prior {self} vs model {m}"
            )));
        }
        match self {
            PriorSpec::UniformGamma => Ok(0.5f64.powi(m.p() as i32)),
            PriorSpec::BetaBinomial { a_omega, b_omega } => {
                let g = m.as_gamma()?;
                let (p, s) = (g.p() as f64, g.size() as f64);
                Ok((ln_beta(a_omega + s, b_omega + p - s) - ln_beta(*a_omega, *b_omega)).exp())
            }
            PriorSpec::TruncExpDecay { .. } => {
                let g = m.as_gamma()?;
                let q = self.size_pmf(g.p())?;
                let s = g.size();
                if s >= q.len() || q[s] == 0.0 {
                    return Ok(0.0);
                }
                Ok(q[s] / binomial(g.p(), s))
            }
            PriorSpec::UniformPartition => {
                let z = m.as_partition()?;
                let bell = crate::model::bell_numbers(z.n_items());
                Ok(1.0 / bell[z.n_items()] as f64)
            }
            PriorSpec::Crp { theta } => {
                let z = m.as_partition()?;
                let mut log_p = (z.n_clusters() as f64 - 1.0) * theta.ln();
                for n_l in z.cluster_sizes() {
                    log_p += ln_gamma(n_l as f64);
                }
                for i in 1..z.n_items() {
                    log_p -= (theta + i as f64).ln();
                }
                Ok(log_p.exp())
            }
            PriorSpec::Crp2 { sigma, theta } => {
                let z = m.as_partition()?;
                let mut log_p = 0.0;
                for l in 1..z.n_clusters() {
                    log_p += (theta + l as f64 * sigma).ln();
                }
                for n_l in z.cluster_sizes() {
                    for m_i in 1..n_l {
                        log_p += (m_i as f64 - sigma).ln();
                    }
                }
                for i in 1..z.n_items() {
                    log_p -= (theta + i as f64).ln();
                }
                Ok(log_p.exp())
            }
            PriorSpec::DirMult { alpha, k } => {
                let z = m.as_partition()?;
                let (p, kk) = (z.n_items(), z.n_clusters());
                let sizes = z.cluster_sizes();
                k.expect(|big_k| {
                    if big_k < kk {
                        return 0.0;
                    }
                    let bk = big_k as f64;
                    let mut log_p = ln_gamma(bk * alpha) - ln_gamma(bk * alpha + p as f64);
                    // K (K-1) ... (K-k+1) ways to place the clusters.
                    for l in 0..kk {
                        log_p += (bk - l as f64).ln();
                    }
                    for &n_l in &sizes {
                        log_p += ln_gamma(alpha + n_l as f64) - ln_gamma(*alpha);
                    }
                    log_p.exp()
                })
            }
            PriorSpec::BalanceNeutral { k } => {
                let z = m.as_partition()?;
                let (p, kk) = (z.n_items(), z.n_clusters());
                k.expect(|big_k| {
                    if big_k < kk {
                        return 0.0;
                    }
                    let bk = big_k as f64;
                    let mut log_p = -(p as f64) * bk.ln();
                    for l in 0..kk {
                        log_p += (bk - l as f64).ln();
                    }
                    log_p.exp()
                })
            }
            PriorSpec::Table(t) => Ok(t.lookup(m)),
        }
    }

    /// Draw one model. Partition draws come out canonicalized.
    pub fn sample(&self, p: usize, rng: &mut Rng64) -> Result<Model> {
        self.validate()?;
        match self {
            PriorSpec::UniformGamma => {
                let bits: Vec<bool> = (0..p).map(|_| rng.gen()).collect();
                Ok(Model::Gamma(GammaVector::new(&bits)?))
            }
            PriorSpec::BetaBinomial { a_omega, b_omega } => {
                let beta = statrs::distribution::Beta::new(*a_omega, *b_omega)
                    .map_err(|e| Error::Argument(e.to_string()))?;
                let omega = beta.sample(rng);
                let bits: Vec<bool> = (0..p).map(|_| rng.gen::<f64>() < omega).collect();
                Ok(Model::Gamma(GammaVector::new(&bits)?))
            }
            PriorSpec::TruncExpDecay { .. } => {
                let q = self.size_pmf(p)?;
                let s = sample_index(&q, rng);
                // Uniform subset of size s via partial Fisher-Yates.
                let mut idx: Vec<usize> = (0..p).collect();
                for i in 0..s {
                    let j = rng.gen_range(i..p);
                    idx.swap(i, j);
                }
                let mut bits = vec![false; p];
                for &i in &idx[..s] {
                    bits[i] = true;
                }
                Ok(Model::Gamma(GammaVector::new(&bits)?))
            }
            PriorSpec::UniformPartition => Ok(Model::Partition(sample_uniform_partition(p, rng))),
            PriorSpec::Crp { theta } => {
                Ok(Model::Partition(sample_seating(p, rng, |size, _k| {
                    if size == 0 {
                        *theta
                    } else {
                        size as f64
                    }
                })))
            }
            PriorSpec::Crp2 { sigma, theta } => {
                Ok(Model::Partition(sample_seating(p, rng, |size, k| {
                    if size == 0 {
                        theta + k as f64 * sigma
                    } else {
                        size as f64 - sigma
                    }
                })))
            }
            PriorSpec::DirMult { alpha, k } => {
                let big_k = k.sample(rng)?;
                let gamma = statrs::distribution::Gamma::new(*alpha, 1.0)
                    .map_err(|e| Error::Argument(e.to_string()))?;
                let weights: Vec<f64> = (0..big_k).map(|_| gamma.sample(rng)).collect();
                let total: f64 = weights.iter().sum();
                let labels: Vec<u64> = (0..p)
                    .map(|_| {
                        let mut u = rng.gen::<f64>() * total;
                        for (c, &w) in weights.iter().enumerate() {
                            if u < w {
                                return c as u64 + 1;
                            }
                            u -= w;
                        }
                        big_k as u64
                    })
                    .collect();
                Ok(Model::Partition(Partition::from_labels(&labels)?))
            }
            PriorSpec::BalanceNeutral { k } => {
                let big_k = k.sample(rng)?;
                let labels: Vec<u64> =
                    (0..p).map(|_| rng.gen_range(0..big_k) as u64 + 1).collect();
                Ok(Model::Partition(Partition::from_labels(&labels)?))
            }
            PriorSpec::Table(t) => {
                if t.p() != p {
                    return Err(Error::Argument(format!(
                        "table prior has p={}, requested {p}",
                        t.p()
                    )));
                }
                Ok(t.sample(rng))
            }
        }
    }

    /// Model-size pmf q(s), s = 0..=min(s_max, p), for the truncated
    /// exponential-decay family.
    fn size_pmf(&self, p: usize) -> Result<Vec<f64>> {
        let PriorSpec::TruncExpDecay { kappa, s_max } = self else {
            return Err(Error::Argument("size_pmf is only defined for trunc-exp-decay".into()));
        };
        if *s_max > p {
            return Err(Error::Argument(format!("s_max={s_max} exceeds p={p}")));
        }
        let pf = p as f64;
        let weights: Vec<f64> = (0..=*s_max)
            .map(|s| binomial(p, s) * pf.powf(-kappa * s as f64))
            .collect();
        let z: f64 = weights.iter().sum();
        Ok(weights.into_iter().map(|w| w / z).collect())
    }
}

impl fmt::Display for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorSpec::UniformGamma => write!(f, "uniform-gamma"),
            PriorSpec::BetaBinomial { a_omega, b_omega } => {
                write!(f, "beta-binomial({a_omega},{b_omega})")
            }
            PriorSpec::TruncExpDecay { kappa, s_max } => {
                write!(f, "trunc-exp-decay({kappa},{s_max})")
            }
            PriorSpec::UniformPartition => write!(f, "uniform-partition"),
            PriorSpec::Crp { theta } => write!(f, "crp({theta})"),
            PriorSpec::Crp2 { sigma, theta } => write!(f, "crp2({sigma},{theta})"),
            PriorSpec::DirMult { alpha, .. } => write!(f, "dir-mult({alpha})"),
            PriorSpec::BalanceNeutral { .. } => write!(f, "balance-neutral"),
            PriorSpec::Table(t) => write!(f, "table[{}]", t.len()),
        }
    }
}

/// Sequential seating construction shared by CRP and CRP2. `weight(size, k)`
/// gives the unnormalized weight of joining a cluster of the given size
/// (`size = 0` means opening cluster `k + 1`).
fn sample_seating(p: usize, rng: &mut Rng64, weight: impl Fn(usize, usize) -> f64) -> Partition {
    let mut labels: Vec<u8> = Vec::with_capacity(p);
    let mut sizes: Vec<usize> = Vec::new();
    labels.push(1);
    sizes.push(1);
    for _ in 1..p {
        let k = sizes.len();
        let mut weights: Vec<f64> = sizes.iter().map(|&n| weight(n, k)).collect();
        weights.push(weight(0, k));
        let choice = sample_index(&weights, rng);
        if choice == k {
            sizes.push(1);
        } else {
            sizes[choice] += 1;
        }
        labels.push(choice as u8 + 1);
    }
    Partition::from_labels(&labels).expect("seating labels are canonical")
}

/// Uniform draw from the partition lattice by sequential allocation with
/// completion counts W(i, k) = k W(i+1, k) + W(i+1, k+1), W(p, ·) = 1.
fn sample_uniform_partition(p: usize, rng: &mut Rng64) -> Partition {
    let mut w = vec![vec![0.0f64; p + 2]; p + 1];
    w[p] = vec![1.0; p + 2];
    for i in (0..p).rev() {
        for k in 0..=p {
            w[i][k] = k as f64 * w[i + 1][k] + w[i + 1][k + 1];
        }
    }
    let mut labels: Vec<u8> = vec![1];
    let mut k = 1usize;
    for i in 1..p {
        let mut weights = vec![w[i + 1][k]; k];
        weights.push(w[i + 1][k + 1]);
        let choice = sample_index(&weights, rng);
        if choice == k {
            k += 1;
        }
        labels.push(choice as u8 + 1);
    }
    Partition::from_labels(&labels).expect("allocation labels are canonical")
}

fn sample_index(weights: &[f64], rng: &mut Rng64) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

fn binomial(n: usize, k: usize) -> f64 {
    (ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)).exp()
}

/// Explicit probability table over an enumerated support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TablePrior {
    space: SpaceKind,
    models: Vec<Model>,
    probs: Vec<f64>,
}

impl TablePrior {
    pub fn new(models: Vec<Model>, probs: Vec<f64>) -> Result<Self> {
        if models.is_empty() || models.len() != probs.len() {
            return Err(Error::Argument("table needs matching models and probabilities".into()));
        }
        let space = models[0].space();
        let p = models[0].p();
        if models.iter().any(|m| m.space() != space || m.p() != p) {
            return Err(Error::Argument("table models must share one space and p".into()));
        }
        let table = Self { space, models, probs };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        if self.probs.iter().any(|&q| q < 0.0 || !q.is_finite()) {
            return Err(Error::Argument("table probabilities must be nonnegative".into()));
        }
        let mass: f64 = self.probs.iter().sum();
        if (mass - 1.0).abs() > 1e-12 {
            return Err(Error::Argument(format!(
                "table probabilities must sum to 1 within 1e-12, got {mass}"
            )));
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.models[0].p()
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Model, f64)> {
        self.models.iter().zip(self.probs.iter().copied())
    }

    fn lookup(&self, m: &Model) -> f64 {
        self.models
            .iter()
            .position(|x| x == m)
            .map_or(0.0, |i| self.probs[i])
    }

    fn sample(&self, rng: &mut Rng64) -> Model {
        self.models[sample_index(&self.probs, rng)].clone()
    }

    /// Load from CSV rows of (model string, probability).
    pub fn from_csv(path: &Path, space: SpaceKind) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_path(path)?;
        let mut models = Vec::new();
        let mut probs = Vec::new();
        for record in rdr.records() {
            let record = record?;
            if record.is_empty() {
                continue;
            }
            // Partition labels contain commas, so the probability is the
            // last field and the model is everything before it.
            let prob_field = record
                .get(record.len() - 1)
                .ok_or_else(|| Error::Parse("missing probability".into()))?;
            let model_str = record
                .iter()
                .take(record.len() - 1)
                .collect::<Vec<_>>()
                .join(",");
            models.push(Model::parse(space, &model_str)?);
            probs.push(
                prob_field
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad probability {prob_field:?}: {e}")))?,
            );
        }
        TablePrior::new(models, probs)
    }

    pub fn to_csv(&self, path: &Path) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().flexible(true).from_path(path)?;
        for (m, q) in self.entries() {
            let mut fields: Vec<String> = m.to_string().split(',').map(str::to_string).collect();
            fields.push(format!("{q}"));
            wtr.write_record(&fields)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Hierarchical uniform partition prior: a distribution `q` over the number
/// of clusters, then a uniform partition given that count. Materialized as
/// an explicit table, without any projectivity across `p`.
pub fn hierarchical_uniform(p: usize, q_clusters: &[f64]) -> Result<PriorSpec> {
    if p > 8 {
        return Err(Error::Capacity(format!(
            "hierarchical uniform tables are built only for p <= 8, got {p}"
        )));
    }
    if q_clusters.len() != p {
        return Err(Error::Argument(format!(
            "need a probability for each cluster count 1..={p}"
        )));
    }
    let s = stirling2(p);
    let mut models = Vec::new();
    let mut probs = Vec::new();
    for z in enumerate_partitions(p)? {
        let k = z.n_clusters();
        probs.push(q_clusters[k - 1] / s[p][k]);
        models.push(Model::Partition(z));
    }
    Ok(PriorSpec::Table(TablePrior::new(models, probs)?))
}

/// E[1/(1+θ)] for θ ~ Weibull(shape, scale), by 64-point Gauss–Legendre on
/// the substitution u = (θ/scale)^shape followed by u = t/(1-t).
pub fn weibull_crp_coclustering(shape: f64, scale: f64) -> f64 {
    integrate_unit(64, |t| {
        let u = t / (1.0 - t);
        let theta = scale * u.powf(1.0 / shape);
        (-u).exp() / (1.0 + theta) / ((1.0 - t) * (1.0 - t))
    })
}

/// A single-hyperparameter family whose summary is calibrated to a target.
#[derive(Clone, Debug)]
pub enum CalibrationFamily {
    /// Free θ; co-clustering target.
    Crp,
    /// Free θ at fixed discount; co-clustering target.
    Crp2 { sigma: f64 },
    /// Free a_ω under the b_ω = 2 - a_ω convention; inclusion target.
    BetaBinomial,
    /// Free shifted-Poisson rate at fixed α; co-clustering target.
    DirMultShiftedPoisson { alpha: f64 },
    /// Free geometric success probability; co-clustering target.
    BalanceNeutralGeometric,
    /// Free geometric success probability on the cluster-count law of the
    /// hierarchical uniform prior at the given p; co-clustering target.
    HierarchicalUniformGeometric { p: usize },
}

impl CalibrationFamily {
    /// The calibrated summary at hyperparameter `x`.
    pub fn summary(&self, x: f64) -> Result<f64> {
        match self {
            CalibrationFamily::Crp => PriorSpec::crp(x)?.coclustering(),
            CalibrationFamily::Crp2 { sigma } => PriorSpec::crp2(*sigma, x)?.coclustering(),
            CalibrationFamily::BetaBinomial => {
                PriorSpec::beta_binomial(x, 2.0 - x)?.marginal_inclusion(1)
            }
            CalibrationFamily::DirMultShiftedPoisson { alpha } => PriorSpec::DirMult {
                alpha: *alpha,
                k: KDistribution::ShiftedPoisson { lambda: x },
            }
            .coclustering(),
            CalibrationFamily::BalanceNeutralGeometric => {
                PriorSpec::BalanceNeutral { k: KDistribution::Geometric { s: x } }.coclustering()
            }
            CalibrationFamily::HierarchicalUniformGeometric { p } => {
                let p = *p;
                let (probs, _) = KDistribution::Geometric { s: x }.truncated()?;
                let mut q: Vec<f64> = (1..=p).map(|k| probs.get(k - 1).copied().unwrap_or(0.0)).collect();
                let mass: f64 = q.iter().sum();
                q.iter_mut().for_each(|v| *v /= mass);
                let s2 = stirling2(p);
                Ok((1..=p).map(|k| q[k - 1] * s2[p - 1][k] / s2[p][k]).sum())
            }
        }
    }

    /// Domain of the free hyperparameter as a bracket usable for bisection.
    fn bracket(&self) -> (f64, f64) {
        match self {
            CalibrationFamily::Crp => (1e-12, 1e12),
            CalibrationFamily::Crp2 { sigma } => (-sigma + 1e-12, 1e12),
            CalibrationFamily::BetaBinomial => (1e-12, 2.0 - 1e-12),
            CalibrationFamily::DirMultShiftedPoisson { .. } => (1e-9, 1e7),
            CalibrationFamily::BalanceNeutralGeometric
            | CalibrationFamily::HierarchicalUniformGeometric { .. } => (1e-12, 1.0 - 1e-12),
        }
    }
}

/// Solve for the hyperparameter whose family summary equals `target`,
/// within 1e-9. Closed form where available, bisection on the monotone
/// summary map otherwise.
pub fn calibrate(family: &CalibrationFamily, target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Argument(format!("target must lie in (0,1), got {target}")));
    }
    match family {
        CalibrationFamily::Crp => Ok((1.0 - target) / target),
        CalibrationFamily::Crp2 { sigma } => {
            if !(*sigma > 0.0 && *sigma < 1.0) {
                return Err(Error::Argument(format!("sigma must lie in (0,1), got {sigma}")));
            }
            Ok((1.0 - sigma) / target - 1.0)
        }
        CalibrationFamily::BetaBinomial => Ok(2.0 * target),
        _ => bisect(family, target),
    }
}

fn bisect(family: &CalibrationFamily, target: f64) -> Result<f64> {
    let (mut lo, mut hi) = family.bracket();
    let f_lo = family.summary(lo)?;
    let f_hi = family.summary(hi)?;
    let increasing = f_hi > f_lo;
    let (mut v_lo, mut v_hi) = (f_lo.min(f_hi), f_lo.max(f_hi));
    if target <= v_lo || target >= v_hi {
        return Err(Error::Infeasible { target, lo: v_lo, hi: v_hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = family.summary(mid)?;
        if (f_mid < target) == increasing {
            lo = mid;
            v_lo = f_mid.min(v_lo);
        } else {
            hi = mid;
            v_hi = f_mid.max(v_hi);
        }
        if hi - lo < 1e-14 * (1.0 + hi.abs()) {
            break;
        }
    }
    let x = 0.5 * (lo + hi);
    let achieved = family.summary(x)?;
    if (achieved - target).abs() > 1e-9 {
        return Err(Error::Infeasible { target, lo: v_lo, hi: v_hi });
    }
    Ok(x)
}
