//! Bayes estimators: posterior risk minimizers for every loss, with
//! exhaustive oracles at small `p` and a greedy search for partitions.

mod search;

pub use search::{greedy_minimizer, PartitionObjective, SearchConfig};

use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{check, loss, vi_loss, LossSpec};
use crate::model::{enumerate_space, GammaVector, Model, Partition, SpaceKind};

/// Posterior co-clustering probabilities: symmetric, unit diagonal,
/// entries in [0, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoClustering {
    n: usize,
    /// Row-major n×n entries.
    values: Vec<f64>,
}

impl CoClustering {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || values.len() != n * n {
            return Err(Error::Argument(format!(
                "expected {n}x{n} co-clustering entries, got {}",
                values.len()
            )));
        }
        for i in 0..n {
            if (values[i * n + i] - 1.0).abs() > 1e-9 {
                return Err(Error::Argument("co-clustering diagonal must be 1".into()));
            }
            for j in 0..n {
                let v = values[i * n + j];
                if !(0.0..=1.0 + 1e-12).contains(&v) {
                    return Err(Error::Argument(format!(
                        "co-clustering entries must lie in [0,1], got {v}"
                    )));
                }
                if (v - values[j * n + i]).abs() > 1e-9 {
                    return Err(Error::Argument("co-clustering matrix must be symmetric".into()));
                }
            }
        }
        Ok(Self { n, values })
    }

    /// Empirical co-clustering frequencies of a draw set.
    pub fn from_draws(draws: &[Partition]) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::Argument("empty draw set".into()));
        }
        let n = draws[0].n_items();
        if draws.iter().any(|z| z.n_items() != n) {
            return Err(Error::Argument("draws must share one p".into()));
        }
        let mut values = vec![0.0; n * n];
        for z in draws {
            for i in 0..n {
                for j in i..n {
                    if z.co_clustered(i, j) {
                        values[i * n + j] += 1.0;
                    }
                }
            }
        }
        let total = draws.len() as f64;
        for i in 0..n {
            for j in i..n {
                values[i * n + j] /= total;
                values[j * n + i] = values[i * n + j];
            }
        }
        Self::new(n, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Load from header-free square CSV.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut values = Vec::new();
        let mut n = 0;
        for record in rdr.records() {
            let record = record?;
            if n == 0 {
                n = record.len();
            }
            for field in record.iter() {
                values.push(
                    field
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("bad entry {field:?}: {e}")))?,
                );
            }
        }
        Self::new(n, values)
    }

    pub fn to_csv(&self, path: &Path) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
        for i in 0..self.n {
            let row: Vec<String> =
                (0..self.n).map(|j| format!("{}", self.entry(i, j))).collect();
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Exact posterior over the hypercube: a full model-probability table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GammaPosterior {
    models: Vec<GammaVector>,
    probs: Vec<f64>,
}

impl GammaPosterior {
    pub fn new(models: Vec<GammaVector>, probs: Vec<f64>) -> Result<Self> {
        if models.is_empty() || models.len() != probs.len() {
            return Err(Error::Argument("posterior table needs matching models and probabilities".into()));
        }
        let p = models[0].p();
        if models.iter().any(|m| m.p() != p) {
            return Err(Error::Argument("posterior models must share one p".into()));
        }
        if probs.iter().any(|&q| q < 0.0 || !q.is_finite()) {
            return Err(Error::Argument("posterior probabilities must be nonnegative".into()));
        }
        let mass: f64 = probs.iter().sum();
        if (mass - 1.0).abs() > 1e-10 {
            return Err(Error::Argument(format!(
                "posterior probabilities must sum to 1 within 1e-10, got {mass}"
            )));
        }
        Ok(Self { models, probs })
    }

    pub fn p(&self) -> usize {
        self.models[0].p()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&GammaVector, f64)> {
        self.models.iter().zip(self.probs.iter().copied())
    }

    /// Marginal inclusion probabilities derived from the table, clamped
    /// against rounding spillover just past the unit interval.
    pub fn inclusion_probabilities(&self) -> Vec<f64> {
        let mut q = vec![0.0; self.p()];
        for (m, prob) in self.entries() {
            for i in m.support() {
                q[i] += prob;
            }
        }
        q.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        q
    }

    /// Posterior risk of an action by direct summation over the table.
    pub fn risk(&self, loss_spec: &LossSpec, action: &GammaVector) -> Result<f64> {
        let action = Model::Gamma(*action);
        let mut r = 0.0;
        for (m, prob) in self.entries() {
            if prob > 0.0 {
                r += prob * loss(loss_spec, &Model::Gamma(*m), &action)?;
            }
        }
        Ok(r)
    }

    /// Load from CSV rows of (bit string, probability).
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut models = Vec::new();
        let mut probs = Vec::new();
        for record in rdr.records() {
            let record = record?;
            if record.len() != 2 {
                return Err(Error::Parse("expected rows of (model, probability)".into()));
            }
            models.push(record[0].parse::<GammaVector>()?);
            probs.push(
                record[1]
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad probability: {e}")))?,
            );
        }
        Self::new(models, probs)
    }

    pub fn to_csv(&self, path: &Path) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
        for (m, q) in self.entries() {
            wtr.write_record([m.to_string(), format!("{q}")])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Posterior over partitions: a draw set plus its co-clustering matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartitionPosterior {
    draws: Vec<Partition>,
}

impl PartitionPosterior {
    pub fn new(draws: Vec<Partition>) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::Argument("empty draw set".into()));
        }
        let p = draws[0].n_items();
        if draws.iter().any(|z| z.n_items() != p) {
            return Err(Error::Argument("draws must share one p".into()));
        }
        Ok(Self { draws })
    }

    pub fn p(&self) -> usize {
        self.draws[0].n_items()
    }

    pub fn draws(&self) -> &[Partition] {
        &self.draws
    }

    pub fn coclustering(&self) -> CoClustering {
        CoClustering::from_draws(&self.draws).expect("validated draw set")
    }

    /// Load from CSV, one canonical label vector per line.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path)?;
        let mut draws = Vec::new();
        for line in content.lines() {
            let line = line.trim();
            if !line.is_empty() {
                draws.push(line.parse::<Partition>()?);
            }
        }
        Self::new(draws)
    }

    pub fn to_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for z in &self.draws {
            out.push_str(&z.to_string());
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Exact posterior summary for either model space.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PosteriorSummary {
    Hypercube(GammaPosterior),
    Partitions(PartitionPosterior),
}

/// The quantile probability model: include variable `i` exactly when its
/// marginal inclusion probability strictly exceeds `0.5 a`. At threshold
/// ties both actions have equal risk and the variable is excluded.
pub fn quantile_probability_model(q: &[f64], a: f64) -> Result<GammaVector> {
    if !(a > 0.0 && a < 2.0) {
        return Err(Error::Argument(format!("weight must lie in (0,2), got {a}")));
    }
    if q.iter().any(|&qi| !(0.0..=1.0).contains(&qi)) {
        return Err(Error::Argument("inclusion probabilities must lie in [0,1]".into()));
    }
    let bits: Vec<bool> = q.iter().map(|&qi| qi > 0.5 * a).collect();
    GammaVector::new(&bits)
}

/// Posterior mode; ties broken by fewest included variables, then
/// lexicographically on the bit string.
pub fn highest_probability_model(summary: &GammaPosterior) -> GammaVector {
    let mut best = 0;
    for i in 1..summary.models.len() {
        let cur = (&summary.models[i], summary.probs[i]);
        let incumbent = (&summary.models[best], summary.probs[best]);
        let better = match cur.1.partial_cmp(&incumbent.1).unwrap() {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => match cur.0.size().cmp(&incumbent.0.size()) {
                Ordering::Less => true,
                Ordering::Greater => false,
                Ordering::Equal => lex_rank(cur.0) < lex_rank(incumbent.0),
            },
        };
        if better {
            best = i;
        }
    }
    summary.models[best]
}

/// Integer whose natural order matches lexicographic order on bit strings.
fn lex_rank(g: &GammaVector) -> u32 {
    let mut r = 0;
    for i in 0..g.p() {
        r = (r << 1) | g.bit(i) as u32;
    }
    r
}

/// Generalized-Binder posterior risk from a co-clustering matrix, in the
/// check-function form Σ_{i<j} ρ_{(2-a)/2}( 1(ẑ_i = ẑ_j) − C_ij ).
pub fn gb_risk_posterior(c: &CoClustering, zhat: &Partition, a: f64) -> Result<f64> {
    if !(a > 0.0 && a < 2.0) {
        return Err(Error::Argument(format!("weight must lie in (0,2), got {a}")));
    }
    if c.n() != zhat.n_items() {
        return Err(Error::Argument(format!(
            "dimension mismatch: C is {}x{0}, partition has {} items",
            c.n(),
            zhat.n_items()
        )));
    }
    let tau = (2.0 - a) / 2.0;
    let mut total = 0.0;
    for i in 0..c.n() {
        for j in i + 1..c.n() {
            let ind = if zhat.co_clustered(i, j) { 1.0 } else { 0.0 };
            total += check(tau, ind - c.entry(i, j));
        }
    }
    Ok(total)
}

/// The same risk in the direct per-pair form
/// Σ_{i<j} a C_ij 1(ẑ_i ≠ ẑ_j) + (2-a)(1-C_ij) 1(ẑ_i = ẑ_j);
/// kept as the second route of the dual-formula identity.
pub fn gb_risk_posterior_direct(c: &CoClustering, zhat: &Partition, a: f64) -> Result<f64> {
    if c.n() != zhat.n_items() {
        return Err(Error::Argument("dimension mismatch".into()));
    }
    let mut total = 0.0;
    for i in 0..c.n() {
        for j in i + 1..c.n() {
            let cij = c.entry(i, j);
            if zhat.co_clustered(i, j) {
                total += (2.0 - a) * (1.0 - cij);
            } else {
                total += a * cij;
            }
        }
    }
    Ok(total)
}

/// Monte-Carlo posterior VI risk: the sample mean of the VI loss from each
/// draw to the action (the entropy term is included through the draws).
pub fn vi_risk_posterior(draws: &[Partition], zhat: &Partition) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::Argument("empty draw set".into()));
    }
    let mut total = 0.0;
    for d in draws {
        total += vi_loss(d, zhat)?;
    }
    Ok(total / draws.len() as f64)
}

/// The entropy constant H of the VI risk, estimated from draws:
/// mean over draws of p^{-1} Σ_i log2(cluster size of i).
pub fn vi_entropy_from_draws(draws: &[Partition]) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::Argument("empty draw set".into()));
    }
    let p = draws[0].n_items() as f64;
    let mut total = 0.0;
    for d in draws {
        let sizes = d.cluster_sizes();
        total += sizes.iter().map(|&n| n as f64 * (n as f64).log2()).sum::<f64>() / p;
    }
    Ok(total / draws.len() as f64)
}

/// The Jensen lower bound of the posterior VI risk, from the co-clustering
/// matrix. `entropy` is the H term when available from draws; omitting it
/// shifts every action equally.
pub fn vi_lb_risk_posterior(c: &CoClustering, zhat: &Partition, entropy: Option<f64>) -> Result<f64> {
    if c.n() != zhat.n_items() {
        return Err(Error::Argument("dimension mismatch".into()));
    }
    let p = c.n();
    let sizes = zhat.cluster_sizes();
    let mut total = 0.0;
    for i in 0..p {
        let within: f64 = (0..p)
            .filter(|&j| zhat.co_clustered(i, j))
            .map(|j| c.entry(i, j))
            .sum();
        total += (sizes[zhat.cluster_of(i)] as f64).log2() - 2.0 * within.log2();
    }
    Ok(entropy.unwrap_or(0.0) + total / p as f64)
}

/// Global risk minimizer over the enumerated space; ties broken toward the
/// simpler model, then lexicographically.
pub fn exhaustive_minimizer(
    risk: impl Fn(&Model) -> f64,
    p: usize,
    kind: SpaceKind,
) -> Result<Model> {
    let mut best: Option<(Model, f64)> = None;
    for m in enumerate_space(kind, p)? {
        let r = risk(&m);
        best = Some(match best {
            None => (m, r),
            Some((bm, br)) => {
                let take = match r.partial_cmp(&br).unwrap() {
                    Ordering::Less => true,
                    Ordering::Greater => false,
                    Ordering::Equal => match m.complexity().cmp(&bm.complexity()) {
                        Ordering::Less => true,
                        Ordering::Greater => false,
                        Ordering::Equal => model_lex_less(&m, &bm),
                    },
                };
                if take {
                    (m, r)
                } else {
                    (bm, br)
                }
            }
        });
    }
    Ok(best.expect("space is nonempty").0)
}

fn model_lex_less(a: &Model, b: &Model) -> bool {
    match (a, b) {
        (Model::Gamma(x), Model::Gamma(y)) => lex_rank(x) < lex_rank(y),
        (Model::Partition(x), Model::Partition(y)) => x.labels() < y.labels(),
        _ => unreachable!("models from one space"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn qpm_thresholding() {
        let q = [0.6, 0.4, 0.55];
        assert_eq!(quantile_probability_model(&q, 1.0).unwrap().to_string(), "101");
        let q = [0.9; 4];
        assert_eq!(quantile_probability_model(&q, 1.7).unwrap().to_string(), "1111");
        // exact threshold is excluded
        let q = [0.5, 0.51];
        assert_eq!(quantile_probability_model(&q, 1.0).unwrap().to_string(), "01");
        assert!(quantile_probability_model(&[0.5], 2.0).is_err());
        assert!(quantile_probability_model(&[1.5], 1.0).is_err());
    }

    #[test]
    fn qpm_monotone_in_weight() {
        // Larger weight selects a subset: more parsimonious actions.
        let q = [0.1, 0.35, 0.42, 0.55, 0.61, 0.74, 0.97];
        let mut prev = quantile_probability_model(&q, 0.2).unwrap();
        for step in 1..=17 {
            let a = 0.2 + step as f64 * 0.1;
            let cur = quantile_probability_model(&q, a).unwrap();
            for i in 0..q.len() {
                assert!(!cur.bit(i) || prev.bit(i), "selection grew at a={a}");
            }
            prev = cur;
        }
    }

    #[test]
    fn hpm_tie_breaks() {
        use crate::model::enumerate_gamma;
        let models: Vec<GammaVector> = enumerate_gamma(2).unwrap().collect();
        // point mass
        let table =
            GammaPosterior::new(models.clone(), vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(highest_probability_model(&table).to_string(), "10");
        // uniform: null model wins by tie-break
        let table = GammaPosterior::new(models, vec![0.25; 4]).unwrap();
        assert_eq!(highest_probability_model(&table).to_string(), "00");
    }

    #[test]
    fn hpm_is_zero_one_minimizer() {
        use crate::model::enumerate_gamma;
        use rand::Rng;
        let models: Vec<GammaVector> = enumerate_gamma(3).unwrap().collect();
        let mut rng = crate::rng::rng_from_seed(21);
        for _ in 0..20 {
            let raw: Vec<f64> = (0..models.len()).map(|_| rng.gen::<f64>()).collect();
            let total: f64 = raw.iter().sum();
            let probs: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let table = GammaPosterior::new(models.clone(), probs).unwrap();
            let hpm = highest_probability_model(&table);
            let oracle = exhaustive_minimizer(
                |m| table.risk(&LossSpec::ZeroOne, m.as_gamma().unwrap()).unwrap(),
                3,
                SpaceKind::Hypercube,
            )
            .unwrap();
            assert_eq!(Model::Gamma(hpm), oracle);
        }
    }

    #[test]
    fn gb_risk_trivial_cases() {
        let p = 4;
        let ones = CoClustering::new(p, vec![1.0; p * p]).unwrap();
        assert_abs_diff_eq!(
            gb_risk_posterior(&ones, &Partition::one_block(p), 1.0).unwrap(),
            0.0
        );
        let mut vals = vec![0.0; p * p];
        for i in 0..p {
            vals[i * p + i] = 1.0;
        }
        let diag = CoClustering::new(p, vals).unwrap();
        assert_abs_diff_eq!(
            gb_risk_posterior(&diag, &Partition::singletons(p), 1.0).unwrap(),
            0.0
        );
    }

    #[test]
    fn vi_risk_sample_mean_identity() {
        let draws = vec![Partition::one_block(4), Partition::singletons(4)];
        let zhat = Partition::one_block(4);
        assert_abs_diff_eq!(vi_risk_posterior(&draws, &zhat).unwrap(), 1.0, epsilon = 1e-12);
        assert!(vi_risk_posterior(&[], &zhat).is_err());
    }

    #[test]
    fn vi_lb_point_mass_baseline() {
        // C from a point mass at zhat: the action terms cancel against the
        // entropy term, the bound is tight, and both risks are zero.
        let zhat: Partition = "1,1,2,3".parse().unwrap();
        let c = CoClustering::from_draws(std::slice::from_ref(&zhat)).unwrap();
        let h = vi_entropy_from_draws(std::slice::from_ref(&zhat)).unwrap();
        let r = vi_lb_risk_posterior(&c, &zhat, Some(h)).unwrap();
        assert_abs_diff_eq!(r, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            r,
            vi_risk_posterior(std::slice::from_ref(&zhat), &zhat).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn vi_lb_half_coclustering_dual_path() {
        // All off-diagonals 0.5: compare against an independent evaluation
        // over the contingency form.
        let p = 4;
        let mut vals = vec![0.5; p * p];
        for i in 0..p {
            vals[i * p + i] = 1.0;
        }
        let c = CoClustering::new(p, vals).unwrap();
        let zhat: Partition = "1,1,2,2".parse().unwrap();
        let got = vi_lb_risk_posterior(&c, &zhat, None).unwrap();
        // Per item: cluster size 2, within-sum 1 + 0.5; term = log2(2) - 2 log2(1.5).
        let expect = (2f64.log2() - 2.0 * 1.5f64.log2()) * 4.0 / 4.0;
        assert_abs_diff_eq!(got, expect, epsilon = 1e-12);
    }

    #[test]
    fn exhaustive_tie_breaks_to_simplest() {
        let m = exhaustive_minimizer(|_| 1.0, 3, SpaceKind::Partitions).unwrap();
        assert_eq!(m.to_string(), "1,1,1");
        let m = exhaustive_minimizer(|_| 1.0, 3, SpaceKind::Hypercube).unwrap();
        assert_eq!(m.to_string(), "000");
    }
}
