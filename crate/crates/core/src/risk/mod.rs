//! Prior risk profiles, risk-equilibrium and risk-penalization certification
//! (closed-form and exhaustive routes), and equilibrium-prior solving on
//! explicit loss matrices.

mod solve;

pub use solve::{solve_equilibrium, solve_equilibrium_matrix, EquilibriumSolution, SolutionStatus};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{loss, LossSpec};
use crate::model::{enumerate_space, Model, Partition, SpaceKind};
use crate::prior::PriorSpec;
use crate::rng::{rng_from_seed, Rng64};

/// How a risk profile is computed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum RiskMethod {
    /// Full double enumeration of the model space.
    ExactEnumeration,
    /// Family-specific formula from marginal summaries.
    ClosedForm,
    /// Sample average over prior draws.
    MonteCarlo { n: usize, seed: u64 },
}

impl RiskMethod {
    pub fn label(&self) -> String {
        match self {
            RiskMethod::ExactEnumeration => "exact-enumeration".into(),
            RiskMethod::ClosedForm => "closed-form".into(),
            RiskMethod::MonteCarlo { n, seed } => format!("monte-carlo(n={n},seed={seed})"),
        }
    }
}

/// Prior risk per model over an enumerated space.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RiskProfile {
    pub space: Vec<Model>,
    pub values: Vec<f64>,
    pub method: RiskMethod,
    /// Per-model Monte-Carlo standard errors (Monte-Carlo method only).
    pub mc_se: Option<Vec<f64>>,
    /// Set when an action-independent additive constant is omitted
    /// (the entropy term of the VI lower bound).
    pub constant_omitted: bool,
}

impl RiskProfile {
    pub fn spread(&self) -> f64 {
        let max = self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = self.values.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min
    }

    /// (argmin, argmax) models of the profile.
    pub fn extremes(&self) -> (Model, Model) {
        let mut lo = 0;
        let mut hi = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v < self.values[lo] {
                lo = i;
            }
            if v > self.values[hi] {
                hi = i;
            }
        }
        (self.space[lo].clone(), self.space[hi].clone())
    }

    pub fn to_csv(&self, path: &Path) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path)?;
        if self.mc_se.is_some() {
            wtr.write_record(["model", "risk", "mc_se"])?;
        } else {
            wtr.write_record(["model", "risk"])?;
        }
        for (i, m) in self.space.iter().enumerate() {
            match &self.mc_se {
                Some(se) => wtr.write_record([
                    m.to_string(),
                    format!("{}", self.values[i]),
                    format!("{}", se[i]),
                ])?,
                None => wtr.write_record([m.to_string(), format!("{}", self.values[i])])?,
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Prior marginal inclusion probabilities computed by full enumeration,
/// independent of the families' closed forms.
pub fn inclusion_by_enumeration(prior: &PriorSpec, p: usize) -> Result<Vec<f64>> {
    if prior.space() != SpaceKind::Hypercube {
        return Err(Error::Argument("prior is not a hypercube family".into()));
    }
    let mut q = vec![0.0; p];
    for m in enumerate_space(SpaceKind::Hypercube, p)? {
        let w = prior.pmf(&m)?;
        if w == 0.0 {
            continue;
        }
        for i in m.as_gamma()?.support() {
            q[i] += w;
        }
    }
    Ok(q)
}

/// Prior co-clustering matrix (row-major, p×p) computed by full enumeration.
pub fn coclustering_by_enumeration(prior: &PriorSpec, p: usize) -> Result<Vec<f64>> {
    if prior.space() != SpaceKind::Partitions {
        return Err(Error::Argument("prior is not a partition family".into()));
    }
    let mut c = vec![0.0; p * p];
    for m in enumerate_space(SpaceKind::Partitions, p)? {
        let w = prior.pmf(&m)?;
        if w == 0.0 {
            continue;
        }
        let z = m.as_partition()?;
        for i in 0..p {
            for j in 0..p {
                if z.co_clustered(i, j) {
                    c[i * p + j] += w;
                }
            }
        }
    }
    Ok(c)
}

/// The prior co-clustering probability, from the family's closed form when
/// it has one, otherwise by enumeration (requiring an exchangeable matrix).
pub fn coclustering_value(prior: &PriorSpec, p: usize) -> Result<f64> {
    if let Ok(c) = prior.coclustering() {
        return Ok(c);
    }
    let c = coclustering_by_enumeration(prior, p)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..p {
        for j in 0..p {
            if i != j {
                lo = lo.min(c[i * p + j]);
                hi = hi.max(c[i * p + j]);
            }
        }
    }
    if hi - lo > 1e-9 {
        return Err(Error::Argument(format!(
            "prior is not exchangeable: co-clustering probabilities span [{lo}, {hi}]"
        )));
    }
    Ok(0.5 * (lo + hi))
}

/// The proof device of the VI lower-bound monotonicity argument:
/// g(m) = m log2( m / (1 + c(m-1))^2 ).
pub fn subadditivity_g(m: usize, c: f64) -> f64 {
    assert!(m >= 1, "g is defined on m >= 1");
    assert!(c > 0.0 && c < 1.0, "co-clustering probability must lie in (0,1)");
    let mf = m as f64;
    mf * (mf / (1.0 + c * (mf - 1.0)).powi(2)).log2()
}

/// VI lower-bound prior risk of one action, up to the additive entropy
/// constant, evaluated from a co-clustering matrix.
fn vi_lb_value(c: &[f64], p: usize, z: &Partition) -> f64 {
    let sizes = z.cluster_sizes();
    let mut total = 0.0;
    for i in 0..p {
        let within: f64 = (0..p)
            .filter(|&j| z.co_clustered(i, j))
            .map(|j| if i == j { 1.0 } else { c[i * p + j] })
            .sum();
        total += (sizes[z.cluster_of(i)] as f64).log2() - 2.0 * within.log2();
    }
    total / p as f64
}

/// Compute the prior risk profile over the full model space.
pub fn prior_risk(
    prior: &PriorSpec,
    loss_spec: &LossSpec,
    p: usize,
    method: RiskMethod,
) -> Result<RiskProfile> {
    prior.validate()?;
    if let Some(space) = loss_spec.space() {
        if space != prior.space() {
            return Err(Error::Argument(format!(
                "loss {loss_spec} does not apply to {prior}"
            )));
        }
    }
    match method {
        RiskMethod::ExactEnumeration => exact_profile(prior, loss_spec, p),
        RiskMethod::ClosedForm => closed_form_profile(prior, loss_spec, p),
        RiskMethod::MonteCarlo { n, seed } => monte_carlo_profile(prior, loss_spec, p, n, seed),
    }
}

fn exact_profile(prior: &PriorSpec, loss_spec: &LossSpec, p: usize) -> Result<RiskProfile> {
    let space = enumerate_space(prior.space(), p)?;
    if let LossSpec::ViLb = loss_spec {
        let c = coclustering_by_enumeration(prior, p)?;
        let values: Vec<f64> = space
            .iter()
            .map(|m| Ok(vi_lb_value(&c, p, m.as_partition()?)))
            .collect::<Result<_>>()?;
        return Ok(RiskProfile {
            space,
            values,
            method: RiskMethod::ExactEnumeration,
            mc_se: None,
            constant_omitted: true,
        });
    }
    let weights: Vec<f64> = space.iter().map(|m| prior.pmf(m)).collect::<Result<_>>()?;
    let values: Vec<f64> = space
        .iter()
        .map(|action| {
            let mut r = 0.0;
            for (truth, &w) in space.iter().zip(&weights) {
                if w > 0.0 {
                    r += w * loss(loss_spec, truth, action)?;
                }
            }
            Ok(r)
        })
        .collect::<Result<_>>()?;
    Ok(RiskProfile {
        space,
        values,
        method: RiskMethod::ExactEnumeration,
        mc_se: None,
        constant_omitted: false,
    })
}

fn closed_form_profile(prior: &PriorSpec, loss_spec: &LossSpec, p: usize) -> Result<RiskProfile> {
    match loss_spec {
        LossSpec::Gh { a } => {
            let q = prior.marginal_inclusion_vec(p)?;
            let space = enumerate_space(SpaceKind::Hypercube, p)?;
            let values: Vec<f64> = space
                .iter()
                .map(|m| {
                    let g = m.as_gamma()?;
                    let mut r = 0.0;
                    for (i, &qi) in q.iter().enumerate() {
                        r += if g.bit(i) { a * (1.0 - qi) } else { (2.0 - a) * qi };
                    }
                    Ok(r)
                })
                .collect::<Result<_>>()?;
            Ok(RiskProfile {
                space,
                values,
                method: RiskMethod::ClosedForm,
                mc_se: None,
                constant_omitted: false,
            })
        }
        LossSpec::Gb { a } => {
            let c = coclustering_value(prior, p)?;
            let space = enumerate_space(SpaceKind::Partitions, p)?;
            let pairs = (p * (p - 1) / 2) as f64;
            let values: Vec<f64> = space
                .iter()
                .map(|m| {
                    let t = m.as_partition()?.n_pairs_together() as f64;
                    Ok(a * c * pairs + (2.0 - a - 2.0 * c) * t)
                })
                .collect::<Result<_>>()?;
            Ok(RiskProfile {
                space,
                values,
                method: RiskMethod::ClosedForm,
                mc_se: None,
                constant_omitted: false,
            })
        }
        LossSpec::ViLb => {
            let c = coclustering_value(prior, p)?;
            let space = enumerate_space(SpaceKind::Partitions, p)?;
            let values: Vec<f64> = space
                .iter()
                .map(|m| {
                    let sizes = m.as_partition()?.cluster_sizes();
                    Ok(sizes.iter().map(|&n| subadditivity_g(n, c)).sum::<f64>() / p as f64)
                })
                .collect::<Result<_>>()?;
            Ok(RiskProfile {
                space,
                values,
                method: RiskMethod::ClosedForm,
                mc_se: None,
                constant_omitted: true,
            })
        }
        other => Err(Error::UnsupportedMethod(format!(
            "no closed-form prior risk for {other}"
        ))),
    }
}

fn monte_carlo_profile(
    prior: &PriorSpec,
    loss_spec: &LossSpec,
    p: usize,
    n: usize,
    seed: u64,
) -> Result<RiskProfile> {
    if n == 0 {
        return Err(Error::Argument("monte-carlo sample count must be positive".into()));
    }
    if matches!(loss_spec, LossSpec::ViLb) {
        return Err(Error::UnsupportedMethod(
            "VI-LB prior risk has no draw-wise loss; use closed-form or exact".into(),
        ));
    }
    let mut rng: Rng64 = rng_from_seed(seed);
    let draws: Vec<Model> = (0..n).map(|_| prior.sample(p, &mut rng)).collect::<Result<_>>()?;
    let space = enumerate_space(prior.space(), p)?;
    let mut values = Vec::with_capacity(space.len());
    let mut ses = Vec::with_capacity(space.len());
    for action in &space {
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for d in &draws {
            let l = loss(loss_spec, d, action)?;
            sum += l;
            sumsq += l * l;
        }
        let mean = sum / n as f64;
        let var = (sumsq / n as f64 - mean * mean).max(0.0);
        values.push(mean);
        ses.push((var / n as f64).sqrt());
    }
    Ok(RiskProfile {
        space,
        values,
        method: RiskMethod::MonteCarlo { n, seed },
        mc_se: Some(ses),
        constant_omitted: false,
    })
}

/// Which certification route(s) to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RouteChoice {
    /// Run every applicable route and require agreement.
    Auto,
    Characterization,
    Enumeration,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RouteInfo {
    Characterization,
    Enumeration,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquilibriumVerdict {
    Equilibrium,
    NotEquilibrium,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub verdict: EquilibriumVerdict,
    /// Max minus min prior risk over the model space.
    pub max_spread: f64,
    /// A (argmin, argmax) model pair achieving the spread.
    pub witness: Option<(Model, Model)>,
    pub route: RouteInfo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenalizationVerdict {
    Penalization,
    NotPenalization,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PenalizationReport {
    pub verdict: PenalizationVerdict,
    /// A covering pair (simpler, more complex) whose risk decreases.
    pub violating_pair: Option<(Model, Model)>,
    /// Most negative risk increment over covering pairs (0 when none).
    pub worst_drop: f64,
    pub route: RouteInfo,
}

fn require_positive_tol(tol: f64) -> Result<()> {
    if tol > 0.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!("tolerance must be positive, got {tol}")))
    }
}

/// Certify whether the prior risk is constant over the model space.
pub fn check_equilibrium(
    prior: &PriorSpec,
    loss_spec: &LossSpec,
    p: usize,
    tol: f64,
    route: RouteChoice,
) -> Result<EquilibriumReport> {
    require_positive_tol(tol)?;
    prior.validate()?;
    let characterization = || -> Result<EquilibriumReport> {
        let (spread, witness) = match loss_spec {
            LossSpec::Gh { a } => {
                let q = prior.marginal_inclusion_vec(p)?;
                let spread: f64 = q.iter().map(|qi| (a - 2.0 * qi).abs()).sum();
                let lo = crate::model::GammaVector::new(
                    &q.iter().map(|&qi| 2.0 * qi > *a).collect::<Vec<_>>(),
                )?;
                let hi = crate::model::GammaVector::new(
                    &q.iter().map(|&qi| 2.0 * qi < *a).collect::<Vec<_>>(),
                )?;
                (spread, Some((Model::Gamma(lo), Model::Gamma(hi))))
            }
            LossSpec::Gb { a } => {
                let c = coclustering_value(prior, p)?;
                let slope = 2.0 - a - 2.0 * c;
                let pairs = (p * (p - 1) / 2) as f64;
                let one = Model::Partition(Partition::one_block(p));
                let sing = Model::Partition(Partition::singletons(p));
                let witness = if slope >= 0.0 { (sing, one) } else { (one, sing) };
                (slope.abs() * pairs, Some(witness))
            }
            LossSpec::ZeroOne => {
                // Uniformity of the pmf is the characterization.
                let space = enumerate_space(prior.space(), p)?;
                let probs: Vec<f64> =
                    space.iter().map(|m| prior.pmf(m)).collect::<Result<_>>()?;
                let mut lo = 0;
                let mut hi = 0;
                for (i, &v) in probs.iter().enumerate() {
                    if v < probs[lo] {
                        lo = i;
                    }
                    if v > probs[hi] {
                        hi = i;
                    }
                }
                (
                    probs[hi] - probs[lo],
                    Some((space[hi].clone(), space[lo].clone())),
                )
            }
            other => {
                return Err(Error::UnsupportedMethod(format!(
                    "no equilibrium characterization for {other}"
                )))
            }
        };
        Ok(EquilibriumReport {
            verdict: if spread <= tol {
                EquilibriumVerdict::Equilibrium
            } else {
                EquilibriumVerdict::NotEquilibrium
            },
            max_spread: spread,
            witness,
            route: RouteInfo::Characterization,
        })
    };
    let enumeration = || -> Result<EquilibriumReport> {
        let profile = prior_risk(prior, loss_spec, p, RiskMethod::ExactEnumeration)?;
        let spread = profile.spread();
        let witness = profile.extremes();
        Ok(EquilibriumReport {
            verdict: if spread <= tol {
                EquilibriumVerdict::Equilibrium
            } else {
                EquilibriumVerdict::NotEquilibrium
            },
            max_spread: spread,
            witness: Some(witness),
            route: RouteInfo::Enumeration,
        })
    };
    match route {
        RouteChoice::Characterization => characterization(),
        RouteChoice::Enumeration => enumeration(),
        RouteChoice::Auto => {
            let ch = characterization();
            let en = enumeration();
            match (ch, en) {
                (Ok(c), Ok(e)) => {
                    if c.verdict != e.verdict {
                        return Err(Error::Argument(format!(
                            "routes disagree: characterization spread {} vs enumeration spread {}",
                            c.max_spread, e.max_spread
                        )));
                    }
                    Ok(EquilibriumReport { route: RouteInfo::Both, ..e })
                }
                (Ok(c), Err(_)) => Ok(c),
                (Err(_), Ok(e)) => Ok(e),
                (Err(c), Err(_)) => Err(c),
            }
        }
    }
}

/// Certify whether the prior risk is nondecreasing along the complexity
/// partial order (checked on covering pairs; sufficient by transitivity).
pub fn check_penalization(
    prior: &PriorSpec,
    loss_spec: &LossSpec,
    p: usize,
    tol: f64,
    route: RouteChoice,
) -> Result<PenalizationReport> {
    require_positive_tol(tol)?;
    prior.validate()?;
    let characterization = || -> Result<PenalizationReport> {
        match loss_spec {
            LossSpec::Gh { a } => {
                let q = prior.marginal_inclusion_vec(p)?;
                // Adding variable i changes the risk by a - 2 q_i.
                let mut worst = f64::INFINITY;
                let mut worst_i = 0;
                for (i, &qi) in q.iter().enumerate() {
                    let inc = a - 2.0 * qi;
                    if inc < worst {
                        worst = inc;
                        worst_i = i;
                    }
                }
                let violating = if worst < -tol {
                    let null = crate::model::GammaVector::null(p);
                    Some((
                        Model::Gamma(null),
                        Model::Gamma(null.with_bit(worst_i, true)),
                    ))
                } else {
                    None
                };
                Ok(PenalizationReport {
                    verdict: if worst >= -tol {
                        PenalizationVerdict::Penalization
                    } else {
                        PenalizationVerdict::NotPenalization
                    },
                    violating_pair: violating,
                    worst_drop: worst.min(0.0),
                    route: RouteInfo::Characterization,
                })
            }
            LossSpec::Gb { a } => {
                let c = coclustering_value(prior, p)?;
                // Splitting into parts (n1, n2) changes the risk by
                // (2c + a - 2) n1 n2; worst at the most balanced split.
                let slope = 2.0 * c + a - 2.0;
                let worst_product = (p / 2) * p.div_ceil(2);
                let worst = if slope >= 0.0 { slope } else { slope * worst_product as f64 };
                let violating = if worst < -tol {
                    let one = Partition::one_block(p);
                    let split: Vec<u64> = (0..p)
                        .map(|i| if i < p.div_ceil(2) { 1 } else { 2 })
                        .collect();
                    Some((
                        Model::Partition(one),
                        Model::Partition(Partition::from_labels(&split)?),
                    ))
                } else {
                    None
                };
                Ok(PenalizationReport {
                    verdict: if worst >= -tol {
                        PenalizationVerdict::Penalization
                    } else {
                        PenalizationVerdict::NotPenalization
                    },
                    violating_pair: violating,
                    worst_drop: worst.min(0.0),
                    route: RouteInfo::Characterization,
                })
            }
            LossSpec::ViLb => {
                let c = coclustering_value(prior, p)?;
                // Splitting a size-m cluster into (m1, m - m1) changes the
                // risk by (g(m1) + g(m-m1) - g(m)) / p.
                let mut worst = f64::INFINITY;
                let mut worst_split = (1, 1);
                for m in 2..=p {
                    for m1 in 1..=m / 2 {
                        let defect = (subadditivity_g(m1, c) + subadditivity_g(m - m1, c)
                            - subadditivity_g(m, c))
                            / p as f64;
                        if defect < worst - 1e-15 {
                            worst = defect;
                            worst_split = (m1, m);
                        }
                    }
                }
                let violating = if worst < -tol {
                    let (m1, m) = worst_split;
                    // One cluster of size m, singletons elsewhere.
                    let mut labels: Vec<u64> = vec![1; p];
                    for (next, l) in labels.iter_mut().enumerate().skip(m) {
                        *l = next as u64;
                    }
                    let coarse = Partition::from_labels(&labels)?;
                    for l in labels.iter_mut().take(m).skip(m1) {
                        *l = p as u64 + 1;
                    }
                    let fine = Partition::from_labels(&labels)?;
                    Some((Model::Partition(coarse), Model::Partition(fine)))
                } else {
                    None
                };
                Ok(PenalizationReport {
                    verdict: if worst >= -tol {
                        PenalizationVerdict::Penalization
                    } else {
                        PenalizationVerdict::NotPenalization
                    },
                    violating_pair: violating,
                    worst_drop: worst.min(0.0),
                    route: RouteInfo::Characterization,
                })
            }
            other => Err(Error::UnsupportedMethod(format!(
                "no penalization characterization for {other}"
            ))),
        }
    };
    let enumeration = || -> Result<PenalizationReport> {
        let profile = prior_risk(prior, loss_spec, p, RiskMethod::ExactEnumeration)?;
        let index: std::collections::HashMap<&Model, usize> =
            profile.space.iter().zip(0..).collect();
        let mut worst = f64::INFINITY;
        let mut pair = None;
        for (i, m) in profile.space.iter().enumerate() {
            for cover in m.covers() {
                let j = index[&cover];
                let inc = profile.values[j] - profile.values[i];
                if inc < worst {
                    worst = inc;
                    pair = Some((m.clone(), cover));
                }
            }
        }
        let violating = worst < -tol;
        Ok(PenalizationReport {
            verdict: if violating {
                PenalizationVerdict::NotPenalization
            } else {
                PenalizationVerdict::Penalization
            },
            violating_pair: if violating { pair } else { None },
            worst_drop: worst.min(0.0),
            route: RouteInfo::Enumeration,
        })
    };
    match route {
        RouteChoice::Characterization => characterization(),
        RouteChoice::Enumeration => enumeration(),
        RouteChoice::Auto => {
            let ch = characterization();
            let en = enumeration();
            match (ch, en) {
                (Ok(c), Ok(e)) => {
                    if c.verdict != e.verdict {
                        return Err(Error::Argument(format!(
                            "routes disagree: characterization drop {} vs enumeration drop {}",
                            c.worst_drop, e.worst_drop
                        )));
                    }
                    Ok(PenalizationReport { route: RouteInfo::Both, ..e })
                }
                (Ok(c), Err(_)) => Ok(c),
                (Err(_), Ok(e)) => Ok(e),
                (Err(c), Err(_)) => Err(c),
            }
        }
    }
}

/// Verify that the point-mass prior risk of a matrix loss is a strictly
/// proper score: zero exactly on the diagonal, positive elsewhere.
pub fn point_mass_properness_check(loss_spec: &LossSpec) -> Result<bool> {
    let LossSpec::Matrix(matrix) = loss_spec else {
        return Err(Error::Argument("properness check requires a matrix loss".into()));
    };
    let m = matrix.len();
    for i in 0..m {
        for j in 0..m {
            let v = matrix.entry(i, j);
            if i == j && v != 0.0 {
                return Ok(false);
            }
            if i != j && v <= 0.0 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// One row of a chain-risk table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainRiskRow {
    pub chain_index: usize,
    pub partition: Partition,
    pub loss_name: String,
    pub risk: f64,
    pub method: String,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ChainRiskTable {
    pub rows: Vec<ChainRiskRow>,
}

impl ChainRiskTable {
    /// Risks of one loss in chain order.
    pub fn column(&self, loss_name: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.loss_name == loss_name)
            .map(|r| r.risk)
            .collect()
    }

    pub fn to_csv(&self, path: &Path) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path)?;
        wtr.write_record(["chain_index", "partition", "loss_name", "risk", "method"])?;
        for r in &self.rows {
            wtr.write_record([
                r.chain_index.to_string(),
                r.partition.to_string(),
                r.loss_name.clone(),
                format!("{}", r.risk),
                r.method.clone(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Evaluate prior risks along a refinement chain: generalized Binder and the
/// VI lower bound in closed form, the VI risk by Monte Carlo over prior
/// draws (`mc_n` samples from `seed`, drawn once and reused).
pub fn chain_risk(
    prior: &PriorSpec,
    chain: &[Partition],
    losses: &[LossSpec],
    mc_n: usize,
    seed: u64,
) -> Result<ChainRiskTable> {
    if prior.space() != SpaceKind::Partitions {
        return Err(Error::Argument("chain risk requires a partition-space prior".into()));
    }
    if chain.is_empty() {
        return Err(Error::Argument("empty chain".into()));
    }
    let p = chain[0].n_items();
    let needs_draws = losses.iter().any(|l| matches!(l, LossSpec::Vi));
    let draws: Vec<Partition> = if needs_draws {
        let mut rng = rng_from_seed(seed);
        (0..mc_n)
            .map(|_| Ok(prior.sample(p, &mut rng)?.as_partition()?.clone()))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let mut table = ChainRiskTable::default();
    for loss_spec in losses {
        match loss_spec {
            LossSpec::Gb { a } => {
                let c = coclustering_value(prior, p)?;
                let pairs = (p * (p - 1) / 2) as f64;
                for (idx, z) in chain.iter().enumerate() {
                    let t = z.n_pairs_together() as f64;
                    table.rows.push(ChainRiskRow {
                        chain_index: idx,
                        partition: z.clone(),
                        loss_name: loss_spec.name(),
                        risk: a * c * pairs + (2.0 - a - 2.0 * c) * t,
                        method: RiskMethod::ClosedForm.label(),
                    });
                }
            }
            LossSpec::ViLb => {
                let c = coclustering_value(prior, p)?;
                for (idx, z) in chain.iter().enumerate() {
                    let risk = z
                        .cluster_sizes()
                        .iter()
                        .map(|&n| subadditivity_g(n, c))
                        .sum::<f64>()
                        / p as f64;
                    table.rows.push(ChainRiskRow {
                        chain_index: idx,
                        partition: z.clone(),
                        loss_name: loss_spec.name(),
                        risk,
                        method: format!("{}, constant omitted", RiskMethod::ClosedForm.label()),
                    });
                }
            }
            LossSpec::Vi => {
                for (idx, z) in chain.iter().enumerate() {
                    let mean = draws
                        .iter()
                        .map(|d| crate::loss::vi_loss(d, z))
                        .sum::<Result<f64>>()?
                        / mc_n as f64;
                    table.rows.push(ChainRiskRow {
                        chain_index: idx,
                        partition: z.clone(),
                        loss_name: loss_spec.name(),
                        risk: mean,
                        method: RiskMethod::MonteCarlo { n: mc_n, seed }.label(),
                    });
                }
            }
            other => {
                return Err(Error::UnsupportedMethod(format!(
                    "chain risk supports GB(a), VI, and VI-LB, not {other}"
                )))
            }
        }
    }
    Ok(table)
}
