//! The galaxy clustering analysis: a grid of CRP concentrations against a
//! grid of losses, with Binder distances to a reference Bayes estimator and
//! cluster counts averaged over repeated fits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use riskcal_core::error::{Error, Result};
use riskcal_core::estimator::{greedy_minimizer, PartitionObjective, SearchConfig};
use riskcal_core::loss::gb_loss;
use riskcal_core::model::Partition;
use riskcal_core::report::ReportTable;
use riskcal_core::rng::child_seed;

use crate::dpmm::{coclustering_matrix, dpmm_sample, DpmmConfig, NigBase};

/// The 82 galaxy velocities (units of 1000 km/s) bundled with the crate.
pub fn galaxy_velocities() -> Vec<f64> {
    parse_velocities(include_str!("../../../data/galaxy.txt")).expect("bundled dataset parses")
}

/// Parse a newline-separated list of velocities.
pub fn parse_velocities(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        out.push(
            line.parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad velocity {line:?}: {e}")))?,
        );
    }
    if out.is_empty() {
        return Err(Error::Parse("no velocities found".into()));
    }
    Ok(out)
}

pub fn read_velocities(path: &std::path::Path) -> Result<Vec<f64>> {
    parse_velocities(&std::fs::read_to_string(path)?)
}

/// Pipeline configuration: loss weights, MCMC scale, search effort, repeats.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Generalized-Binder weights; each also fixes a prior column via
    /// θ = a / (2 - a), the risk-equilibrium concentration for GB(a).
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    /// Greedy-search restarts per estimator.
    pub restarts: usize,
    pub repeats: usize,
    pub seed: u64,
    /// Base measure; empirical-Bayes defaults from the data when absent.
    pub base: Option<NigBase>,
}

impl PipelineConfig {
    /// Desk-scale defaults: the seven-weight grid, 20k sweeps, 5 repeats.
    pub fn desk_scale(seed: u64) -> Self {
        Self {
            weights: vec![0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3],
            iterations: 20_000,
            burn_in: 5_000,
            thinning: 5,
            restarts: 16,
            repeats: 5,
            seed,
            base: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() {
            return Err(Error::Argument("empty weight grid".into()));
        }
        if self.weights.iter().any(|&a| !(a > 0.0 && a < 2.0)) {
            return Err(Error::Argument("weights must lie in (0,2)".into()));
        }
        if self.reference_column().is_none() {
            return Err(Error::Argument(
                "the weight grid must contain 1.0 (the reference pair)".into(),
            ));
        }
        if self.repeats < 1 {
            return Err(Error::Argument("need at least one repeat".into()));
        }
        Ok(())
    }

    fn reference_column(&self) -> Option<usize> {
        self.weights.iter().position(|&a| (a - 1.0).abs() < 1e-12)
    }
}

/// Pipeline outputs: Binder distances to the reference estimator and
/// cluster counts, rows = losses (GB grid, then VI, then VI-LB),
/// columns = priors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineReport {
    pub distance: ReportTable,
    pub clusters: ReportTable,
    /// Per-repeat cluster counts, indexed `[row][col][repeat]`.
    pub raw_clusters: Vec<Vec<Vec<f64>>>,
}

/// Estimators for one posterior draw set: one per GB weight, then the VI
/// and VI-LB minimizers.
fn column_estimators(
    draws: &crate::dpmm::PartitionDrawSet,
    weights: &[f64],
    search: &SearchConfig,
) -> Result<Vec<Partition>> {
    let c = coclustering_matrix(draws);
    let mut out = Vec::with_capacity(weights.len() + 2);
    for (row, &a) in weights.iter().enumerate() {
        let objective = PartitionObjective::GbCoClustering { c: c.clone(), a };
        let cfg = SearchConfig { seed: child_seed(search.seed, row as u64), ..search.clone() };
        out.push(greedy_minimizer(&objective, &cfg)?);
    }
    let vi = PartitionObjective::ViDraws { draws: draws.draws().to_vec() };
    let cfg = SearchConfig { seed: child_seed(search.seed, 1000), ..search.clone() };
    out.push(greedy_minimizer(&vi, &cfg)?);
    let vilb = PartitionObjective::ViLbCoClustering { c };
    let cfg = SearchConfig { seed: child_seed(search.seed, 1001), ..search.clone() };
    out.push(greedy_minimizer(&vilb, &cfg)?);
    Ok(out)
}

/// Run the full analysis on a dataset. Chains for each (repeat, prior)
/// pair run in parallel on split seeds; deterministic given the seed.
pub fn galaxy_pipeline(data: &[f64], cfg: &PipelineConfig) -> Result<PipelineReport> {
    cfg.validate()?;
    let base = cfg.base.unwrap_or_else(|| NigBase::empirical(data));
    let n_cols = cfg.weights.len();
    let n_rows = n_cols + 2;
    let ref_col = cfg.reference_column().expect("validated");
    let ref_row = ref_col; // GB rows precede VI rows, same order as weights

    // (repeat, column) -> estimators for every loss row.
    let jobs: Vec<(usize, usize)> = (0..cfg.repeats)
        .flat_map(|r| (0..n_cols).map(move |j| (r, j)))
        .collect();
    let fitted: Vec<Result<Vec<Partition>>> = jobs
        .par_iter()
        .map(|&(repeat, col)| {
            let a = cfg.weights[col];
            let chain_seed = child_seed(cfg.seed, (repeat * n_cols + col) as u64);
            let mcmc = DpmmConfig {
                theta: a / (2.0 - a),
                base,
                iterations: cfg.iterations,
                burn_in: cfg.burn_in,
                thinning: cfg.thinning,
                seed: chain_seed,
                prior_only: false,
            };
            let draws = dpmm_sample(data, &mcmc)
                .map_err(|e| Error::Argument(format!("repeat {repeat}, column {col}: {e}")))?;
            let search = SearchConfig {
                restarts: cfg.restarts,
                seed: child_seed(chain_seed, 1),
                ..Default::default()
            };
            column_estimators(&draws, &cfg.weights, &search)
        })
        .collect();

    let mut estimates = vec![vec![Vec::new(); n_cols]; cfg.repeats];
    for (&(repeat, col), res) in jobs.iter().zip(fitted) {
        estimates[repeat][col] = res?;
    }

    let mut distance_cells = vec![vec![Vec::with_capacity(cfg.repeats); n_cols]; n_rows];
    let mut cluster_cells = vec![vec![Vec::with_capacity(cfg.repeats); n_cols]; n_rows];
    for per_column in &estimates {
        let reference = &per_column[ref_col][ref_row];
        for (col, ests) in per_column.iter().enumerate() {
            for (row, est) in ests.iter().enumerate() {
                distance_cells[row][col].push(gb_loss(est, reference, 1.0)?);
                cluster_cells[row][col].push(est.n_clusters() as f64);
            }
        }
    }

    let mut row_names: Vec<String> =
        cfg.weights.iter().map(|a| format!("GB({a})")).collect();
    row_names.push("VI".into());
    row_names.push("VI-LB".into());
    let col_names: Vec<String> = cfg
        .weights
        .iter()
        .map(|a| format!("crp({:.4})", a / (2.0 - a)))
        .collect();

    Ok(PipelineReport {
        distance: ReportTable::from_replicates(
            row_names.clone(),
            col_names.clone(),
            &distance_cells,
        ),
        clusters: ReportTable::from_replicates(row_names, col_names, &cluster_cells),
        raw_clusters: cluster_cells,
    })
}
