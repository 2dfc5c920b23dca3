//! Variable-selection engine: conjugate linear-model marginal likelihoods,
//! exact posterior enumeration over the hypercube, synthetic-data
//! generation, and the replicated simulation study.

mod likelihood;
mod simulate;

pub use likelihood::{
    enumerate_posterior, log_marginal, log_marginal_centered, log_sum_exp, posterior_from_log_bf,
    CenteredData, LikelihoodConfig, LinearDataset, LogMarginal,
};
pub use simulate::{
    run_simulation, simulate_dataset, ReportTable, SimulationConfig, SimulationReport,
};
