//! Loss-calibrated prior analysis for Bayesian model selection on structured
//! model spaces.
//!
//! The crate covers the two classic spaces — binary inclusion vectors for
//! variable selection and set partitions for cluster analysis — and provides:
//!
//! * enumeration and partial-order structure for both spaces ([`model`]);
//! * the losses used to compare models: zero-one, generalized Hamming,
//!   generalized Binder, variation of information and its Jensen lower
//!   bound, plus explicit loss matrices ([`loss`]);
//! * prior families with exact pmf evaluation, sampling, marginal summaries,
//!   and hyperparameter calibration ([`prior`]);
//! * prior-risk profiles, risk-equilibrium and risk-penalization
//!   certification, and equilibrium-prior solving on explicit loss matrices
//!   ([`risk`]);
//! * Bayes estimators for every loss, with exhaustive oracles at small `p`
//!   and a greedy search for partitions ([`estimator`]).

pub mod error;
pub mod estimator;
pub mod loss;
pub mod model;
pub mod prior;
pub mod quad;
pub mod report;
pub mod risk;
pub mod rng;

pub use error::{Error, Result};
