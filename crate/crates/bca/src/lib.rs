//! Cluster-analysis engine: a conjugate Dirichlet-process mixture Gibbs
//! sampler for univariate data, partition-draw ingestion, co-clustering
//! computation, and the galaxy analysis pipeline.

mod dpmm;
mod pipeline;

pub use dpmm::{
    coclustering_matrix, dpmm_sample, DpmmConfig, NigBase, PartitionDrawSet, Provenance,
};
pub use pipeline::{
    galaxy_pipeline, galaxy_velocities, parse_velocities, read_velocities, PipelineConfig,
    PipelineReport,
};
