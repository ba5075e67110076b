//! Inference of strain number, strain proportions and panmixia from per-SNP
//! read counts with a beta-binomial finite mixture model.
//!
//! The crate is split along the pipeline:
//!
//! - [`model`]: bands, band weights, beta-binomial emission, likelihood
//! - [`data`]: read-count tables, QC filters, pooled PLAF
//! - [`inference`]: Metropolis-Hastings at fixed `k`, posterior summaries
//! - [`selection`]: BIC / harmonic-mean scoring over `k` and restricted models
//! - [`simulator`]: synthetic samples and the simulation study

pub mod data;
pub mod error;
pub mod inference;
pub mod model;
pub mod seed;
pub mod selection;
pub mod simulator;
pub mod special;

pub use data::{apply_filters, compute_plaf, load_counts, Dataset, FilterConfig, FilterReport, InputFormat};
pub use error::{Error, Result};
pub use inference::{
    max_observed_log_likelihood, run_chain, run_restricted_chain, summarize, McmcConfig,
    PosteriorChain, PosteriorSummary, PriorSpec, Restriction,
};
pub use model::{
    band_weights, band_wsaf, beta_binomial_log_pmf, sample_log_likelihood, snp_log_likelihood,
    BandSet, ModelParams, Plaf, SampleData, SnpCounts,
};
pub use selection::{
    bic, harmonic_mean_log_marginal, select_k, select_k_detailed, select_k_with, ModelScore, SelectionResult,
};
pub use simulator::{run_study, simulate_sample, SimConfig, StudyGrid};
