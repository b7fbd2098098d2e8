//! Pairwise isotropic Gaussian Markov random fields on a torus.
//!
//! Gibbs simulation, patch moments, maximum pseudo-likelihood estimation
//! of the coupling, and closed-form KL divergences between two models,
//! for scalar and vector-valued sites.

pub mod divergence;
pub mod error;
pub mod estimation;
pub mod io;
pub mod lattice;
pub mod moments;
pub mod oracle;
pub mod params;
pub mod sampler;

pub use divergence::{
    kl_directed_multivariate, kl_directed_univariate, kl_multivariate, kl_symmetrized_closed_form,
    kl_univariate, kl_univariate_vectorized, KLReport, KLTerms, MultiKLInputs, TraceTerms,
    UniKLInputs,
};
pub use error::{GmrfError, Result};
pub use estimation::{
    estimate_beta_multivariate, estimate_beta_multivariate_moments, estimate_beta_univariate,
    estimate_beta_univariate_direct, estimate_multi_params, estimate_multi_params_from_moments,
    estimate_params, estimate_params_from_moments, log_pseudo_likelihood,
    log_pseudo_likelihood_multivariate, EstimationReport, MultiEstimationReport,
};
pub use lattice::{LatticeField, MultiLatticeField, NeighborhoodOrder, NeighborhoodSpec, Patch};
pub use moments::{
    multi_patch_moments, multi_patch_moments_about, patch_moments, patch_moments_about, plus_norm,
    pooled_multi_patch_moments, pooled_patch_moments, MultiPatchMoments, PatchMoments, PlusNorm,
};
pub use oracle::{
    gaussian_kl_reference, gaussian_kl_reference_multi, mc_kl_multivariate, mc_kl_univariate,
    OracleReport,
};
pub use params::{ModelParams, MultiModelParams};
pub use sampler::{simulate, simulate_multivariate, SimConfig, Simulation};
