//! A latent-variable Gaussian model for non-contrastive self-supervised
//! learning.
//!
//! Data are generated as `z ~ latent`, `x | z ~ N(Wz, A)` and
//! `x⁺ | x ~ N(x, B)` with `W` a `d × k` orthonormal frame. The crate samples
//! the model, evaluates its exact likelihood, computes the two closed-form
//! maximum-likelihood estimators (PCA for isotropic noise, the minimizer of
//! `Σ‖Wᵀxᵢ − Wᵀxᵢ⁺‖²` for orthogonal-complement noise), checks them against
//! a numeric optimizer, and runs the Monte Carlo experiments comparing them.

pub mod error;
pub mod estimators;
pub mod experiments;
pub mod genmodel;
pub mod likelihood;
pub mod linalg;
pub mod metrics;
pub mod seed;

pub use error::{Error, Result};
pub use estimators::{fit_map, fit_numeric, fit_pca, fit_ssl, sample_posterior_mh, Method, SubspaceEstimate};
pub use genmodel::{make_params, sample_dataset, LatentSpec, ModelParams, NoiseModel, NoiseSpec, PairedDataset};
pub use likelihood::{log_posterior, neg_log_likelihood, sufficient_stats, PriorSpec, SufficientStats};
pub use linalg::{OrthonormalFrame, SymMatrix};
