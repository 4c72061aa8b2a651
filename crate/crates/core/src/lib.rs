//! Two-person DNA mixture analysis under the gamma/Dirichlet peak-size model.
//!
//! Relative peak sizes at each marker are modelled as Dirichlet with
//! concentration `β·μ`, where `μ` mixes the two contributors' allele counts
//! with proportion `θ` and `σ = 1/√(β+1)` measures peak imbalance. On top of
//! the exact per-marker likelihood this crate provides:
//!
//! * maximum likelihood for `σ` (θ integrated over a grid) or `(θ, σ)` jointly,
//!   with numerical Hessians and Wald intervals ([`estimator`]);
//! * likelihood ratios and their parametric bootstrap ([`likelihood`], [`bootstrap`]);
//! * a Gibbs sampler with adaptive rejection sampling for `β` ([`mcmc`]);
//! * sampled, certified top-k mixture deconvolution ([`deconvolution`]).

pub mod bootstrap;
pub mod datasets;
pub mod deconvolution;
pub mod error;
pub mod estimator;
pub mod likelihood;
pub mod mcmc;
pub mod model;
pub mod optimize;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use likelihood::{CaseModel, LogLik, ThetaGrid};
pub use model::{
    FrequencyTable, Genotype, GenotypeConfig, Hypothesis, MarkerData, MixtureDataset, ModelParams,
    Profile, Slot,
};
