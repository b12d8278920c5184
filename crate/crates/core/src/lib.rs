//! Likelihood ratios for pairs of minutia configurations under a marked
//! Poisson point process model.
//!
//! A fingerprint `A` and a fingermark `B` are modelled as thinned, displaced
//! and similarity-mapped copies of latent minutia configurations. Under the
//! prosecution hypothesis both share one latent configuration; under the
//! defence hypothesis they come from independent ones. This crate provides
//!
//! * the domain types ([`Minutia`], [`MinutiaConfig`], [`Matching`]),
//! * special functions and samplers ([`special`], [`sampling`]),
//! * the model densities ([`model`]),
//! * a Metropolis-within-Gibbs sampler over the nuisance parameters and the
//!   unknown matching ([`mcmc`]),
//! * Chib's marginal likelihood estimator and the final log10 likelihood
//!   ratio ([`chib`]),
//! * fixed-parameter estimation from matching-augmented pairs ([`estimation`]),
//! * a generative simulator ([`simulate`]) and ROC/histogram summaries
//!   ([`eval`]).
//!
//! The crate is `no_std` and only needs `alloc`. File formats, parallel batch
//! scoring and the command line live in the companion `fpmatch` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

mod error;

pub mod assignment;
pub mod chib;
pub mod estimation;
pub mod eval;
pub mod mcmc;
pub mod model;
pub mod quadrature;
pub mod sampling;
pub mod simulate;
pub mod special;
pub mod types;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use types::{Matching, Minutia, MinutiaConfig, MinutiaType, SimilarityTransform};
