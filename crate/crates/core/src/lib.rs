//! Bayesian calibration of compartmental and cohort disease models.
//!
//! The crate is `no_std` (with `alloc`) and contains the numerical pieces of
//! a calibration run:
//!
//! * [`targets`]: Gaussian calibration targets, the mode-normalized
//!   likelihood, the GOF statistic and its χ² tail probability.
//! * [`priors`]: per-parameter priors and the independent joint prior.
//! * [`sis`]: the two-compartment SIS ODE model.
//! * [`hpv`]: a strain-stratified monthly cohort microsimulation of HPV
//!   natural history.
//! * [`sampler`]: random-walk Metropolis-Hastings with random block updates.
//! * [`diagnostics`]: Gelman-Rubin, autocorrelation, cross-correlation,
//!   likelihood profiles and prior/posterior comparisons.
//!
//! File formats, configuration and the command line live in the `bayescal`
//! crate.
#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod diagnostics;
mod error;
pub mod hpv;
pub mod model;
pub mod priors;
pub mod sampler;
pub mod sis;
pub mod special;
pub mod stats;
pub mod targets;

pub use error::{Error, Result};
pub use model::Model;
pub use priors::{JointPrior, ParameterPrior, PriorSpec};
pub use sampler::{Chain, ChainSet, ParameterVector, ProposalSpec, SamplerOptions};
pub use targets::{ModelOutputs, Target, TargetSet};

/// Random source used by every sampling routine in the crate.
pub type Rng = rand_chacha::ChaCha8Rng;
