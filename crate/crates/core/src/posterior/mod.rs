//! Gaussian posterior over network parameters.
//!
//! The covariance is `diag(f_unbiased + ε)^{-1} / (n ω)`: a diagonal empirical
//! Fisher accumulated from log-likelihood gradients, regularised by `ε`, and
//! scaled by the number of observed transitions `n` and the exploration scale
//! `ω`. A Kronecker-factored sampler is provided alongside for block posteriors.

mod fisher;
mod kfac;
mod sampling;

pub use fisher::{
    variance_reduced_coefficient, FisherAccumulator, FisherRule, LOG_LIKELIHOOD_SCALE,
    SQUARED_LOSS_SCALE,
};
pub use kfac::KroneckerBlock;
pub(crate) use sampling::sample_posterior_into;
pub use sampling::{epistemic_q_std, epistemic_q_stds, sample_posterior, PosteriorSpec};
