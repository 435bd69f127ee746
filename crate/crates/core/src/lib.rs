//! Epistemic value estimation (EVE) for Q-learning.
//!
//! The crate keeps a Gaussian posterior over *all* parameters of a Q-network.
//! The posterior is centred on the (target-network) maximum-likelihood estimate
//! and its covariance is the inverse of a diagonal empirical Fisher scaled by
//! the number of observed transitions. Posterior draws drive Thompson-sampling
//! exploration both when acting and when bootstrapping value targets.
//!
//! Modules:
//! - [`nn`]: leaky-ReLU MLP with exact per-example gradients and Adam.
//! - [`posterior`]: Fisher accumulation, posterior sampling, epistemic
//!   statistics and a Kronecker-factored sampler.
//! - [`agent`]: replay buffer, the baseline DQN and the epistemic Q-learning agent.
//! - [`envs`]: Deep Sea (deterministic and noisy) and a Gaussian bandit.
//! - [`harness`]: seeded runs, sweeps, the uncertainty probe and oracle checks.

pub mod agent;
pub mod envs;
pub mod error;
pub mod harness;
pub mod nn;
pub mod posterior;
pub mod rng;

pub use error::{Error, Result};
