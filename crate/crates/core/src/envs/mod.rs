//! Benchmark environments sharing a flat feature-vector observation contract.

mod bandit;
mod deep_sea;

pub use bandit::{gaussian_bandit_step, GaussianBandit};
pub use deep_sea::{DeepSea, DeepSeaConfig, ACTION_RIGHT};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeStep {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
}

/// Episodic environment with discrete actions.
pub trait Environment {
    fn observation_size(&self) -> usize;

    fn num_actions(&self) -> usize;

    /// Starts a new episode and returns its first observation (reward 0).
    fn reset(&mut self) -> TimeStep;

    /// Fails with a contract error after the episode has terminated.
    fn step(&mut self, action: usize) -> Result<TimeStep>;

    /// Whether the episode that just ended counts as a success.
    fn episode_success(&self) -> bool {
        false
    }

    /// Index of the current discrete state, for visit counting.
    fn state_index(&self) -> Option<usize> {
        None
    }
}
