use rand::Rng;
use rand_distr::StandardNormal;

use super::{Environment, TimeStep};
use crate::error::{Error, Result};
use crate::rng;

/// A reward drawn from `N(mu_true, 1)`.
pub fn gaussian_bandit_step<R: Rng + ?Sized>(mu_true: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    mu_true + z
}

/// Single state, single action, episodes of length one with `N(mu, 1)` rewards.
#[derive(Debug, Clone)]
pub struct GaussianBandit {
    mu: f64,
    rng: rng::Rng,
    done: bool,
}

impl GaussianBandit {
    pub fn new(mu: f64, seed: u64) -> Self {
        GaussianBandit {
            mu,
            rng: rng::seeded(seed),
            done: true,
        }
    }

    pub fn mean(&self) -> f64 {
        self.mu
    }
}

impl Environment for GaussianBandit {
    fn observation_size(&self) -> usize {
        1
    }

    fn num_actions(&self) -> usize {
        1
    }

    fn reset(&mut self) -> TimeStep {
        self.done = false;
        TimeStep {
            observation: vec![1.0],
            reward: 0.0,
            terminal: false,
        }
    }

    fn step(&mut self, action: usize) -> Result<TimeStep> {
        if self.done {
            return Err(Error::Contract("step called on a finished episode".into()));
        }
        if action != 0 {
            return Err(Error::Contract(format!("bandit action {action} not 0")));
        }
        self.done = true;
        Ok(TimeStep {
            observation: vec![1.0],
            reward: gaussian_bandit_step(self.mu, &mut self.rng),
            terminal: true,
        })
    }

    fn state_index(&self) -> Option<usize> {
        (!self.done).then_some(0)
    }
}
