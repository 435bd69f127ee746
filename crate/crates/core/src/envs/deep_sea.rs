use rand::Rng;
use rand_distr::StandardNormal;

use super::{Environment, TimeStep};
use crate::error::{Error, Result};
use crate::rng;

/// Action index whose un-randomised meaning is "move right".
pub const ACTION_RIGHT: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct DeepSeaConfig {
    pub size: usize,
    /// Cost of one right move; `None` means `0.01 / size`.
    pub move_cost: Option<f64>,
    pub treasure_reward: f64,
    pub randomize_actions: bool,
    /// Standard deviation of Gaussian noise added to every reward.
    pub reward_noise_std: f64,
    pub seed: u64,
}

impl DeepSeaConfig {
    pub fn new(size: usize, seed: u64) -> Self {
        DeepSeaConfig {
            size,
            move_cost: None,
            treasure_reward: 1.0,
            randomize_actions: true,
            reward_noise_std: 0.0,
            seed,
        }
    }

    pub fn stochastic(size: usize, reward_noise_std: f64, seed: u64) -> Self {
        DeepSeaConfig {
            reward_noise_std,
            ..Self::new(size, seed)
        }
    }

    pub fn effective_move_cost(&self) -> f64 {
        self.move_cost.unwrap_or(0.01 / self.size as f64)
    }

    fn validate(&self) -> Result<()> {
        if self.size < 2 {
            return Err(Error::config("size", "deep sea needs size >= 2"));
        }
        if !(self.effective_move_cost() >= 0.0 && self.effective_move_cost().is_finite()) {
            return Err(Error::config("move_cost", "must be finite and >= 0"));
        }
        if !(self.reward_noise_std >= 0.0 && self.reward_noise_std.is_finite()) {
            return Err(Error::config("reward_noise_std", "must be finite and >= 0"));
        }
        if !self.treasure_reward.is_finite() {
            return Err(Error::config("treasure_reward", "must be finite"));
        }
        Ok(())
    }
}

/// `L x L` grid. The diver starts top-left, descends one row per step and
/// moves one column left or right. Only the action sequence that moves right
/// on every one of the `L` steps collects the treasure; each right move costs
/// `move_cost`. With `randomize_actions`, each cell flips the meaning of the
/// two actions according to a fixed Bernoulli(1/2) bit drawn from the seed.
#[derive(Debug, Clone)]
pub struct DeepSea {
    config: DeepSeaConfig,
    /// `flip[row * L + col]`: whether action 1 means "left" in that cell.
    flip: Vec<bool>,
    row: usize,
    column: usize,
    done: bool,
    success: bool,
    noise_rng: rng::Rng,
}

impl DeepSea {
    pub fn new(config: DeepSeaConfig) -> Result<Self> {
        config.validate()?;
        let size = config.size;
        let mut mapping_rng = rng::derived(config.seed, 0);
        let flip = (0..size * size)
            .map(|_| config.randomize_actions && mapping_rng.random_bool(0.5))
            .collect();
        let noise_rng = rng::derived(config.seed, 1);
        Ok(DeepSea {
            config,
            flip,
            row: 0,
            column: 0,
            done: true,
            success: false,
            noise_rng,
        })
    }

    pub fn config(&self) -> &DeepSeaConfig {
        &self.config
    }

    pub fn size(&self) -> usize {
        self.config.size
    }

    pub fn position(&self) -> (usize, usize) {
        (self.row, self.column)
    }

    /// Whether action 1 is "left" in cell `(row, col)`.
    pub fn is_flipped(&self, row: usize, col: usize) -> bool {
        self.flip[row * self.config.size + col]
    }

    /// The raw action that moves right from `(row, col)`.
    pub fn right_action(&self, row: usize, col: usize) -> usize {
        if self.is_flipped(row, col) {
            1 - ACTION_RIGHT
        } else {
            ACTION_RIGHT
        }
    }

    /// One-hot of `(row, col)`; all zeros once the diver has left the grid.
    pub fn observation_of(size: usize, row: usize, col: usize) -> Vec<f64> {
        let mut obs = vec![0.0; size * size];
        if row < size {
            obs[row * size + col] = 1.0;
        }
        obs
    }

    /// `(row, col)` for a one-hot observation index.
    pub fn cell_of(size: usize, index: usize) -> (usize, usize) {
        (index / size, index % size)
    }

    fn noise(&mut self) -> f64 {
        if self.config.reward_noise_std > 0.0 {
            let z: f64 = self.noise_rng.sample(StandardNormal);
            self.config.reward_noise_std * z
        } else {
            0.0
        }
    }
}

impl Environment for DeepSea {
    fn observation_size(&self) -> usize {
        self.config.size * self.config.size
    }

    fn num_actions(&self) -> usize {
        2
    }

    fn reset(&mut self) -> TimeStep {
        self.row = 0;
        self.column = 0;
        self.done = false;
        self.success = false;
        TimeStep {
            observation: Self::observation_of(self.config.size, 0, 0),
            reward: 0.0,
            terminal: false,
        }
    }

    fn step(&mut self, action: usize) -> Result<TimeStep> {
        if self.done {
            return Err(Error::Contract("step called on a finished episode".into()));
        }
        if action > 1 {
            return Err(Error::Contract(format!(
                "deep sea action {action} not in {{0, 1}}"
            )));
        }
        let size = self.config.size;
        let move_right = (action == ACTION_RIGHT) != self.is_flipped(self.row, self.column);
        let mut reward = 0.0;
        if move_right {
            if self.row == size - 1 && self.column == size - 1 {
                reward += self.config.treasure_reward;
                self.success = true;
            }
            reward -= self.config.effective_move_cost();
            self.column = (self.column + 1).min(size - 1);
        } else {
            self.column = self.column.saturating_sub(1);
        }
        reward += self.noise();
        self.row += 1;
        self.done = self.row == size;
        Ok(TimeStep {
            observation: Self::observation_of(size, self.row, self.column),
            reward,
            terminal: self.done,
        })
    }

    fn episode_success(&self) -> bool {
        self.success
    }

    fn state_index(&self) -> Option<usize> {
        (self.row < self.config.size).then(|| self.row * self.config.size + self.column)
    }
}
