use rand::Rng as _;

use super::config::DqnConfig;
use super::episode::Agent;
use super::learner::QLearner;
use super::policy::epsilon_greedy;
use super::replay::{ReplayBuffer, Transition};
use crate::error::Result;
use crate::nn::{Architecture, ParamVector};
use crate::rng::Rng;

/// Epsilon-greedy deep Q-learning with a target network.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    learner: QLearner,
    config: DqnConfig,
    grad: Vec<f64>,
}

impl DqnAgent {
    pub fn new(arch: Architecture, params: ParamVector, config: DqnConfig) -> Result<Self> {
        config.validate()?;
        let p = arch.num_params();
        let learner = QLearner::new(arch, params, config.learner.clone())?;
        Ok(DqnAgent {
            learner,
            config,
            grad: vec![0.0; p],
        })
    }

    pub fn learner(&self) -> &QLearner {
        &self.learner
    }

    pub fn config(&self) -> &DqnConfig {
        &self.config
    }

    /// Adam step on `Σ (G - q_θ(S, A))²` with `G` bootstrapped from θ̄
    /// (or from θ when the target network is disabled).
    pub fn update_on_batch(&mut self, batch: &[&Transition]) -> Result<()> {
        for t in batch {
            self.learner.check_transition(t)?;
        }
        let discount = self.learner.config.discount;
        self.grad.iter_mut().for_each(|g| *g = 0.0);
        for t in batch {
            let steps = self.learner.learner_steps();
            let QLearner {
                arch,
                online,
                target,
                bootstrap_cache,
                config,
                ..
            } = &mut self.learner;
            let bootstrap: &[f64] = if config.target_period == 0 {
                online
            } else {
                target
            };
            let g_target =
                QLearner::bootstrap_target(arch, bootstrap_cache, bootstrap, discount, t, steps)?;
            let q = self.learner.predict(t)?;
            let coef = -2.0 * (g_target - q);
            let QLearner {
                arch,
                online,
                cache,
                ..
            } = &mut self.learner;
            let grad = &mut self.grad;
            arch.visit_grad_rows(online, cache, t.action, |row| row.add_scaled(grad, coef));
        }
        self.learner.apply_gradient(&self.grad)?;
        self.learner.finish_step();
        Ok(())
    }
}

impl Agent for DqnAgent {
    fn begin_episode(&mut self, _episode: usize, _rng: &mut Rng) -> Result<()> {
        Ok(())
    }

    fn select_action(&mut self, observation: &[f64], rng: &mut Rng) -> Result<usize> {
        let q = self
            .learner
            .arch
            .forward(&self.learner.online, observation)?;
        epsilon_greedy(&q, self.config.epsilon, rng)
    }

    fn observe_steps(&mut self, _steps: usize) {}

    fn learn_step(&mut self, replay: &ReplayBuffer, rng: &mut Rng) -> Result<()> {
        let indices = replay.sample_indices(self.learner.config.batch_size, rng)?;
        let batch: Vec<&Transition> = indices
            .iter()
            .map(|&i| replay.get(i).expect("sampled index in range"))
            .collect();
        self.update_on_batch(&batch)
    }

    fn updates_per_step(&self) -> usize {
        self.learner.config.batches_per_step
    }
}

/// Uniformly random actions without learning.
#[derive(Debug, Clone, Copy)]
pub struct UniformAgent {
    pub num_actions: usize,
}

impl Agent for UniformAgent {
    fn begin_episode(&mut self, _episode: usize, _rng: &mut Rng) -> Result<()> {
        Ok(())
    }

    fn select_action(&mut self, _observation: &[f64], rng: &mut Rng) -> Result<usize> {
        Ok(rng.random_range(0..self.num_actions))
    }

    fn observe_steps(&mut self, _steps: usize) {}

    fn learn_step(&mut self, _replay: &ReplayBuffer, _rng: &mut Rng) -> Result<()> {
        Ok(())
    }

    fn updates_per_step(&self) -> usize {
        0
    }
}
