use rand::Rng as _;
use rand_distr::StandardNormal;

use super::config::{Acting, Bootstrap, EveConfig, FisherMode};
use super::episode::Agent;
use super::learner::QLearner;
use super::policy::{epsilon_greedy, greedy_action};
use super::replay::{ReplayBuffer, Transition};
use crate::error::Result;
use crate::nn::{Architecture, ParamVector};
use crate::posterior::{sample_posterior_into, FisherAccumulator, PosteriorSpec};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ActingMode {
    Uniform,
    Sampled,
    EpsilonGreedy,
}

/// Epistemic Q-learning.
///
/// Keeps online parameters θ, target parameters θ̄ and a diagonal Fisher
/// estimate. The posterior is `N(θ̄, diag(f/m + ε)^{-1} / (n ω))`.
///
/// Acting: uniformly random for the first `burnin_episodes`, then greedy with
/// respect to one posterior draw per episode. Learning runs during burn-in
/// too, with bootstrap targets taken from θ̄ until posterior sampling starts.
///
/// Each learner update draws a batch, draws θ' from the posterior, and
/// regresses `q_θ(S, A)` towards `G = R + γ max_a q_θ'(S', a)` (just `R` on
/// terminal transitions) with Adam. The Fisher diagonal is fed the gradient of
/// the same loss towards the modelled return `Z' = G + γη`, `η ~ N(0, σ²)`.
/// Both gradients are evaluated at the pre-update θ and share one backward
/// pass per transition.
#[derive(Debug, Clone)]
pub struct EveAgent {
    learner: QLearner,
    fisher: FisherAccumulator,
    config: EveConfig,
    acting_params: ParamVector,
    bootstrap_params: ParamVector,
    mode: ActingMode,
    /// False during burn-in: bootstrap targets then use θ̄ instead of a draw.
    sampling: bool,
    grad_mle: Vec<f64>,
    grad_fisher: Vec<f64>,
    fisher_squares: Vec<f64>,
    indices: Vec<usize>,
}

impl EveAgent {
    pub fn new(arch: Architecture, params: ParamVector, config: EveConfig) -> Result<Self> {
        config.validate()?;
        let p = arch.num_params();
        let fisher = FisherAccumulator::with_rule(
            p,
            config.fisher_beta,
            config.fisher_epsilon,
            config.omega,
            config.fisher_rule,
        )?;
        let learner = QLearner::new(arch, params.clone(), config.learner.clone())?;
        let sampling = config.burnin_episodes == 0;
        Ok(EveAgent {
            learner,
            fisher,
            config,
            acting_params: params.clone(),
            bootstrap_params: params,
            mode: ActingMode::Uniform,
            sampling,
            grad_mle: vec![0.0; p],
            grad_fisher: vec![0.0; p],
            fisher_squares: vec![0.0; p],
            indices: Vec::new(),
        })
    }

    pub fn config(&self) -> &EveConfig {
        &self.config
    }

    pub fn learner(&self) -> &QLearner {
        &self.learner
    }

    pub fn fisher(&self) -> &FisherAccumulator {
        &self.fisher
    }

    pub fn fisher_mut(&mut self) -> &mut FisherAccumulator {
        &mut self.fisher
    }

    /// Posterior around the target parameters θ̄.
    pub fn posterior(&self) -> Result<PosteriorSpec> {
        PosteriorSpec::new(&self.fisher, &self.learner.target)
    }

    pub fn sample_parameters(&self, rng: &mut Rng) -> Result<ParamVector> {
        let mut out = ParamVector::zeros(self.learner.target.len());
        sample_posterior_into(&self.fisher, &self.learner.target, rng, &mut out)?;
        Ok(out)
    }

    /// Parameters used for acting in the current episode.
    pub fn acting_parameters(&self) -> &ParamVector {
        &self.acting_params
    }

    /// Whether bootstrap targets currently use posterior draws.
    pub fn is_sampling(&self) -> bool {
        self.sampling
    }

    /// One learner update on an explicit batch.
    pub fn update_on_batch(&mut self, batch: &[&Transition], rng: &mut Rng) -> Result<()> {
        for t in batch {
            self.learner.check_transition(t)?;
        }
        let discount = self.learner.config.discount;
        let noise_std = self.config.return_variance.sqrt();
        let per_batch_draw = !self.config.per_transition_draw;
        let use_posterior = self.config.bootstrap == Bootstrap::Posterior && self.sampling;

        if use_posterior && per_batch_draw {
            sample_posterior_into(
                &self.fisher,
                &self.learner.target,
                rng,
                &mut self.bootstrap_params,
            )?;
        }
        self.grad_mle.fill(0.0);
        match (self.config.fisher, self.config.per_example_fisher) {
            (FisherMode::Noisy, false) => self.grad_fisher.fill(0.0),
            (FisherMode::MleGradient, false) => {}
            _ => self.fisher_squares.fill(0.0),
        }

        for t in batch {
            if use_posterior && !per_batch_draw {
                sample_posterior_into(
                    &self.fisher,
                    &self.learner.target,
                    rng,
                    &mut self.bootstrap_params,
                )?;
            }
            let steps = self.learner.learner_steps();
            let bootstrap: &[f64] = match (self.config.bootstrap, use_posterior) {
                (_, true) => &self.bootstrap_params,
                (Bootstrap::Posterior, false) => &self.learner.target,
                (Bootstrap::Mle, false) => &self.learner.online,
            };
            let target = QLearner::bootstrap_target(
                &self.learner.arch,
                &mut self.learner.bootstrap_cache,
                bootstrap,
                discount,
                t,
                steps,
            )?;
            let q = self.learner.predict(t)?;
            let eta: f64 = rng.sample(StandardNormal);
            let modelled_return = target + discount * noise_std * eta;

            let mle_coef = -2.0 * (target - q);
            let noisy_coef = -2.0 * (modelled_return - q);
            let QLearner {
                arch,
                online,
                cache,
                ..
            } = &mut self.learner;
            let grad_mle = &mut self.grad_mle;
            let squares = &mut self.fisher_squares;
            let grad_fisher = &mut self.grad_fisher;
            match (self.config.fisher, self.config.per_example_fisher) {
                (FisherMode::Noisy, false) => {
                    arch.visit_grad_rows(online, cache, t.action, |row| {
                        row.add_scaled(grad_mle, mle_coef);
                        row.add_scaled(grad_fisher, noisy_coef);
                    });
                }
                (FisherMode::Noisy, true) => {
                    arch.visit_grad_rows(online, cache, t.action, |row| {
                        row.add_scaled(grad_mle, mle_coef);
                        row.add_squared(squares, noisy_coef);
                    });
                }
                (FisherMode::VarianceReduced, _) => {
                    // E_η[(-2 (δ + γση) g)^2] = 4 (δ² + γ²σ²) g²
                    let td = target - q;
                    let c = 4.0 * (td * td + discount * discount * self.config.return_variance);
                    let root = c.sqrt();
                    arch.visit_grad_rows(online, cache, t.action, |row| {
                        row.add_scaled(grad_mle, mle_coef);
                        row.add_squared(squares, root);
                    });
                }
                (FisherMode::MleGradient, false) => {
                    arch.visit_grad_rows(online, cache, t.action, |row| {
                        row.add_scaled(grad_mle, mle_coef);
                    });
                }
                (FisherMode::MleGradient, true) => {
                    arch.visit_grad_rows(online, cache, t.action, |row| {
                        row.add_scaled(grad_mle, mle_coef);
                        row.add_squared(squares, mle_coef);
                    });
                }
            }
        }

        self.learner.apply_gradient(&self.grad_mle)?;
        match (self.config.fisher, self.config.per_example_fisher) {
            (FisherMode::Noisy, false) => self.fisher.update(&self.grad_fisher)?,
            (FisherMode::MleGradient, false) => self.fisher.update(&self.grad_mle)?,
            _ => self.fisher.update_with_squares(&self.fisher_squares)?,
        }
        self.learner.finish_step();
        Ok(())
    }
}

impl Agent for EveAgent {
    fn begin_episode(&mut self, episode: usize, rng: &mut Rng) -> Result<()> {
        self.sampling = episode >= self.config.burnin_episodes;
        self.mode = if episode < self.config.burnin_episodes {
            ActingMode::Uniform
        } else {
            match self.config.acting {
                Acting::Thompson => ActingMode::Sampled,
                Acting::EpsilonGreedy => ActingMode::EpsilonGreedy,
            }
        };
        if self.mode == ActingMode::Sampled {
            sample_posterior_into(
                &self.fisher,
                &self.learner.target,
                rng,
                &mut self.acting_params,
            )?;
        }
        Ok(())
    }

    fn select_action(&mut self, observation: &[f64], rng: &mut Rng) -> Result<usize> {
        match self.mode {
            ActingMode::Uniform => Ok(rng.random_range(0..self.learner.arch.num_actions())),
            ActingMode::Sampled => {
                let params = std::mem::take(&mut self.acting_params);
                let q = self.learner.arch.forward(&params, observation);
                self.acting_params = params;
                greedy_action(&q?, rng)
            }
            ActingMode::EpsilonGreedy => {
                let q = self
                    .learner
                    .arch
                    .forward(&self.learner.online, observation)?;
                epsilon_greedy(&q, self.config.epsilon, rng)
            }
        }
    }

    fn observe_steps(&mut self, steps: usize) {
        self.fisher.observe(steps);
    }

    fn learn_step(&mut self, replay: &ReplayBuffer, rng: &mut Rng) -> Result<()> {
        let mut indices = std::mem::take(&mut self.indices);
        indices.clear();
        indices.extend(replay.sample_indices(self.learner.config.batch_size, rng)?);
        let batch: Vec<&Transition> = indices
            .iter()
            .map(|&i| replay.get(i).expect("sampled index in range"))
            .collect();
        let result = self.update_on_batch(&batch, rng);
        self.indices = indices;
        result
    }

    fn updates_per_step(&self) -> usize {
        self.learner.config.batches_per_step
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::config::LearnerConfig;
    use crate::agent::dqn::DqnAgent;
    use crate::agent::episode::run_episode;
    use crate::agent::DqnConfig;
    use crate::envs::{DeepSea, DeepSeaConfig, Environment};
    use crate::nn::Activation;
    use crate::rng;

    fn deep_sea(size: usize) -> DeepSea {
        DeepSea::new(DeepSeaConfig::new(size, 3)).unwrap()
    }

    fn agent(size: usize, config: EveConfig, seed: u64) -> EveAgent {
        let arch = Architecture::new(&[size * size, 8, 2], Activation::leaky()).unwrap();
        let params = arch.init_params(seed);
        EveAgent::new(arch, params, config).unwrap()
    }

    fn collapse(agent: &mut EveAgent) {
        let p = agent.fisher().len();
        agent.fisher_mut().set_diagonal(vec![1e300; p]).unwrap();
    }

    #[test]
    fn burn_in_actions_ignore_parameters() {
        let config = EveConfig::default();
        let mut a = agent(4, config.clone(), 1);
        let mut b = agent(4, config, 2);
        let obs = DeepSea::observation_of(4, 0, 0);
        let mut ra = rng::seeded(5);
        let mut rb = rng::seeded(5);
        a.begin_episode(0, &mut ra).unwrap();
        b.begin_episode(0, &mut rb).unwrap();
        let mut ones = 0;
        for _ in 0..2000 {
            let x = a.select_action(&obs, &mut ra).unwrap();
            assert_eq!(x, b.select_action(&obs, &mut rb).unwrap());
            ones += x;
        }
        assert!((ones as f64 / 2000.0 - 0.5).abs() < 0.05);
    }

    #[test]
    fn collapsed_posterior_acts_greedily_on_target() {
        let config = EveConfig {
            burnin_episodes: 0,
            ..EveConfig::default()
        };
        let mut a = agent(5, config, 4);
        collapse(&mut a);
        let mut r = rng::seeded(0);
        a.begin_episode(0, &mut r).unwrap();
        let arch = a.learner().arch().clone();
        let target = a.learner().target().clone();
        for row in 0..5 {
            for col in 0..=row {
                let obs = DeepSea::observation_of(5, row, col);
                let q = arch.forward(&target, &obs).unwrap();
                let greedy = if q[0] > q[1] { 0 } else { 1 };
                assert_eq!(a.select_action(&obs, &mut r).unwrap(), greedy);
            }
        }
    }

    #[test]
    fn identical_seeds_give_identical_trajectories() {
        let play = || {
            let config = EveConfig {
                burnin_episodes: 2,
                learner: LearnerConfig {
                    batches_per_step: 2,
                    ..LearnerConfig::default()
                },
                ..EveConfig::default()
            };
            let mut a = agent(4, config, 7);
            let mut env = deep_sea(4);
            let mut replay = ReplayBuffer::unbounded();
            let mut r = rng::seeded(9);
            (0..6)
                .map(|e| {
                    run_episode(&mut a, &mut env, &mut replay, e, &mut r, true)
                        .unwrap()
                        .actions
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(play(), play());
    }

    #[test]
    fn zero_discount_regresses_to_the_reward() {
        let config = EveConfig {
            learner: LearnerConfig {
                discount: 0.0,
                batch_size: 1,
                ..LearnerConfig::default()
            },
            burnin_episodes: 0,
            ..EveConfig::default()
        };
        let arch = Architecture::new(&[1, 8, 1], Activation::leaky()).unwrap();
        let params = arch.init_params(0);
        let mut a = EveAgent::new(arch.clone(), params, config).unwrap();
        let mut replay = ReplayBuffer::unbounded();
        replay
            .push(Transition {
                state: vec![1.0],
                action: 0,
                reward: 1.0,
                next_state: vec![1.0],
                terminal: false,
            })
            .unwrap();
        let mut r = rng::seeded(1);
        for _ in 0..5000 {
            a.learn_step(&replay, &mut r).unwrap();
        }
        let q = arch.forward(a.learner().online(), &[1.0]).unwrap()[0];
        assert!((q - 1.0).abs() < 0.01, "q = {q}");
    }

    #[test]
    fn noise_free_collapsed_update_matches_dqn_bitwise() {
        let learner = LearnerConfig::default();
        let config = EveConfig {
            learner: learner.clone(),
            burnin_episodes: 0,
            return_variance: 0.0,
            ..EveConfig::default()
        };
        let mut eve = agent(4, config, 11);
        collapse(&mut eve);
        let arch = eve.learner().arch().clone();
        let mut dqn = DqnAgent::new(
            arch.clone(),
            arch.init_params(11),
            DqnConfig {
                learner,
                epsilon: 0.0,
            },
        )
        .unwrap();

        let mut env = deep_sea(4);
        let mut replay = ReplayBuffer::unbounded();
        let mut r = rng::seeded(2);
        let mut uniform = crate::agent::UniformAgent { num_actions: 2 };
        for e in 0..5 {
            run_episode(&mut uniform, &mut env, &mut replay, e, &mut r, false).unwrap();
        }
        for step in 0..12 {
            let batch: Vec<&Transition> = replay
                .sample_indices(12, &mut r)
                .unwrap()
                .into_iter()
                .map(|i| replay.get(i).unwrap())
                .collect();
            eve.update_on_batch(&batch, &mut r).unwrap();
            dqn.update_on_batch(&batch).unwrap();
            assert_eq!(
                eve.learner().online(),
                dqn.learner().online(),
                "step {step}"
            );
            assert_eq!(
                eve.learner().target(),
                dqn.learner().target(),
                "step {step}"
            );
        }
    }

    #[test]
    fn terminal_targets_ignore_the_next_state() {
        let a = agent(3, EveConfig::default(), 0);
        let mut cache = crate::nn::ForwardCache::default();
        let t = Transition {
            state: DeepSea::observation_of(3, 2, 0),
            action: 1,
            reward: 1.0,
            next_state: vec![1e3; 9],
            terminal: true,
        };
        let huge = ParamVector::from_vec(vec![1e5; a.learner().online().len()]);
        let g =
            QLearner::bootstrap_target(a.learner().arch(), &mut cache, &huge, 0.99, &t, 0).unwrap();
        assert_eq!(g, 1.0);
    }

    #[test]
    fn bookkeeping_invariants_hold_over_a_run() {
        let size = 4;
        let config = EveConfig {
            burnin_episodes: 3,
            learner: LearnerConfig {
                batches_per_step: 3,
                target_period: 4,
                ..LearnerConfig::default()
            },
            ..EveConfig::default()
        };
        let mut a = agent(size, config, 5);
        let mut env = deep_sea(size);
        let mut replay = ReplayBuffer::unbounded();
        let mut r = rng::seeded(6);
        let mut history = vec![a.learner().online().clone()];
        let mut last_target = a.learner().target().clone();
        for e in 0..8 {
            a.begin_episode(e, &mut r).unwrap();
            let mut ts = env.reset();
            loop {
                let action = a.select_action(&ts.observation, &mut r).unwrap();
                let next = env.step(action).unwrap();
                replay
                    .push(Transition {
                        state: ts.observation.clone(),
                        action,
                        reward: next.reward,
                        next_state: next.observation.clone(),
                        terminal: next.terminal,
                    })
                    .unwrap();
                a.observe_steps(1);
                for _ in 0..a.updates_per_step() {
                    a.learn_step(&replay, &mut r).unwrap();
                    history.push(a.learner().online().clone());
                    assert!(a.learner().staleness() < 4);
                    let target = a.learner().target();
                    if !a.learner().learner_steps().is_multiple_of(4) {
                        assert_eq!(target, &last_target);
                    }
                    assert!(history.contains(target));
                    last_target = target.clone();
                }
                ts = next;
                if ts.terminal {
                    break;
                }
            }
            assert_eq!(replay.len(), (e + 1) * size);
            assert_eq!(a.fisher().n(), 1.0 + ((e + 1) * size) as f64);
        }
        assert!(a.is_sampling());
    }
}
