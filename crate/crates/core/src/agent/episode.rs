use super::replay::{ReplayBuffer, Transition};
use crate::envs::Environment;
use crate::error::Result;
use crate::rng::Rng;

/// An agent driven one environment step at a time.
pub trait Agent {
    /// Called after `env.reset()`, before the first action of episode `episode`.
    fn begin_episode(&mut self, episode: usize, rng: &mut Rng) -> Result<()>;

    fn select_action(&mut self, observation: &[f64], rng: &mut Rng) -> Result<usize>;

    /// Records that `steps` more transitions entered the replay buffer.
    fn observe_steps(&mut self, steps: usize);

    /// One learner update on a batch drawn from `replay`.
    fn learn_step(&mut self, replay: &ReplayBuffer, rng: &mut Rng) -> Result<()>;

    /// Learner updates after each environment step.
    fn updates_per_step(&self) -> usize;
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub episode_return: f64,
    pub success: bool,
    pub length: usize,
    /// Discrete states entered (including the start state), when the env exposes them.
    pub visited: Vec<usize>,
    pub actions: Vec<usize>,
}

/// Plays one episode, appending every transition to `replay`. With `learn`,
/// `agent.updates_per_step()` learner updates follow each environment step.
pub fn run_episode<E: Environment + ?Sized, A: Agent + ?Sized>(
    agent: &mut A,
    env: &mut E,
    replay: &mut ReplayBuffer,
    episode: usize,
    rng: &mut Rng,
    learn: bool,
) -> Result<EpisodeOutcome> {
    let mut ts = env.reset();
    agent.begin_episode(episode, rng)?;
    let mut outcome = EpisodeOutcome {
        episode_return: 0.0,
        success: false,
        length: 0,
        visited: env.state_index().into_iter().collect(),
        actions: Vec::new(),
    };
    loop {
        let action = agent.select_action(&ts.observation, rng)?;
        let next = env.step(action)?;
        outcome.episode_return += next.reward;
        outcome.length += 1;
        outcome.actions.push(action);
        outcome.visited.extend(env.state_index());
        let terminal = next.terminal;
        replay.push(Transition {
            state: std::mem::take(&mut ts.observation),
            action,
            reward: next.reward,
            next_state: next.observation.clone(),
            terminal,
        })?;
        agent.observe_steps(1);
        if learn {
            for _ in 0..agent.updates_per_step() {
                agent.learn_step(replay, rng)?;
            }
        }
        ts = next;
        if terminal {
            break;
        }
    }
    outcome.success = env.episode_success();
    Ok(outcome)
}

/// Plays one episode without learning.
pub fn act_episode<E: Environment + ?Sized, A: Agent + ?Sized>(
    agent: &mut A,
    env: &mut E,
    replay: &mut ReplayBuffer,
    episode: usize,
    rng: &mut Rng,
) -> Result<EpisodeOutcome> {
    run_episode(agent, env, replay, episode, rng, false)
}
