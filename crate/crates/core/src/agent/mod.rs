//! Q-learning agents: the epsilon-greedy baseline and epistemic Q-learning.

mod config;
mod dqn;
mod episode;
mod eve;
mod learner;
mod policy;
mod replay;

pub use config::{
    Acting, Bootstrap, DqnConfig, EveConfig, FisherMode, LearnerConfig, Optimizer, DIVERGENCE_LIMIT,
};
pub use dqn::{DqnAgent, UniformAgent};
pub use episode::{act_episode, run_episode, Agent, EpisodeOutcome};
pub use eve::EveAgent;
pub use learner::QLearner;
pub use policy::{epsilon_greedy, greedy_action};
pub use replay::{ReplayBuffer, Transition};
