use std::io::Write;
use std::time::{Duration, Instant};

use super::config::{AgentKind, EnvKind, RunConfig};
use crate::agent::{run_episode, Agent, DqnAgent, EveAgent, ReplayBuffer};
use crate::envs::{DeepSea, DeepSeaConfig, Environment, GaussianBandit};
use crate::error::Result;
use crate::nn::Architecture;
use crate::rng;

/// Version tag written at the start of every CSV metadata line.
pub const CSV_SCHEMA: &str = "eve-run/v1";

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub episode_return: f64,
    pub success: bool,
    /// Fraction of episodes `0..=episode` that were not successes.
    pub failure_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub episodes: Vec<EpisodeRecord>,
    pub learner_steps: u64,
    pub env_steps: u64,
    /// Not written to CSV, so outputs stay byte-identical across reruns.
    pub wall_clock: Duration,
}

impl RunMetrics {
    pub fn successes(&self) -> usize {
        self.episodes.iter().filter(|e| e.success).count()
    }

    /// 0 for an empty run.
    pub fn success_fraction(&self) -> f64 {
        if self.episodes.is_empty() {
            0.0
        } else {
            self.successes() as f64 / self.episodes.len() as f64
        }
    }

    pub fn mean_return(&self) -> f64 {
        if self.episodes.is_empty() {
            0.0
        } else {
            self.episodes.iter().map(|e| e.episode_return).sum::<f64>() / self.episodes.len() as f64
        }
    }

    /// Index of the first successful episode.
    pub fn first_success(&self) -> Option<usize> {
        self.episodes.iter().position(|e| e.success)
    }
}

/// 1 if at least `threshold` of the episodes were successes, else 0.
pub fn exploration_score(metrics: &RunMetrics, threshold: f64) -> u8 {
    u8::from(!metrics.episodes.is_empty() && metrics.success_fraction() >= threshold)
}

pub fn build_env(config: &RunConfig) -> Result<Box<dyn Environment + Send>> {
    Ok(match config.env {
        EnvKind::DeepSea => {
            let mut c = DeepSeaConfig::new(config.size, config.seed_env);
            c.randomize_actions = config.randomize_actions;
            Box::new(DeepSea::new(c)?)
        }
        EnvKind::StochasticDeepSea => {
            let mut c =
                DeepSeaConfig::stochastic(config.size, config.reward_noise_std, config.seed_env);
            c.randomize_actions = config.randomize_actions;
            Box::new(DeepSea::new(c)?)
        }
        EnvKind::Bandit => Box::new(GaussianBandit::new(config.bandit_mean, config.seed_env)),
    })
}

pub fn build_architecture(config: &RunConfig, env: &dyn Environment) -> Result<Architecture> {
    let mut sizes = Vec::with_capacity(config.hidden.len() + 2);
    sizes.push(env.observation_size());
    sizes.extend_from_slice(&config.hidden);
    sizes.push(env.num_actions());
    Architecture::new(&sizes, config.activation_fn())
}

pub fn build_replay(config: &RunConfig) -> Result<ReplayBuffer> {
    if config.replay_capacity == 0 {
        Ok(ReplayBuffer::unbounded())
    } else {
        ReplayBuffer::with_capacity(config.replay_capacity)
    }
}

pub fn build_eve_agent(config: &RunConfig, arch: Architecture) -> Result<EveAgent> {
    let params = arch.init_params(config.seed_init);
    EveAgent::new(arch, params, config.eve_config())
}

pub fn build_agent(config: &RunConfig, arch: Architecture) -> Result<Box<dyn Agent + Send>> {
    Ok(match config.agent {
        AgentKind::Eve => Box::new(build_eve_agent(config, arch)?),
        AgentKind::Dqn => {
            let params = arch.init_params(config.seed_init);
            Box::new(DqnAgent::new(arch, params, config.dqn_config())?)
        }
    })
}

/// Plays `config.episodes` learning episodes. Same config, same result.
pub fn run(config: &RunConfig) -> Result<RunMetrics> {
    run_with_progress(config, |_, _| {})
}

/// As [`run`], calling `progress(episode, record)` after each episode.
pub fn run_with_progress(
    config: &RunConfig,
    mut progress: impl FnMut(usize, &EpisodeRecord),
) -> Result<RunMetrics> {
    config.validate()?;
    let start = Instant::now();
    let mut env = build_env(config)?;
    let arch = build_architecture(config, env.as_ref())?;
    let mut agent = build_agent(config, arch)?;
    let mut replay = build_replay(config)?;
    let mut rng = rng::seeded(config.seed_run);

    let mut episodes = Vec::with_capacity(config.episodes);
    let mut failures = 0usize;
    let mut env_steps = 0u64;
    for episode in 0..config.episodes {
        let outcome = run_episode(
            agent.as_mut(),
            env.as_mut(),
            &mut replay,
            episode,
            &mut rng,
            true,
        )?;
        env_steps += outcome.length as u64;
        failures += usize::from(!outcome.success);
        let record = EpisodeRecord {
            episode,
            episode_return: outcome.episode_return,
            success: outcome.success,
            failure_fraction: failures as f64 / (episode + 1) as f64,
        };
        progress(episode, &record);
        episodes.push(record);
    }
    let updates = config.batches_per_step as u64 * env_steps;
    Ok(RunMetrics {
        episodes,
        learner_steps: updates,
        env_steps,
        wall_clock: start.elapsed(),
    })
}

/// `# <schema> <key=value ...>` metadata line.
pub fn csv_header(config: &RunConfig) -> String {
    format!("# {CSV_SCHEMA} {}", config.to_header())
}

/// Per-episode CSV, preceded by the metadata line.
pub fn write_run_csv<W: Write>(
    out: &mut W,
    config: &RunConfig,
    metrics: &RunMetrics,
) -> Result<()> {
    writeln!(out, "{}", csv_header(config))?;
    writeln!(out, "episode,return,success,failure_fraction")?;
    for e in &metrics.episodes {
        writeln!(
            out,
            "{},{},{},{}",
            e.episode,
            e.episode_return,
            u8::from(e.success),
            e.failure_fraction
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        RunConfig {
            size: 4,
            episodes: 6,
            burnin: 2,
            hidden: vec![8],
            batches_per_step: 2,
            ..RunConfig::default()
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let config = small();
        let a = run(&config).unwrap();
        let b = run(&config).unwrap();
        assert_eq!(a.episodes, b.episodes);
        let mut ca = Vec::new();
        let mut cb = Vec::new();
        write_run_csv(&mut ca, &config, &a).unwrap();
        write_run_csv(&mut cb, &config, &b).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(a.env_steps, 24);
        assert_eq!(a.learner_steps, 48);
    }

    #[test]
    fn zero_episodes_is_empty_not_error() {
        let config = RunConfig {
            episodes: 0,
            ..small()
        };
        let m = run(&config).unwrap();
        assert!(m.episodes.is_empty());
        assert_eq!(m.success_fraction(), 0.0);
        assert_eq!(exploration_score(&m, 0.0), 0);
    }

    #[test]
    fn csv_starts_with_full_config() {
        let config = small();
        let m = run(&config).unwrap();
        let mut buf = Vec::new();
        write_run_csv(&mut buf, &config, &m).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first = text.lines().next().unwrap();
        assert!(first.starts_with("# eve-run/v1 "));
        for key in RunConfig::KEYS {
            assert!(first.contains(&format!(" {key}=")), "missing {key}");
        }
        assert_eq!(text.lines().count(), 2 + 6);
    }

    #[test]
    fn dqn_and_bandit_run() {
        let config = RunConfig {
            agent: AgentKind::Dqn,
            ..small()
        };
        assert_eq!(run(&config).unwrap().episodes.len(), 6);
        let config = RunConfig {
            env: EnvKind::Bandit,
            discount: 0.0,
            ..small()
        };
        let m = run(&config).unwrap();
        assert!(m.episodes.iter().all(|e| !e.success));
    }

    #[test]
    fn exploration_score_threshold_is_inclusive() {
        let episodes = (0..10)
            .map(|i| EpisodeRecord {
                episode: i,
                episode_return: 0.0,
                success: i < 2,
                failure_fraction: 0.0,
            })
            .collect();
        let m = RunMetrics {
            episodes,
            learner_steps: 0,
            env_steps: 0,
            wall_clock: Duration::ZERO,
        };
        assert_eq!(exploration_score(&m, 0.2), 1);
        assert_eq!(exploration_score(&m, 0.21), 0);
    }

    #[test]
    fn two_thousand_of_ten_thousand_is_solved() {
        let record = |i: usize, success: bool| EpisodeRecord {
            episode: i,
            episode_return: 0.0,
            success,
            failure_fraction: 0.0,
        };
        let mut m = RunMetrics {
            episodes: (0..10_000).map(|i| record(i, i % 5 == 0)).collect(),
            learner_steps: 0,
            env_steps: 0,
            wall_clock: Duration::ZERO,
        };
        assert_eq!(m.successes(), 2000);
        assert_eq!(exploration_score(&m, 0.2), 1);
        m.episodes[0].success = false;
        assert_eq!(exploration_score(&m, 0.2), 0);
    }
}
