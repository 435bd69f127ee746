use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::agent::{Acting, Bootstrap, DqnConfig, EveConfig, FisherMode, LearnerConfig, Optimizer};
use crate::error::{Error, Result};
use crate::nn::Activation;
use crate::posterior::FisherRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    DeepSea,
    StochasticDeepSea,
    Bandit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentKind {
    Eve,
    Dqn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivationKind {
    Leaky,
    Relu,
}

macro_rules! keyword_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($name::$variant => $text),+ })
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!(
                        "unknown value `{other}`, expected one of: {}",
                        [$($text),+].join(", ")
                    )),
                }
            }
        }
    };
}

keyword_enum!(EnvKind { DeepSea => "deep_sea", StochasticDeepSea => "stochastic_deep_sea", Bandit => "bandit" });
keyword_enum!(AgentKind { Eve => "eve", Dqn => "dqn" });
keyword_enum!(ActivationKind { Leaky => "leaky", Relu => "relu" });

/// Everything needed to reproduce one run. Serialises to a flat
/// `key = value` text format; [`RunConfig::KEYS`] lists every key in order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvKind,
    pub size: usize,
    /// Only used by `stochastic_deep_sea`.
    pub reward_noise_std: f64,
    pub randomize_actions: bool,
    /// Only used by `bandit`.
    pub bandit_mean: f64,
    pub agent: AgentKind,
    pub episodes: usize,
    pub seed_env: u64,
    pub seed_init: u64,
    pub seed_run: u64,
    pub hidden: Vec<usize>,
    pub activation: ActivationKind,
    pub leaky_slope: f64,
    pub learning_rate: f64,
    pub discount: f64,
    pub target_period: u64,
    pub batch_size: usize,
    pub batches_per_step: usize,
    pub optimizer: Optimizer,
    pub epsilon: f64,
    pub omega: f64,
    pub return_variance: f64,
    pub fisher_beta: f64,
    pub fisher_eps: f64,
    pub fisher_rule: FisherRule,
    pub burnin: usize,
    pub acting: Acting,
    pub bootstrap: Bootstrap,
    pub fisher: FisherMode,
    pub per_example_fisher: bool,
    pub per_transition_draw: bool,
    /// 0 means unbounded.
    pub replay_capacity: usize,
    pub success_threshold: f64,
    pub probe_episodes: usize,
    pub probe_samples: usize,
    /// Empty means standard output.
    pub out: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        let eve = EveConfig::default();
        let learner = LearnerConfig::default();
        RunConfig {
            env: EnvKind::DeepSea,
            size: 10,
            reward_noise_std: 1.0,
            randomize_actions: true,
            bandit_mean: 0.5,
            agent: AgentKind::Eve,
            episodes: 2000,
            seed_env: 0,
            seed_init: 0,
            seed_run: 0,
            hidden: vec![50, 50],
            activation: ActivationKind::Leaky,
            leaky_slope: Activation::DEFAULT_SLOPE,
            learning_rate: learner.learning_rate,
            discount: learner.discount,
            target_period: learner.target_period,
            batch_size: learner.batch_size,
            batches_per_step: learner.batches_per_step,
            optimizer: learner.optimizer,
            epsilon: DqnConfig::default().epsilon,
            omega: eve.omega,
            return_variance: eve.return_variance,
            fisher_beta: eve.fisher_beta,
            fisher_eps: eve.fisher_epsilon,
            fisher_rule: eve.fisher_rule,
            burnin: eve.burnin_episodes,
            acting: eve.acting,
            bootstrap: eve.bootstrap,
            fisher: eve.fisher,
            per_example_fisher: eve.per_example_fisher,
            per_transition_draw: eve.per_transition_draw,
            replay_capacity: 0,
            success_threshold: 0.2,
            probe_episodes: 100,
            probe_samples: 200,
            out: String::new(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| Error::config(key, format!("cannot parse `{value}`: {e}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    if value.trim().is_empty() || value == "none" {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

impl RunConfig {
    pub const KEYS: &'static [&'static str] = &[
        "env",
        "size",
        "reward_noise_std",
        "randomize_actions",
        "bandit_mean",
        "agent",
        "episodes",
        "seed_env",
        "seed_init",
        "seed_run",
        "hidden",
        "activation",
        "leaky_slope",
        "learning_rate",
        "discount",
        "target_period",
        "batch_size",
        "batches_per_step",
        "optimizer",
        "epsilon",
        "omega",
        "return_variance",
        "fisher_beta",
        "fisher_eps",
        "fisher_rule",
        "burnin",
        "acting",
        "bootstrap",
        "fisher",
        "per_example_fisher",
        "per_transition_draw",
        "replay_capacity",
        "success_threshold",
        "probe_episodes",
        "probe_samples",
        "out",
    ];

    /// Sets one key from its text form. `sigma_return` is accepted as an
    /// alias that sets `return_variance` to the square of the given value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "env" => self.env = parse(key, value)?,
            "size" => self.size = parse(key, value)?,
            "reward_noise_std" => self.reward_noise_std = parse(key, value)?,
            "randomize_actions" => self.randomize_actions = parse(key, value)?,
            "bandit_mean" => self.bandit_mean = parse(key, value)?,
            "agent" => self.agent = parse(key, value)?,
            "episodes" => self.episodes = parse(key, value)?,
            "seed_env" => self.seed_env = parse(key, value)?,
            "seed_init" => self.seed_init = parse(key, value)?,
            "seed_run" => self.seed_run = parse(key, value)?,
            "hidden" => self.hidden = parse_list(key, value)?,
            "activation" => self.activation = parse(key, value)?,
            "leaky_slope" => self.leaky_slope = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "discount" => self.discount = parse(key, value)?,
            "target_period" => self.target_period = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "batches_per_step" => self.batches_per_step = parse(key, value)?,
            "optimizer" => self.optimizer = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "omega" => self.omega = parse(key, value)?,
            "return_variance" => self.return_variance = parse(key, value)?,
            "sigma_return" => {
                let sigma: f64 = parse(key, value)?;
                self.return_variance = sigma * sigma;
            }
            "fisher_beta" => self.fisher_beta = parse(key, value)?,
            "fisher_eps" => self.fisher_eps = parse(key, value)?,
            "fisher_rule" => self.fisher_rule = parse(key, value)?,
            "burnin" => self.burnin = parse(key, value)?,
            "acting" => self.acting = parse(key, value)?,
            "bootstrap" => self.bootstrap = parse(key, value)?,
            "fisher" => self.fisher = parse(key, value)?,
            "per_example_fisher" => self.per_example_fisher = parse(key, value)?,
            "per_transition_draw" => self.per_transition_draw = parse(key, value)?,
            "replay_capacity" => self.replay_capacity = parse(key, value)?,
            "success_threshold" => self.success_threshold = parse(key, value)?,
            "probe_episodes" => self.probe_episodes = parse(key, value)?,
            "probe_samples" => self.probe_samples = parse(key, value)?,
            "out" => self.out = value.to_string(),
            other => return Err(Error::config(other, "unknown configuration key")),
        }
        Ok(())
    }

    /// Text form of one key's current value.
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "env" => self.env.to_string(),
            "size" => self.size.to_string(),
            "reward_noise_std" => self.reward_noise_std.to_string(),
            "randomize_actions" => self.randomize_actions.to_string(),
            "bandit_mean" => self.bandit_mean.to_string(),
            "agent" => self.agent.to_string(),
            "episodes" => self.episodes.to_string(),
            "seed_env" => self.seed_env.to_string(),
            "seed_init" => self.seed_init.to_string(),
            "seed_run" => self.seed_run.to_string(),
            "hidden" => {
                if self.hidden.is_empty() {
                    "none".to_string()
                } else {
                    self.hidden
                        .iter()
                        .map(usize::to_string)
                        .collect::<Vec<_>>()
                        .join(",")
                }
            }
            "activation" => self.activation.to_string(),
            "leaky_slope" => self.leaky_slope.to_string(),
            "learning_rate" => self.learning_rate.to_string(),
            "discount" => self.discount.to_string(),
            "target_period" => self.target_period.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "batches_per_step" => self.batches_per_step.to_string(),
            "optimizer" => self.optimizer.to_string(),
            "epsilon" => self.epsilon.to_string(),
            "omega" => self.omega.to_string(),
            "return_variance" => self.return_variance.to_string(),
            "sigma_return" => self.return_variance.sqrt().to_string(),
            "fisher_beta" => self.fisher_beta.to_string(),
            "fisher_eps" => self.fisher_eps.to_string(),
            "fisher_rule" => self.fisher_rule.to_string(),
            "burnin" => self.burnin.to_string(),
            "acting" => self.acting.to_string(),
            "bootstrap" => self.bootstrap.to_string(),
            "fisher" => self.fisher.to_string(),
            "per_example_fisher" => self.per_example_fisher.to_string(),
            "per_transition_draw" => self.per_transition_draw.to_string(),
            "replay_capacity" => self.replay_capacity.to_string(),
            "success_threshold" => self.success_threshold.to_string(),
            "probe_episodes" => self.probe_episodes.to_string(),
            "probe_samples" => self.probe_samples.to_string(),
            "out" => self.out.clone(),
            _ => return None,
        })
    }

    /// `key = value` per line, in [`RunConfig::KEYS`] order.
    pub fn to_text(&self) -> String {
        let mut text = String::new();
        for key in Self::KEYS {
            text.push_str(key);
            text.push_str(" = ");
            text.push_str(&self.get(key).expect("every listed key has a value"));
            text.push('\n');
        }
        text
    }

    /// Single-line form for CSV metadata: `key=value` pairs separated by spaces.
    pub fn to_header(&self) -> String {
        Self::KEYS
            .iter()
            .map(|k| format!("{k}={}", self.get(k).expect("listed key")))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Applies `key = value` lines on top of the defaults. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut config = RunConfig::default();
        config.apply_text(text)?;
        Ok(config)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(
                    format!("line {}", lineno + 1),
                    format!("expected `key = value`, got `{line}`"),
                )
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }

    /// Checks every parameter before a run starts.
    pub fn validate(&self) -> Result<()> {
        if self.env != EnvKind::Bandit && self.size < 2 {
            return Err(Error::config("size", "deep sea needs size >= 2"));
        }
        if !(self.reward_noise_std >= 0.0 && self.reward_noise_std.is_finite()) {
            return Err(Error::config("reward_noise_std", "must be finite and >= 0"));
        }
        if !self.bandit_mean.is_finite() {
            return Err(Error::config("bandit_mean", "must be finite"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config(
                "hidden",
                "hidden layer sizes must be positive",
            ));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::config("leaky_slope", "must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.success_threshold) {
            return Err(Error::config("success_threshold", "must lie in [0, 1]"));
        }
        if self.probe_samples < 2 {
            return Err(Error::config(
                "probe_samples",
                "need at least two posterior samples",
            ));
        }
        match self.agent {
            AgentKind::Eve => self.eve_config().validate(),
            AgentKind::Dqn => self.dqn_config().validate(),
        }
    }

    pub fn activation_fn(&self) -> Activation {
        match self.activation {
            ActivationKind::Leaky => Activation::LeakyRelu {
                slope: self.leaky_slope,
            },
            ActivationKind::Relu => Activation::Relu,
        }
    }

    pub fn learner_config(&self) -> LearnerConfig {
        LearnerConfig {
            learning_rate: self.learning_rate,
            discount: self.discount,
            target_period: self.target_period,
            batch_size: self.batch_size,
            batches_per_step: self.batches_per_step,
            optimizer: self.optimizer,
        }
    }

    pub fn eve_config(&self) -> EveConfig {
        EveConfig {
            learner: self.learner_config(),
            omega: self.omega,
            return_variance: self.return_variance,
            fisher_beta: self.fisher_beta,
            fisher_epsilon: self.fisher_eps,
            fisher_rule: self.fisher_rule,
            burnin_episodes: self.burnin,
            acting: self.acting,
            epsilon: self.epsilon,
            bootstrap: self.bootstrap,
            fisher: self.fisher,
            per_example_fisher: self.per_example_fisher,
            per_transition_draw: self.per_transition_draw,
        }
    }

    pub fn dqn_config(&self) -> DqnConfig {
        DqnConfig {
            learner: self.learner_config(),
            epsilon: self.epsilon,
        }
    }
}
