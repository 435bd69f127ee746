use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::posterior::FisherRule;

/// Q-values or targets beyond this magnitude abort learning.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    Adam,
    Sgd,
}

/// Settings shared by both agents' Q-learning updates.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub learning_rate: f64,
    pub discount: f64,
    /// Learner updates between target syncs; 0 disables the target network.
    pub target_period: u64,
    pub batch_size: usize,
    /// Learner updates run after every environment step.
    pub batches_per_step: usize,
    pub optimizer: Optimizer,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            learning_rate: 1e-3,
            discount: 0.99,
            target_period: 4,
            batch_size: 12,
            batches_per_step: 10,
            optimizer: Optimizer::Adam,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be finite and > 0"));
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(Error::config("discount", "must lie in [0, 1]"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        Ok(())
    }
}

macro_rules! text_enum {
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

text_enum!(Optimizer { Adam => "adam", Sgd => "sgd" });

/// How the epistemic agent picks actions after burn-in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Acting {
    /// Greedy w.r.t. one posterior draw held for the whole episode.
    Thompson,
    /// Epsilon-greedy w.r.t. the online parameters.
    EpsilonGreedy,
}
text_enum!(Acting { Thompson => "thompson", EpsilonGreedy => "eps-greedy" });

/// Which parameters evaluate `max_a q(S', a)` in the bootstrap target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bootstrap {
    Posterior,
    /// The online (maximum-likelihood) parameters.
    Mle,
}
text_enum!(Bootstrap { Posterior => "posterior", Mle => "mle" });

/// Gradient fed to the Fisher accumulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FisherMode {
    /// Squared-loss gradient towards the noisy modelled return `G + γη`.
    Noisy,
    /// Analytic expectation over the return noise.
    VarianceReduced,
    /// The noise-free Q-learning gradient (ablation).
    MleGradient,
}
text_enum!(FisherMode { Noisy => "noisy", VarianceReduced => "variance-reduced", MleGradient => "mle-gradient" });

impl fmt::Display for FisherRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FisherRule::Accumulate => "accumulate",
            FisherRule::Ema => "ema",
        })
    }
}

impl FromStr for FisherRule {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "accumulate" => Ok(FisherRule::Accumulate),
            "ema" => Ok(FisherRule::Ema),
            other => Err(format!(
                "unknown value `{other}`, expected one of: accumulate, ema"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EveConfig {
    pub learner: LearnerConfig,
    /// Exploration scale ω; the posterior width is `1/sqrt(n ω)`.
    pub omega: f64,
    /// σ_Return²: variance of the modelled return noise η.
    pub return_variance: f64,
    pub fisher_beta: f64,
    pub fisher_epsilon: f64,
    pub fisher_rule: FisherRule,
    /// Episodes acted uniformly at random before posterior sampling starts.
    pub burnin_episodes: usize,
    pub acting: Acting,
    /// Only used with [`Acting::EpsilonGreedy`].
    pub epsilon: f64,
    pub bootstrap: Bootstrap,
    pub fisher: FisherMode,
    /// Accumulate one squared gradient per transition instead of one per batch.
    pub per_example_fisher: bool,
    /// Draw a fresh bootstrap posterior sample per transition instead of per batch.
    pub per_transition_draw: bool,
}

impl Default for EveConfig {
    fn default() -> Self {
        EveConfig {
            learner: LearnerConfig::default(),
            omega: 10.0,
            return_variance: 1e4,
            fisher_beta: 1e-10,
            fisher_epsilon: 1e-10,
            fisher_rule: FisherRule::Accumulate,
            burnin_episodes: 100,
            acting: Acting::Thompson,
            epsilon: 0.05,
            bootstrap: Bootstrap::Posterior,
            fisher: FisherMode::Noisy,
            per_example_fisher: false,
            per_transition_draw: false,
        }
    }
}

impl EveConfig {
    /// Single-loop variant: no burn-in, no target network, β-weighted Fisher
    /// average and plain gradient steps.
    pub fn without_extensions() -> Self {
        EveConfig {
            learner: LearnerConfig {
                target_period: 0,
                optimizer: Optimizer::Sgd,
                ..LearnerConfig::default()
            },
            fisher_rule: FisherRule::Ema,
            burnin_episodes: 0,
            ..EveConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.learner.validate()?;
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::config("omega", "must be finite and > 0"));
        }
        if !(self.return_variance >= 0.0 && self.return_variance.is_finite()) {
            return Err(Error::config("return_variance", "must be finite and >= 0"));
        }
        if !(0.0..1.0).contains(&self.fisher_beta) {
            return Err(Error::config("fisher_beta", "must lie in [0, 1)"));
        }
        if !(self.fisher_epsilon > 0.0 && self.fisher_epsilon.is_finite()) {
            return Err(Error::config("fisher_eps", "must be finite and > 0"));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::config("epsilon", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DqnConfig {
    pub learner: LearnerConfig,
    pub epsilon: f64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            learner: LearnerConfig::default(),
            epsilon: 0.05,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        self.learner.validate()?;
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::config("epsilon", "must lie in [0, 1]"));
        }
        Ok(())
    }
}
