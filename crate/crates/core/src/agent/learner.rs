use super::config::{LearnerConfig, Optimizer, DIVERGENCE_LIMIT};
use super::replay::Transition;
use crate::error::{Error, Result};
use crate::nn::{AdamState, Architecture, ForwardCache, ParamVector};

/// Online and target parameters plus the optimizer: the part of Q-learning
/// shared by the baseline and the epistemic agent.
#[derive(Debug, Clone)]
pub struct QLearner {
    pub(crate) arch: Architecture,
    pub(crate) online: ParamVector,
    pub(crate) target: ParamVector,
    adam: AdamState,
    pub(crate) config: LearnerConfig,
    learner_steps: u64,
    last_sync: u64,
    pub(crate) cache: ForwardCache,
    pub(crate) bootstrap_cache: ForwardCache,
}

impl QLearner {
    pub fn new(arch: Architecture, params: ParamVector, config: LearnerConfig) -> Result<Self> {
        config.validate()?;
        if params.len() != arch.num_params() {
            return Err(Error::Contract(
                "initial parameters do not fit the architecture".into(),
            ));
        }
        let adam = AdamState::new(params.len());
        Ok(QLearner {
            arch,
            target: params.clone(),
            online: params,
            adam,
            config,
            learner_steps: 0,
            last_sync: 0,
            cache: ForwardCache::default(),
            bootstrap_cache: ForwardCache::default(),
        })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn online(&self) -> &ParamVector {
        &self.online
    }

    pub fn target(&self) -> &ParamVector {
        &self.target
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn learner_steps(&self) -> u64 {
        self.learner_steps
    }

    /// Learner steps since the target parameters were last synchronised.
    pub fn staleness(&self) -> u64 {
        self.learner_steps - self.last_sync
    }

    pub fn q_values(&mut self, params: &[f64], features: &[f64]) -> Vec<f64> {
        self.arch
            .forward_cached(params, features, &mut self.bootstrap_cache);
        self.bootstrap_cache.output().to_vec()
    }

    /// `R` on terminal transitions, `R + γ max_a q_params(S', a)` otherwise.
    pub(crate) fn bootstrap_target(
        arch: &Architecture,
        cache: &mut ForwardCache,
        params: &[f64],
        discount: f64,
        t: &Transition,
        learner_steps: u64,
    ) -> Result<f64> {
        if t.terminal {
            return Ok(t.reward);
        }
        arch.forward_cached(params, &t.next_state, cache);
        let max_q = cache
            .output()
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let target = t.reward + discount * max_q;
        if !(target.is_finite() && target.abs() <= DIVERGENCE_LIMIT) {
            return Err(Error::Divergence {
                learner_steps,
                detail: format!("bootstrap target {target}"),
            });
        }
        Ok(target)
    }

    /// Forward pass of the online network on `t.state`, leaving activations
    /// in `self.cache` for a following backward pass.
    pub(crate) fn predict(&mut self, t: &Transition) -> Result<f64> {
        self.arch
            .forward_cached(&self.online, &t.state, &mut self.cache);
        let q = self.cache.output()[t.action];
        if !(q.is_finite() && q.abs() <= DIVERGENCE_LIMIT) {
            return Err(Error::Divergence {
                learner_steps: self.learner_steps,
                detail: format!("prediction {q}"),
            });
        }
        Ok(q)
    }

    pub(crate) fn apply_gradient(&mut self, grad: &[f64]) -> Result<()> {
        match self.config.optimizer {
            Optimizer::Adam => self
                .adam
                .step(&mut self.online, grad, self.config.learning_rate),
            Optimizer::Sgd => {
                if grad.iter().any(|g| !g.is_finite()) {
                    return Err(Error::NonFinite("sgd gradient"));
                }
                let lr = self.config.learning_rate;
                for (p, g) in self.online.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
                Ok(())
            }
        }
    }

    /// Counts one learner step and synchronises the target parameters when due.
    pub(crate) fn finish_step(&mut self) {
        self.learner_steps += 1;
        let period = self.config.target_period;
        if period == 0 || self.learner_steps.is_multiple_of(period) {
            self.target.copy_from_slice(&self.online);
            self.last_sync = self.learner_steps;
        }
    }

    pub(crate) fn check_transition(&self, t: &Transition) -> Result<()> {
        if t.action >= self.arch.num_actions() {
            return Err(Error::Contract(format!(
                "transition action {} out of range",
                t.action
            )));
        }
        let n = self.arch.input_size();
        if t.state.len() != n || t.next_state.len() != n {
            return Err(Error::Contract(
                "transition features do not fit the network".into(),
            ));
        }
        Ok(())
    }
}
