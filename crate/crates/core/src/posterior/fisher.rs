use crate::error::{Error, Result};

/// Ratio between the second moment of the squared-loss gradient
/// `∇(Z' - q)^2 = -2 (Z' - q) ∇q` and the quarter-scaled closed form
/// `1/4 (δ² + γ^{2k} σ²) ∇q ∇qᵀ`: `(-2)^2 / (1/4) = 16`.
///
/// Using it in [`FisherAccumulator::update_variance_reduced`] makes the
/// analytic path estimate the same matrix as feeding sampled squared-loss
/// gradients to [`FisherAccumulator::update`].
pub const SQUARED_LOSS_SCALE: f64 = 16.0;

/// Same ratio for the log-likelihood score `(Z' - q) ∇q` of a unit-variance
/// Gaussian: `1 / (1/4) = 4`.
pub const LOG_LIKELIHOOD_SCALE: f64 = 4.0;

/// How new squared gradients enter the running diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FisherRule {
    /// `f <- (1-β) f + g⊙g`, `m <- (1-β) m + 1`; the estimate is `f / m`.
    Accumulate,
    /// `f <- (1-β) f + β g⊙g` with `m` fixed at 1.
    Ema,
}

/// Diagonal empirical Fisher plus the counters that scale the posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherAccumulator {
    diagonal: Vec<f64>,
    m: f64,
    n: f64,
    beta: f64,
    epsilon: f64,
    omega: f64,
    rule: FisherRule,
}

impl FisherAccumulator {
    /// Zero diagonal, `m = n = 1`.
    pub fn new(num_params: usize, beta: f64, epsilon: f64, omega: f64) -> Result<Self> {
        Self::with_rule(num_params, beta, epsilon, omega, FisherRule::Accumulate)
    }

    pub fn with_rule(
        num_params: usize,
        beta: f64,
        epsilon: f64,
        omega: f64,
        rule: FisherRule,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::config("fisher_beta", "must lie in [0, 1)"));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::config("fisher_eps", "must be finite and >= 0"));
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::config("omega", "must be finite and > 0"));
        }
        Ok(FisherAccumulator {
            diagonal: vec![0.0; num_params],
            m: 1.0,
            n: 1.0,
            beta,
            epsilon,
            omega,
            rule,
        })
    }

    pub fn len(&self) -> usize {
        self.diagonal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diagonal.is_empty()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn rule(&self) -> FisherRule {
        self.rule
    }

    /// Adds `steps` observed transitions to the effective sample count.
    pub fn observe(&mut self, steps: usize) {
        self.n += steps as f64;
    }

    pub fn set_n(&mut self, n: f64) {
        self.n = n.max(1.0);
    }

    /// Overwrites the diagonal directly (tests, probes of degenerate posteriors).
    pub fn set_diagonal(&mut self, diagonal: Vec<f64>) -> Result<()> {
        if diagonal.len() != self.diagonal.len() {
            return Err(Error::Contract("diagonal length mismatch".into()));
        }
        if diagonal.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::NonFinite("fisher diagonal"));
        }
        self.diagonal = diagonal;
        Ok(())
    }

    /// `f / m`: the bias-corrected running mean of squared gradients.
    pub fn unbiased(&self) -> Vec<f64> {
        self.diagonal.iter().map(|f| f / self.m).collect()
    }

    /// Per-coordinate posterior scale before the `1/sqrt(nω)` factor.
    pub fn std_devs(&self) -> Vec<f64> {
        let inv_m = 1.0 / self.m;
        self.diagonal
            .iter()
            .map(|f| 1.0 / (f * inv_m + self.epsilon).sqrt())
            .collect()
    }

    /// `1 / sqrt(n ω)`.
    pub fn sample_scale(&self) -> f64 {
        1.0 / (self.n * self.omega).sqrt()
    }

    /// Plain update from one log-likelihood gradient.
    pub fn update(&mut self, grad: &[f64]) -> Result<()> {
        self.check_len(grad.len())?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("fisher gradient"));
        }
        self.apply(grad.iter().map(|g| g * g));
        Ok(())
    }

    /// Update from an already squared (elementwise, nonnegative) contribution,
    /// e.g. a sum of per-example `g⊙g` over a batch.
    pub fn update_with_squares(&mut self, squares: &[f64]) -> Result<()> {
        self.check_len(squares.len())?;
        if squares.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::NonFinite("fisher squared gradient"));
        }
        self.apply(squares.iter().copied());
        Ok(())
    }

    /// Expected update over the return noise, computed analytically:
    /// `c ⊙ ∇q⊙∇q` with `c = 1/4 (δ² + γ^{2k} σ²) · SQUARED_LOSS_SCALE`.
    pub fn update_variance_reduced(
        &mut self,
        grad_q: &[f64],
        td_error: f64,
        gamma: f64,
        k: u32,
        return_variance: f64,
    ) -> Result<()> {
        self.update_variance_reduced_scaled(
            grad_q,
            td_error,
            gamma,
            k,
            return_variance,
            SQUARED_LOSS_SCALE,
        )
    }

    /// As [`Self::update_variance_reduced`] with an explicit gradient-convention scale.
    pub fn update_variance_reduced_scaled(
        &mut self,
        grad_q: &[f64],
        td_error: f64,
        gamma: f64,
        k: u32,
        return_variance: f64,
        scale: f64,
    ) -> Result<()> {
        let c = variance_reduced_coefficient(td_error, gamma, k, return_variance, scale)?;
        self.check_len(grad_q.len())?;
        if grad_q.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("fisher gradient"));
        }
        self.apply(grad_q.iter().map(|g| c * g * g));
        Ok(())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.diagonal.len() {
            return Err(Error::Contract(format!(
                "fisher update of length {len}, accumulator has {}",
                self.diagonal.len()
            )));
        }
        Ok(())
    }

    fn apply(&mut self, squares: impl Iterator<Item = f64>) {
        let decay = 1.0 - self.beta;
        match self.rule {
            FisherRule::Accumulate => {
                for (f, s) in self.diagonal.iter_mut().zip(squares) {
                    *f = decay * *f + s;
                }
                self.m = decay * self.m + 1.0;
            }
            FisherRule::Ema => {
                let beta = self.beta;
                for (f, s) in self.diagonal.iter_mut().zip(squares) {
                    *f = decay * *f + beta * s;
                }
            }
        }
    }
}

/// `1/4 (δ² + γ^{2k} σ²) · scale`, with `0^{2k} = 0`.
pub fn variance_reduced_coefficient(
    td_error: f64,
    gamma: f64,
    k: u32,
    return_variance: f64,
    scale: f64,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::Contract("k-step horizon must be >= 1".into()));
    }
    if !(td_error.is_finite() && gamma.is_finite() && return_variance.is_finite()) {
        return Err(Error::NonFinite("variance-reduced fisher inputs"));
    }
    let gamma_2k = gamma.powi(2 * k as i32);
    Ok(0.25 * (td_error * td_error + gamma_2k * return_variance) * scale)
}
