use rand::Rng;
use rand_distr::StandardNormal;

use super::FisherAccumulator;
use crate::error::{Error, Result};
use crate::nn::{Architecture, ForwardCache, ParamVector};

/// Diagonal Gaussian `N(mean, diag(std²) / (n ω))` over network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSpec {
    pub mean: ParamVector,
    /// `σ_i = 1 / sqrt(f_unbiased_i + ε)`.
    pub std: Vec<f64>,
    /// `1 / sqrt(n ω)`.
    pub scale: f64,
}

impl PosteriorSpec {
    pub fn new(acc: &FisherAccumulator, mean: &[f64]) -> Result<Self> {
        if mean.len() != acc.len() {
            return Err(Error::Contract(format!(
                "posterior mean has length {}, accumulator {}",
                mean.len(),
                acc.len()
            )));
        }
        let std = acc.std_devs();
        if std.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("posterior standard deviation"));
        }
        Ok(PosteriorSpec {
            mean: ParamVector::from_vec(mean.to_vec()),
            std,
            scale: acc.sample_scale(),
        })
    }

    /// Marginal variance of every coordinate.
    pub fn variances(&self) -> Vec<f64> {
        self.std.iter().map(|s| (s * self.scale).powi(2)).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let mut out = ParamVector::zeros(self.mean.len());
        self.sample_into(rng, &mut out);
        out
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for ((o, &mu), &s) in out.iter_mut().zip(self.mean.iter()).zip(&self.std) {
            let z: f64 = rng.sample(StandardNormal);
            *o = mu + self.scale * s * z;
        }
    }
}

/// Draws `mean + (1/sqrt(n ω)) σ ⊙ z` into `out` without building a [`PosteriorSpec`].
pub(crate) fn sample_posterior_into<R: Rng + ?Sized>(
    acc: &FisherAccumulator,
    mean: &[f64],
    rng: &mut R,
    out: &mut [f64],
) -> Result<()> {
    let scale = acc.sample_scale();
    let inv_m = 1.0 / acc.m();
    let eps = acc.epsilon();
    for ((o, &mu), &f) in out.iter_mut().zip(mean).zip(acc.diagonal()) {
        let std = 1.0 / (f * inv_m + eps).sqrt();
        if !std.is_finite() {
            return Err(Error::NonFinite("posterior standard deviation"));
        }
        let z: f64 = rng.sample(StandardNormal);
        *o = mu + scale * std * z;
    }
    Ok(())
}

/// One posterior parameter draw around `mean`.
pub fn sample_posterior<R: Rng + ?Sized>(
    acc: &FisherAccumulator,
    mean: &[f64],
    rng: &mut R,
) -> Result<ParamVector> {
    if mean.len() != acc.len() {
        return Err(Error::Contract("posterior mean length mismatch".into()));
    }
    let mut out = ParamVector::zeros(mean.len());
    sample_posterior_into(acc, mean, rng, &mut out)?;
    Ok(out)
}

/// Sample standard deviation of `q_θ'(features, a)` over `n_samples` draws,
/// for every action `a`.
pub fn epistemic_q_stds<R: Rng + ?Sized>(
    acc: &FisherAccumulator,
    mean: &[f64],
    arch: &Architecture,
    features: &[f64],
    n_samples: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if n_samples < 2 {
        return Err(Error::config(
            "n_samples",
            "need at least two posterior samples",
        ));
    }
    if mean.len() != arch.num_params() || acc.len() != arch.num_params() {
        return Err(Error::Contract(
            "posterior and architecture disagree on size".into(),
        ));
    }
    if features.len() != arch.input_size() {
        return Err(Error::Contract("feature length mismatch".into()));
    }
    let actions = arch.num_actions();
    let mut sum = vec![0.0; actions];
    let mut sum_sq = vec![0.0; actions];
    let mut params = ParamVector::zeros(mean.len());
    let mut cache = ForwardCache::default();
    let mut draws = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        sample_posterior_into(acc, mean, rng, &mut params)?;
        arch.forward_cached(&params, features, &mut cache);
        draws.push(cache.output().to_vec());
    }
    // two-pass for numerical stability
    for q in &draws {
        for (s, v) in sum.iter_mut().zip(q) {
            *s += v;
        }
    }
    let means: Vec<f64> = sum.iter().map(|s| s / n_samples as f64).collect();
    for q in &draws {
        for ((s, v), mu) in sum_sq.iter_mut().zip(q).zip(&means) {
            *s += (v - mu) * (v - mu);
        }
    }
    Ok(sum_sq
        .iter()
        .map(|s| (s / (n_samples as f64 - 1.0)).sqrt())
        .collect())
}

/// Sample standard deviation of `q_θ'(features, action)` under the posterior.
pub fn epistemic_q_std<R: Rng + ?Sized>(
    acc: &FisherAccumulator,
    mean: &[f64],
    arch: &Architecture,
    features: &[f64],
    action: usize,
    n_samples: usize,
    rng: &mut R,
) -> Result<f64> {
    if action >= arch.num_actions() {
        return Err(Error::Contract(format!("action {action} out of range")));
    }
    Ok(epistemic_q_stds(acc, mean, arch, features, n_samples, rng)?[action])
}
