use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::nn::{Activation, Architecture, ParamVector};
use crate::posterior::{
    sample_posterior, variance_reduced_coefficient, FisherAccumulator, KroneckerBlock,
    LOG_LIKELIHOOD_SCALE, SQUARED_LOSS_SCALE,
};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
}

impl OracleCheck {
    fn new(name: &'static str, measured: f64, tolerance: f64) -> Self {
        OracleCheck {
            name,
            measured,
            tolerance,
        }
    }

    /// NaN never passes.
    pub fn passed(&self) -> bool {
        self.measured < self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub checks: Vec<OracleCheck>,
}

impl OracleReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(OracleCheck::passed)
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "# eve-oracle/v1")?;
        writeln!(out, "check,measured,tolerance,passed")?;
        for c in &self.checks {
            writeln!(
                out,
                "{},{:e},{:e},{}",
                c.name,
                c.measured,
                c.tolerance,
                u8::from(c.passed())
            )?;
        }
        Ok(())
    }
}

/// Errors of the single-parameter Gaussian location model with unit noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateErrors {
    pub samples: usize,
    /// `|posterior mean - sample mean|`.
    pub mean_error: f64,
    /// Relative error of the posterior variance against `1 / samples`.
    pub variance_error: f64,
    /// Relative error of the empirical variance of posterior draws against `1 / samples`.
    pub sampled_variance_error: f64,
}

/// Fits `θ` to `samples` draws of `N(0.3, 1)` by gradient descent, feeds the
/// expected Fisher of the model at the fit into an accumulator with `β = 0`,
/// `ε = 0`, `ω = 1`, and compares the resulting posterior with the flat-prior
/// conjugate posterior `N(sample mean, 1 / samples)`.
pub fn conjugate_oracle(samples: usize, draws: usize, seed: u64) -> Result<ConjugateErrors> {
    let mut rng = rng::seeded(seed);
    let data: Vec<f64> = (0..samples)
        .map(|_| 0.3 + rng.sample::<f64, _>(StandardNormal))
        .collect();
    let sample_mean = data.iter().sum::<f64>() / samples as f64;

    let mut theta = 0.0;
    for _ in 0..200 {
        let grad = data.iter().map(|z| theta - z).sum::<f64>() / samples as f64;
        theta -= 0.5 * grad;
    }

    let mut acc = FisherAccumulator::new(1, 0.0, 0.0, 1.0)?;
    for _ in 0..samples {
        // Unit-variance score expectation: E[(Z' - θ)²] = 1 with ∇q = 1.
        acc.update_variance_reduced_scaled(&[1.0], 0.0, 1.0, 1, 1.0, LOG_LIKELIHOOD_SCALE)?;
        acc.observe(1);
    }
    let exact = 1.0 / samples as f64;
    let std = acc.std_devs()[0] * acc.sample_scale();
    let variance = std * std;

    let mean = [theta];
    let draws_v: Vec<f64> = (0..draws)
        .map(|_| sample_posterior(&acc, &mean, &mut rng).map(|p| p[0]))
        .collect::<Result<_>>()?;
    let dm = draws_v.iter().sum::<f64>() / draws as f64;
    let dv = draws_v.iter().map(|x| (x - dm) * (x - dm)).sum::<f64>() / (draws as f64 - 1.0);

    Ok(ConjugateErrors {
        samples,
        mean_error: (theta - sample_mean).abs(),
        variance_error: (variance - exact).abs() / exact,
        sampled_variance_error: (dv - exact).abs() / exact,
    })
}

/// `|f_unbiased - 1|` after `samples` score updates of the unit Gaussian location model.
pub fn fisher_oracle(samples: usize, seed: u64) -> Result<f64> {
    let mut rng = rng::seeded(seed);
    let mut acc = FisherAccumulator::new(1, 0.0, 0.0, 1.0)?;
    for _ in 0..samples {
        let z: f64 = rng.sample(StandardNormal);
        acc.update(&[z])?;
    }
    Ok((acc.unbiased()[0] - 1.0).abs())
}

/// Largest per-coordinate relative error between the closed-form
/// variance-reduced Fisher contribution and a Monte-Carlo average of squared
/// noisy-target gradients over `draws` return-noise draws (antithetic pairs).
pub fn variance_reduced_oracle(draws: usize, seed: u64) -> Result<f64> {
    let arch = Architecture::new(&[3, 4, 2], Activation::leaky())?;
    let params = arch.init_params(seed);
    let features = [0.7, -1.2, 0.4];
    let action = 1;
    let (gamma, k, return_variance) = (0.9, 2u32, 1.5);
    let q = arch.forward(&params, &features)?[action];
    let target = q + 2.0;

    let grad_q = arch.grad_q(&params, &features, action)?;
    let c =
        variance_reduced_coefficient(target - q, gamma, k, return_variance, SQUARED_LOSS_SCALE)?;
    let closed: Vec<f64> = grad_q.iter().map(|g| c * g * g).collect();

    let mut rng = rng::seeded(seed ^ 0x5eed);
    let noise_scale = gamma.powi(k as i32) * return_variance.sqrt();
    let mut mc = vec![0.0; arch.num_params()];
    let pairs = draws / 2;
    for _ in 0..pairs {
        let eta: f64 = rng.sample(StandardNormal);
        for sign in [1.0, -1.0] {
            let g = arch.grad_squared_error(
                &params,
                &features,
                action,
                target + sign * noise_scale * eta,
            )?;
            for (m, gi) in mc.iter_mut().zip(g.iter()) {
                *m += gi * gi;
            }
        }
    }
    let count = (2 * pairs) as f64;
    let mut worst: f64 = 0.0;
    for (m, e) in mc.iter().zip(&closed) {
        let m = m / count;
        if *e == 0.0 {
            worst = worst.max(m.abs());
        } else {
            worst = worst.max((m - e).abs() / e.abs());
        }
    }
    Ok(worst)
}

/// Errors of the Kronecker-factored sampler on random `a × a` and `g × g` factors.
#[derive(Debug, Clone, PartialEq)]
pub struct KroneckerErrors {
    /// Largest elementwise difference between factor-wise and dense inverses.
    pub inverse_error: f64,
    /// Relative Frobenius error of the empirical sample covariance.
    pub covariance_error: f64,
}

fn random_spd(dim: usize, rng: &mut Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    &m * m.transpose() + DMatrix::identity(dim, dim) * 0.5
}

pub fn kronecker_oracle(a: usize, g: usize, draws: usize, seed: u64) -> Result<KroneckerErrors> {
    let mut rng = rng::seeded(seed);
    let fa = random_spd(a, &mut rng);
    let fg = random_spd(g, &mut rng);
    let block = KroneckerBlock::new(fa.clone(), fg.clone())?;
    let dense = fa
        .kronecker(&fg)
        .try_inverse()
        .ok_or_else(|| crate::Error::Decomposition("dense Kronecker product is singular".into()))?;
    let factored = block.covariance();
    let inverse_error = (&factored - &dense).abs().max();

    let dim = a * g;
    let zero = vec![0.0; dim];
    let mut second = DMatrix::<f64>::zeros(dim, dim);
    for _ in 0..draws {
        let s = nalgebra::DVector::from_vec(block.sample(&zero, &mut rng)?);
        second += &s * s.transpose();
    }
    second /= draws as f64;
    let covariance_error = (&second - &dense).norm() / dense.norm();
    Ok(KroneckerErrors {
        inverse_error,
        covariance_error,
    })
}

/// Signature of a gradient under test: `(arch, params, features, action, target) -> ∇(target − q)²`.
pub type GradientFn<'a> =
    dyn Fn(&Architecture, &[f64], &[f64], usize, f64) -> Result<ParamVector> + 'a;

/// Largest relative error between `gradient` and central finite differences
/// with step `1e-5`, over `trials` random `[3, 4, 2]` networks, inputs,
/// actions and targets. Coordinates with both derivatives below `1e-6` are
/// compared in absolute terms.
pub fn finite_difference_oracle(
    trials: usize,
    seed: u64,
    gradient: &GradientFn<'_>,
) -> Result<f64> {
    const STEP: f64 = 1e-5;
    let arch = Architecture::new(&[3, 4, 2], Activation::leaky())?;
    let mut rng = rng::seeded(seed);
    let loss = |params: &[f64], x: &[f64], a: usize, t: f64| -> Result<f64> {
        let q = arch.forward(params, x)?[a];
        Ok((t - q) * (t - q))
    };
    let mut worst: f64 = 0.0;
    for trial in 0..trials {
        let mut params = arch.init_params(seed.wrapping_add(trial as u64));
        for p in params.iter_mut() {
            *p += 0.1 * rng.sample::<f64, _>(StandardNormal);
        }
        let x: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
        let action = rng.random_range(0..2);
        let target: f64 = rng.sample(StandardNormal);
        let analytic = gradient(&arch, &params, &x, action, target)?;
        for i in 0..params.len() {
            let saved = params[i];
            params[i] = saved + STEP;
            let up = loss(&params, &x, action, target)?;
            params[i] = saved - STEP;
            let down = loss(&params, &x, action, target)?;
            params[i] = saved;
            let numeric = (up - down) / (2.0 * STEP);
            let scale = analytic[i].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic[i] - numeric).abs() / scale);
        }
    }
    Ok(worst)
}

/// The library's analytic squared-error gradient, for [`finite_difference_oracle`].
pub fn analytic_gradient(
    arch: &Architecture,
    params: &[f64],
    features: &[f64],
    action: usize,
    target: f64,
) -> Result<ParamVector> {
    arch.grad_squared_error(params, features, action, target)
}

/// Every numerical oracle at its acceptance size and tolerance.
pub fn oracle_check() -> Result<OracleReport> {
    let conjugate = conjugate_oracle(1000, 100_000, 11)?;
    let kron = kronecker_oracle(3, 2, 100_000, 13)?;
    Ok(OracleReport {
        checks: vec![
            OracleCheck::new("conjugate_mean", conjugate.mean_error, 1e-6),
            OracleCheck::new("conjugate_variance", conjugate.variance_error, 1e-2),
            OracleCheck::new(
                "conjugate_sampled_variance",
                conjugate.sampled_variance_error,
                3e-2,
            ),
            OracleCheck::new("fisher_unit_gaussian", fisher_oracle(100_000, 12)?, 5e-2),
            OracleCheck::new(
                "variance_reduced_fisher",
                variance_reduced_oracle(100_000, 14)?,
                1e-2,
            ),
            OracleCheck::new("kronecker_inverse", kron.inverse_error, 1e-10),
            OracleCheck::new("kronecker_covariance", kron.covariance_error, 5e-2),
            OracleCheck::new(
                "finite_difference_gradient",
                finite_difference_oracle(100, 15, &analytic_gradient)?,
                1e-5,
            ),
        ],
    })
}
