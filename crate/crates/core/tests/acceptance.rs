//! Acceptance suite: one pass/fail line per criterion, nonzero exit if any fails.
//!
//! Every reference value is computed here, independently of the library's own
//! oracle module. The learning criteria train 10-seed sweeps at Deep Sea L=10
//! and take tens of minutes on one core.

use std::process::{Command, ExitCode};
use std::time::Instant;

use eve_core::agent::{Acting, Bootstrap, EveConfig};
use eve_core::harness::{
    exploration_score, probe_uncertainty, run_seeds, ActivationKind, AgentKind, RunConfig,
};
use eve_core::nn::{Activation, Architecture};
use eve_core::posterior::{sample_posterior, FisherAccumulator, KroneckerBlock, PosteriorSpec};
use eve_core::rng;
use eve_core::Error;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

const SEEDS: u64 = 10;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: String) -> Self {
        Outcome { passed, detail }
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Gaussian location model with unit noise and a flat prior: the exact
/// posterior is `N(sample mean, 1/n)`.
fn conjugate() -> Outcome {
    const N: usize = 1000;
    const DRAWS: usize = 1_000_000;
    let mut r = rng::seeded(100);
    let data: Vec<f64> = (0..N)
        .map(|_| -0.4 + r.sample::<f64, _>(StandardNormal))
        .collect();
    let exact_mean = mean(&data);
    let exact_variance = 1.0 / N as f64;

    // Maximum-likelihood fit through the library's squared-error gradient of a
    // bias-only output (zero input), so `q = b`.
    let arch = Architecture::new(&[1, 1], Activation::leaky()).unwrap();
    let mut params = arch.init_params(0);
    for _ in 0..100 {
        let mut grad = vec![0.0; params.len()];
        for &z in &data {
            let g = arch.grad_squared_error(&params, &[0.0], 0, z).unwrap();
            for (a, b) in grad.iter_mut().zip(g.iter()) {
                *a += b / N as f64;
            }
        }
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= 0.5 * g;
        }
    }
    let fitted = arch.forward(&params, &[0.0]).unwrap()[0];

    // Unit-variance Gaussian score at the fit has expected square 1 per sample.
    let mut acc = FisherAccumulator::new(1, 0.0, 0.0, 1.0).unwrap();
    for _ in 0..N {
        acc.update(&[1.0]).unwrap();
        acc.observe(1);
    }
    let spec = PosteriorSpec::new(&acc, &[fitted]).unwrap();
    let variance = spec.variances()[0];
    let draws: Vec<f64> = (0..DRAWS)
        .map(|_| sample_posterior(&acc, &[fitted], &mut r).unwrap()[0])
        .collect();

    let mean_err = (spec.mean[0] - exact_mean).abs();
    let var_err = (variance - exact_variance).abs() / exact_variance;
    let draw_mean_err = (mean(&draws) - exact_mean).abs();
    let draw_var_err = (sample_variance(&draws) - exact_variance).abs() / exact_variance;
    Outcome::new(
        mean_err < 1e-6 && var_err < 0.01 && draw_var_err < 0.01 && draw_mean_err < 5e-4,
        format!(
            "mean error {mean_err:.1e} (<1e-6), variance rel error {var_err:.1e} (<1%), \
             {DRAWS} draws: variance rel error {draw_var_err:.1e}, mean error {draw_mean_err:.1e}"
        ),
    )
}

/// Score of a unit-variance Gaussian location model has Fisher information 1.
fn fisher() -> Outcome {
    const N: usize = 100_000;
    let mut r = rng::seeded(200);
    let beta = EveConfig::default().fisher_beta;
    let mut acc = FisherAccumulator::new(1, beta, 1e-10, 1.0).unwrap();
    let mu = 0.7;
    for _ in 0..N {
        let x = mu + r.sample::<f64, _>(StandardNormal);
        acc.update(&[x - mu]).unwrap();
    }
    let f = acc.unbiased()[0];
    let err = (f - 1.0).abs();
    Outcome::new(
        err < 0.05,
        format!("f_unbiased {f:.4} after {N} samples, error {err:.1e} (<5%)"),
    )
}

/// Closed-form expected squared gradient of `(Z' - q)²` under return noise,
/// against a Monte-Carlo average over antithetic noise draws.
fn variance_reduced() -> Outcome {
    const DRAWS: usize = 100_000;
    let arch = Architecture::new(&[3, 4, 2], Activation::leaky()).unwrap();
    let params = arch.init_params(300);
    let x = [0.3, -0.8, 1.1];
    let action = 0;
    let (gamma, sigma) = (0.99, 1.0);
    let q = arch.forward(&params, &x).unwrap()[action];
    let expected_target = q - 0.6;
    let td_error = expected_target - q;
    let grad_q = arch.grad_q(&params, &x, action).unwrap();

    let mut acc = FisherAccumulator::new(grad_q.len(), 0.0, 1e-10, 1.0).unwrap();
    acc.update_variance_reduced(&grad_q, td_error, gamma, 1, sigma * sigma)
        .unwrap();
    let closed = acc.diagonal();

    let mut r = rng::seeded(301);
    let mut mc = vec![0.0; grad_q.len()];
    for _ in 0..DRAWS / 2 {
        let eta: f64 = r.sample(StandardNormal);
        for sign in [1.0, -1.0] {
            let target = expected_target + gamma * sigma * sign * eta;
            let g = -2.0 * (target - q);
            for (m, dq) in mc.iter_mut().zip(grad_q.iter()) {
                *m += (g * dq).powi(2) / DRAWS as f64;
            }
        }
    }
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (c, m) in closed.iter().zip(&mc) {
        if *m == 0.0 {
            if *c != 0.0 {
                worst = f64::INFINITY;
            }
            continue;
        }
        checked += 1;
        worst = worst.max((c - m).abs() / m);
    }
    Outcome::new(
        worst < 0.01 && checked > 0,
        format!("max per-coordinate rel error {worst:.1e} over {checked} coordinates (<1%)"),
    )
}

/// Kronecker sampler against dense inversion of `A ⊗ G`.
fn kronecker() -> Outcome {
    const SAMPLES: usize = 100_000;
    let mut r = rng::seeded(400);
    let mut spd = |n: usize| {
        let m = DMatrix::from_fn(n, n, |_, _| r.sample::<f64, _>(StandardNormal));
        &m * m.transpose() + DMatrix::identity(n, n) * 0.5
    };
    let a = spd(3);
    let g = spd(2);
    let dense = a.kronecker(&g).try_inverse().unwrap();
    let block = KroneckerBlock::new(a, g).unwrap();
    let inverse_err = (block.covariance() - &dense).amax();

    let dim = 6;
    let zero = vec![0.0; dim];
    let mut cov = DMatrix::zeros(dim, dim);
    let mut r = rng::seeded(401);
    for _ in 0..SAMPLES {
        let s = DVector::from_vec(block.sample(&zero, &mut r).unwrap());
        cov += &s * s.transpose();
    }
    cov /= SAMPLES as f64;
    let frob = (&cov - &dense).norm() / dense.norm();
    Outcome::new(
        inverse_err < 1e-10 && frob < 0.05,
        format!(
            "factor-wise inverse max error {inverse_err:.1e} (<1e-10), \
             sample covariance rel Frobenius {frob:.1e} (<5%)"
        ),
    )
}

/// Central differences of `(t - q)²` against the analytic gradient. Entries
/// where both derivatives are below 1e-4 are compared absolutely.
fn finite_differences() -> Outcome {
    const H: f64 = 1e-5;
    let mut r = rng::seeded(500);
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let hidden = r.random_range(2..8);
        let arch = Architecture::new(&[4, hidden, 3], Activation::leaky()).unwrap();
        let mut params = arch.init_params(trial);
        for p in params.iter_mut() {
            *p += 0.1 * r.sample::<f64, _>(StandardNormal);
        }
        let x: Vec<f64> = (0..4).map(|_| r.sample(StandardNormal)).collect();
        let a = r.random_range(0..3);
        let t: f64 = r.sample(StandardNormal);
        let analytic = arch.grad_squared_error(&params, &x, a, t).unwrap();
        let loss = |p: &[f64]| (t - arch.forward(p, &x).unwrap()[a]).powi(2);
        for i in 0..params.len() {
            let saved = params[i];
            params[i] = saved + H;
            let up = loss(&params);
            params[i] = saved - H;
            let down = loss(&params);
            params[i] = saved;
            let numeric = (up - down) / (2.0 * H);
            let scale = analytic[i].abs().max(numeric.abs()).max(1e-4);
            worst = worst.max((analytic[i] - numeric).abs() / scale);
        }
    }
    Outcome::new(
        worst < 1e-5,
        format!("100 random checks, max rel error {worst:.1e} (<1e-5)"),
    )
}

fn deep_sea(agent: AgentKind) -> RunConfig {
    RunConfig {
        size: 10,
        episodes: 2000,
        agent,
        ..RunConfig::default()
    }
}

/// Solved seeds out of `SEEDS`; divergent runs count as unsolved.
fn solved_seeds(config: &RunConfig) -> (usize, usize, Vec<f64>) {
    let mut solved = 0;
    let mut diverged = 0;
    let mut fractions = Vec::new();
    for result in run_seeds(config, SEEDS) {
        match result {
            Ok(m) => {
                solved += usize::from(exploration_score(&m, config.success_threshold) == 1);
                fractions.push(m.success_fraction());
            }
            Err(Error::Divergence { .. }) => diverged += 1,
            Err(e) => panic!("run failed: {e}"),
        }
    }
    (solved, diverged, fractions)
}

fn fmt_fractions(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| format!("{x:.2}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn probe() -> Outcome {
    let config = RunConfig {
        size: 10,
        probe_episodes: 100,
        ..RunConfig::default()
    };
    let report = probe_uncertainty(&config).unwrap();
    let visits: Vec<f64> = report.cells.iter().map(|c| c.visits as f64).collect();
    let stds: Vec<f64> = report.cells.iter().map(|c| c.std).collect();
    let rho = spearman(&visits, &stds);
    let pick = |visited: bool| {
        let v: Vec<f64> = report
            .cells
            .iter()
            .filter(|c| (c.visits > 0) == visited)
            .map(|c| c.std)
            .collect();
        mean(&v)
    };
    let (unvisited, visited) = (pick(false), pick(true));
    Outcome::new(
        rho <= -0.5 && unvisited > visited,
        format!(
            "Spearman {rho:.3} (<= -0.5), mean std unvisited {unvisited:.3} > visited {visited:.3}"
        ),
    )
}

/// Spearman's rho as Pearson correlation of average ranks.
fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for (i, a) in v.iter().enumerate() {
            let below = v.iter().filter(|b| *b < a).count() as f64;
            let equal = v.iter().filter(|b| *b == a).count() as f64;
            out[i] = below + (equal + 1.0) / 2.0;
        }
        out
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, my) = (mean(&rx), mean(&ry));
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Byte comparison of two CLI invocations per configuration.
fn determinism() -> Outcome {
    let cases: [&[&str]; 3] = [
        &["run", "--size", "10", "--episodes", "150"],
        &["run", "--size", "6", "--episodes", "60", "--agent", "dqn"],
        &[
            "run",
            "--env",
            "stochastic_deep_sea",
            "--size",
            "5",
            "--episodes",
            "120",
            "--seed-env",
            "3",
            "--seed-init",
            "4",
            "--seed-run",
            "5",
        ],
    ];
    let mut identical = 0;
    for args in cases {
        let a = Command::new(env!("CARGO_BIN_EXE_eve"))
            .args(args)
            .output()
            .unwrap();
        let b = Command::new(env!("CARGO_BIN_EXE_eve"))
            .args(args)
            .output()
            .unwrap();
        if a.status.success() && a.stdout == b.stdout && !a.stdout.is_empty() {
            identical += 1;
        }
    }
    Outcome::new(
        identical == cases.len(),
        format!(
            "{identical}/{} repeated CLI runs byte-identical",
            cases.len()
        ),
    )
}

fn report(id: u32, name: &str, start: Instant, outcome: &Outcome) {
    println!(
        "[{}] criterion {id} {name}: {} [{:.1}s]",
        if outcome.passed { "PASS" } else { "FAIL" },
        outcome.detail,
        start.elapsed().as_secs_f64()
    );
}

fn main() -> ExitCode {
    let mut all = true;
    let mut check = |id: u32, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = f();
        report(id, name, start, &outcome);
        all &= outcome.passed;
    };

    check(1, "conjugate posterior", &mut conjugate);
    check(2, "fisher oracle", &mut fisher);
    check(3, "variance-reduced fisher", &mut variance_reduced);
    check(4, "kronecker sampling", &mut kronecker);
    check(5, "finite differences", &mut finite_differences);

    let eve = deep_sea(AgentKind::Eve);
    let mut eve_solved = 0;
    check(6, "deep sea L=10", &mut || {
        let (solved, diverged, fractions) = solved_seeds(&eve);
        let (dqn_solved, dqn_diverged, dqn_fractions) = solved_seeds(&deep_sea(AgentKind::Dqn));
        eve_solved = solved;
        Outcome::new(
            solved >= 8 && dqn_solved <= 1,
            format!(
                "EVE solved {solved}/{SEEDS} (>=8, {diverged} diverged; fractions {}), \
                 DQN solved {dqn_solved}/{SEEDS} (<=1, {dqn_diverged} diverged; fractions {})",
                fmt_fractions(&fractions),
                fmt_fractions(&dqn_fractions)
            ),
        )
    });
    check(7, "uncertainty probe", &mut probe);
    check(8, "ablation direction", &mut || {
        let mle = RunConfig {
            bootstrap: Bootstrap::Mle,
            ..eve.clone()
        };
        let (mle_solved, mle_diverged, mle_fractions) = solved_seeds(&mle);
        let mle_eps = RunConfig {
            acting: Acting::EpsilonGreedy,
            ..mle.clone()
        };
        let (eps_solved, eps_diverged, eps_fractions) = solved_seeds(&mle_eps);
        let relu = RunConfig {
            activation: ActivationKind::Relu,
            ..eve.clone()
        };
        let (relu_solved, relu_diverged, _) = solved_seeds(&relu);
        Outcome::new(
            mle_solved < eve_solved && eps_solved < eve_solved && relu_solved <= eve_solved,
            format!(
                "full EVE {eve_solved}/{SEEDS}; MLE bootstrap {mle_solved}/{SEEDS} \
                 (< full, {mle_diverged} diverged; fractions {}); MLE bootstrap with \
                 eps-greedy acting {eps_solved}/{SEEDS} (< full, {eps_diverged} diverged; \
                 fractions {}); ReLU {relu_solved}/{SEEDS} (<= full, {relu_diverged} diverged)",
                fmt_fractions(&mle_fractions),
                fmt_fractions(&eps_fractions)
            ),
        )
    });
    check(9, "determinism", &mut determinism);

    if all {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
