use eve_core::nn::{Activation, Architecture, MlpNetwork};
use eve_core::rng;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

fn leaky(x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        0.01 * x
    }
}

/// Dense forward pass written against the packed layout: per layer, an
/// `outputs × inputs` row-major weight block followed by the bias.
fn dense_forward(sizes: &[usize], params: &[f64], x: &[f64]) -> Vec<f64> {
    let mut h = DVector::from_column_slice(x);
    let mut offset = 0;
    for l in 0..sizes.len() - 1 {
        let (i, o) = (sizes[l], sizes[l + 1]);
        let w = DMatrix::from_row_slice(o, i, &params[offset..offset + o * i]);
        offset += o * i;
        let b = DVector::from_column_slice(&params[offset..offset + o]);
        offset += o;
        h = w * h + b;
        if l + 2 < sizes.len() {
            h.apply(|v| *v = leaky(*v));
        }
    }
    assert_eq!(offset, params.len());
    h.as_slice().to_vec()
}

#[test]
fn forward_matches_dense_matrix_oracle() {
    let mut r = rng::seeded(0);
    for trial in 0..50 {
        let sizes = [5, 7, 6, 3];
        let net = MlpNetwork::init(&sizes, 0.01, trial).unwrap();
        let x: Vec<f64> = (0..5)
            .map(|i| {
                if i == 2 {
                    0.0
                } else {
                    r.sample(StandardNormal)
                }
            })
            .collect();
        let ours = net.forward(&x).unwrap();
        let oracle = dense_forward(&sizes, &net.params, &x);
        for (a, b) in ours.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }
}

/// Max relative error between the analytic gradient of `(t - q)²` and central
/// differences; magnitudes below 1e-4 are compared absolutely.
fn fd_error(arch: &Architecture, params: &mut [f64], x: &[f64], a: usize, t: f64) -> f64 {
    const H: f64 = 1e-5;
    let analytic = arch.grad_squared_error(params, x, a, t).unwrap();
    let loss = |p: &[f64]| {
        let q = arch.forward(p, x).unwrap()[a];
        (t - q) * (t - q)
    };
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        let saved = params[i];
        params[i] = saved + H;
        let up = loss(params);
        params[i] = saved - H;
        let down = loss(params);
        params[i] = saved;
        let numeric = (up - down) / (2.0 * H);
        let scale = analytic[i].abs().max(numeric.abs()).max(1e-4);
        worst = worst.max((analytic[i] - numeric).abs() / scale);
    }
    worst
}

#[test]
fn hundred_random_finite_difference_checks() {
    let arch = Architecture::new(&[3, 4, 2], Activation::leaky()).unwrap();
    let mut r = rng::seeded(42);
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let mut params = arch.init_params(1000 + trial);
        for p in params.iter_mut() {
            *p += 0.2 * r.sample::<f64, _>(StandardNormal);
        }
        let x: Vec<f64> = (0..3).map(|_| r.sample(StandardNormal)).collect();
        let a = r.random_range(0..2);
        let t: f64 = 2.0 * r.sample::<f64, _>(StandardNormal);
        worst = worst.max(fd_error(&arch, &mut params, &x, a, t));
    }
    assert!(worst < 1e-5, "max relative error {worst}");
}

#[test]
fn deeper_networks_pass_finite_differences() {
    let arch = Architecture::new(&[6, 5, 5, 4, 3], Activation::leaky()).unwrap();
    let mut r = rng::seeded(7);
    for trial in 0..10 {
        let mut params = arch.init_params(trial);
        let x: Vec<f64> = (0..6).map(|_| r.sample(StandardNormal)).collect();
        let err = fd_error(&arch, &mut params, &x, (trial % 3) as usize, 0.5);
        assert!(err < 1e-5, "trial {trial}: {err}");
    }
}

#[test]
fn sparse_one_hot_inputs_match_dense_gradients() {
    let arch = Architecture::new(&[9, 6, 2], Activation::leaky()).unwrap();
    let params = arch.init_params(3);
    let mut x = vec![0.0; 9];
    x[4] = 1.0;
    let sparse = arch.grad_q(&params, &x, 1).unwrap();
    let mut x_dense = x.clone();
    x_dense[0] = 1e-300;
    let dense = arch.grad_q(&params, &x_dense, 1).unwrap();
    for (a, b) in sparse.iter().zip(dense.iter()) {
        assert!((a - b).abs() < 1e-12);
    }
    // Columns of inactive inputs have zero gradient.
    for o in 0..6 {
        for j in (0..9).filter(|&j| j != 4) {
            assert_eq!(sparse[o * 9 + j], 0.0);
        }
    }
}
