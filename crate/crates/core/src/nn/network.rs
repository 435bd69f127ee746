use std::ops::{Deref, DerefMut};

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng;

/// Flat vector holding every parameter of a network.
///
/// Packing is layer-major; within a layer the weight matrix comes first in
/// row-major order (`W[out][in]`), followed by the bias vector.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        ParamVector(vec![0.0; len])
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        ParamVector(values)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    /// `x` for `x >= 0`, `slope * x` otherwise. The derivative at 0 is 1.
    LeakyRelu { slope: f64 },
    /// `max(x, 0)`. The derivative at 0 is taken as 1 to match the leaky variant.
    Relu,
}

impl Activation {
    pub const DEFAULT_SLOPE: f64 = 0.01;

    pub fn leaky() -> Self {
        Activation::LeakyRelu {
            slope: Self::DEFAULT_SLOPE,
        }
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu { slope } => {
                if x >= 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Activation::Relu => x.max(0.0),
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu { slope } => {
                if x >= 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Relu => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerOffsets {
    inputs: usize,
    outputs: usize,
    weights: usize,
    bias: usize,
}

/// One layer as `(weights[out][in], bias)`.
pub type LayerParams = (Vec<Vec<f64>>, Vec<f64>);

/// Shape of a fully connected network: sizes, activation and parameter layout.
///
/// The architecture is separate from the parameters so that one shape can be
/// evaluated under the online, target and sampled parameter vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    layer_sizes: Vec<usize>,
    activation: Activation,
    layers: Vec<LayerOffsets>,
    num_params: usize,
}

/// `dq/dθ[start + j] = scale * input[j]` for `j` in `active` (all of
/// `input` when `active` is `None`).
#[derive(Debug, Clone, Copy)]
pub struct GradRow<'a> {
    pub start: usize,
    pub scale: f64,
    pub input: &'a [f64],
    pub active: Option<&'a [usize]>,
}

impl GradRow<'_> {
    pub fn for_each(&self, mut visit: impl FnMut(usize, f64)) {
        match self.active {
            Some(active) => {
                for &j in active {
                    visit(self.start + j, self.scale * self.input[j]);
                }
            }
            None => {
                for (j, &x) in self.input.iter().enumerate() {
                    visit(self.start + j, self.scale * x);
                }
            }
        }
    }

    /// `out[start + j] += coef * dq/dθ[start + j]` for every visited `j`.
    pub fn add_scaled(&self, out: &mut [f64], coef: f64) {
        let c = coef * self.scale;
        match self.active {
            Some(active) => {
                for &j in active {
                    out[self.start + j] += c * self.input[j];
                }
            }
            None => {
                let out = &mut out[self.start..self.start + self.input.len()];
                for (o, &x) in out.iter_mut().zip(self.input) {
                    *o += c * x;
                }
            }
        }
    }

    /// `out[start + j] += (coef * dq/dθ[start + j])²` for every visited `j`.
    pub fn add_squared(&self, out: &mut [f64], coef: f64) {
        let c = coef * self.scale;
        match self.active {
            Some(active) => {
                for &j in active {
                    let g = c * self.input[j];
                    out[self.start + j] += g * g;
                }
            }
            None => {
                let out = &mut out[self.start..self.start + self.input.len()];
                for (o, &x) in out.iter_mut().zip(self.input) {
                    let g = c * x;
                    *o += g * g;
                }
            }
        }
    }
}

/// Dot product with four independent partial sums.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, ra) = a.as_chunks::<4>();
    let (cb, rb) = b.as_chunks::<4>();
    for (x, y) in ca.iter().zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Activations recorded by a forward pass; reused by the backward pass.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    /// `pre[l]`: pre-activations of layer `l`.
    pre: Vec<Vec<f64>>,
    /// `post[0]` is the input, `post[l + 1]` the activated output of layer `l`.
    post: Vec<Vec<f64>>,
    /// Indices of the nonzero input features.
    active_inputs: Vec<usize>,
    delta: Vec<f64>,
    delta_next: Vec<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.post.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Architecture {
    pub fn new(layer_sizes: &[usize], activation: Activation) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::config(
                "layer_sizes",
                "need at least an input and an output layer",
            ));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::config(
                "layer_sizes",
                "all layer sizes must be positive",
            ));
        }
        if let Activation::LeakyRelu { slope } = activation {
            if !(slope > 0.0 && slope < 1.0) {
                return Err(Error::config("leaky_slope", "slope must lie in (0, 1)"));
            }
        }
        let mut layers = Vec::with_capacity(layer_sizes.len() - 1);
        let mut offset = 0;
        for pair in layer_sizes.windows(2) {
            let (inputs, outputs) = (pair[0], pair[1]);
            let weights = offset;
            let bias = weights + inputs * outputs;
            offset = bias + outputs;
            layers.push(LayerOffsets {
                inputs,
                outputs,
                weights,
                bias,
            });
        }
        Ok(Architecture {
            layer_sizes: layer_sizes.to_vec(),
            activation,
            layers,
            num_params: offset,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn num_actions(&self) -> usize {
        *self.layer_sizes.last().expect("validated in new")
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Weights in uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases zero.
    pub fn init_params(&self, seed: u64) -> ParamVector {
        let mut rng = rng::seeded(seed);
        let mut params = ParamVector::zeros(self.num_params);
        for layer in &self.layers {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for w in &mut params[layer.weights..layer.bias] {
                *w = rng.random_range(-bound..=bound);
            }
        }
        params
    }

    /// Weight matrix (row-major, `outputs x inputs`) and bias of layer `l`.
    pub fn layer<'a>(&self, params: &'a [f64], l: usize) -> (&'a [f64], &'a [f64]) {
        let layer = self.layers[l];
        (
            &params[layer.weights..layer.bias],
            &params[layer.bias..layer.bias + layer.outputs],
        )
    }

    /// Splits a parameter vector into per-layer `(weights[out][in], bias)`.
    pub fn unpack(&self, params: &[f64]) -> Result<Vec<LayerParams>> {
        self.check_params(params)?;
        Ok((0..self.layers.len())
            .map(|l| {
                let (w, b) = self.layer(params, l);
                let rows = w
                    .chunks(self.layers[l].inputs)
                    .map(<[f64]>::to_vec)
                    .collect();
                (rows, b.to_vec())
            })
            .collect())
    }

    pub fn pack(&self, layers: &[LayerParams]) -> Result<ParamVector> {
        if layers.len() != self.layers.len() {
            return Err(Error::Contract(format!(
                "expected {} layers, got {}",
                self.layers.len(),
                layers.len()
            )));
        }
        let mut out = Vec::with_capacity(self.num_params);
        for ((weights, bias), shape) in layers.iter().zip(&self.layers) {
            if weights.len() != shape.outputs
                || weights.iter().any(|r| r.len() != shape.inputs)
                || bias.len() != shape.outputs
            {
                return Err(Error::Contract("layer shape mismatch in pack".into()));
            }
            weights.iter().for_each(|r| out.extend_from_slice(r));
            out.extend_from_slice(bias);
        }
        Ok(ParamVector(out))
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params {
            return Err(Error::Contract(format!(
                "parameter vector has length {}, architecture needs {}",
                params.len(),
                self.num_params
            )));
        }
        Ok(())
    }

    fn check_inputs(&self, params: &[f64], features: &[f64]) -> Result<()> {
        self.check_params(params)?;
        if features.len() != self.input_size() {
            return Err(Error::Contract(format!(
                "feature vector has length {}, network expects {}",
                features.len(),
                self.input_size()
            )));
        }
        Ok(())
    }

    fn check_action(&self, action: usize) -> Result<()> {
        if action >= self.num_actions() {
            return Err(Error::Contract(format!(
                "action {action} out of range for {} actions",
                self.num_actions()
            )));
        }
        Ok(())
    }

    /// Q-values for all actions.
    pub fn forward(&self, params: &[f64], features: &[f64]) -> Result<Vec<f64>> {
        self.check_inputs(params, features)?;
        let mut cache = ForwardCache::default();
        self.forward_cached(params, features, &mut cache);
        Ok(cache.output().to_vec())
    }

    /// Unchecked forward pass; shapes must already be known to match.
    pub fn forward_cached(&self, params: &[f64], features: &[f64], cache: &mut ForwardCache) {
        let n = self.layers.len();
        cache.pre.resize_with(n, Vec::new);
        cache.post.resize_with(n + 1, Vec::new);
        cache.post[0].clear();
        cache.post[0].extend_from_slice(features);
        cache.active_inputs.clear();
        cache.active_inputs.extend(
            features
                .iter()
                .enumerate()
                .filter(|(_, &x)| x != 0.0)
                .map(|(i, _)| i),
        );

        for (l, layer) in self.layers.iter().enumerate() {
            let weights = &params[layer.weights..layer.bias];
            let bias = &params[layer.bias..layer.bias + layer.outputs];
            let (head, tail) = cache.post.split_at_mut(l + 1);
            let input = &head[l];
            let pre = &mut cache.pre[l];
            pre.clear();
            pre.extend_from_slice(bias);
            if l == 0 {
                // Sparse inputs (one-hot observations) only touch their own columns.
                for &j in &cache.active_inputs {
                    let x = input[j];
                    for (o, z) in pre.iter_mut().enumerate() {
                        *z += weights[o * layer.inputs + j] * x;
                    }
                }
            } else {
                for (o, z) in pre.iter_mut().enumerate() {
                    let row = &weights[o * layer.inputs..(o + 1) * layer.inputs];
                    *z += dot(row, input);
                }
            }
            let out = &mut tail[0];
            out.clear();
            if l + 1 == n {
                out.extend_from_slice(pre);
            } else {
                let act = self.activation;
                out.extend(pre.iter().map(|&z| act.apply(z)));
            }
        }
    }

    /// Calls `visit(index, dq/dθ_index)` for every parameter that can have a
    /// nonzero derivative of `q(s, action)`. Parameters not visited have an
    /// exactly zero derivative and none is visited twice. `cache` must hold a
    /// forward pass under `params`.
    pub fn visit_grad_q(
        &self,
        params: &[f64],
        cache: &mut ForwardCache,
        action: usize,
        mut visit: impl FnMut(usize, f64),
    ) {
        self.visit_grad_rows(params, cache, action, |row| row.for_each(&mut visit));
    }

    /// Row-wise form of [`Self::visit_grad_q`]: each [`GradRow`] covers one
    /// weight row (or one bias) of one layer.
    pub fn visit_grad_rows(
        &self,
        params: &[f64],
        cache: &mut ForwardCache,
        action: usize,
        mut visit: impl FnMut(GradRow<'_>),
    ) {
        let n = self.layers.len();
        let ForwardCache {
            pre,
            post,
            active_inputs,
            delta,
            delta_next,
        } = cache;
        // dq/dz at the output layer is the indicator of `action`.
        delta.clear();
        delta.resize(self.layers[n - 1].outputs, 0.0);
        delta[action] = 1.0;

        for l in (0..n).rev() {
            let layer = self.layers[l];
            let input = &post[l];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                visit(GradRow {
                    start: layer.weights + o * layer.inputs,
                    scale: d,
                    input,
                    active: (l == 0).then_some(active_inputs.as_slice()),
                });
                visit(GradRow {
                    start: layer.bias + o,
                    scale: d,
                    input: &[1.0],
                    active: None,
                });
            }
            if l == 0 {
                break;
            }
            let weights = &params[layer.weights..layer.bias];
            delta_next.clear();
            delta_next.resize(layer.inputs, 0.0);
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (acc, &w) in delta_next.iter_mut().zip(row) {
                    *acc += d * w;
                }
            }
            let act = self.activation;
            for (acc, &z) in delta_next.iter_mut().zip(&pre[l - 1]) {
                *acc *= act.derivative(z);
            }
            std::mem::swap(delta, delta_next);
        }
    }

    /// Gradient of `q(features, action)` with respect to all parameters.
    pub fn grad_q(&self, params: &[f64], features: &[f64], action: usize) -> Result<ParamVector> {
        self.check_inputs(params, features)?;
        self.check_action(action)?;
        let mut cache = ForwardCache::default();
        self.forward_cached(params, features, &mut cache);
        let mut grad = ParamVector::zeros(self.num_params);
        self.visit_grad_q(params, &mut cache, action, |i, g| grad[i] += g);
        Ok(grad)
    }

    /// Gradient of `(target - q(features, action))^2` with the target held fixed.
    pub fn grad_squared_error(
        &self,
        params: &[f64],
        features: &[f64],
        action: usize,
        target: f64,
    ) -> Result<ParamVector> {
        if !target.is_finite() {
            return Err(Error::NonFinite("regression target"));
        }
        self.check_inputs(params, features)?;
        self.check_action(action)?;
        let mut cache = ForwardCache::default();
        self.forward_cached(params, features, &mut cache);
        let scale = -2.0 * (target - cache.output()[action]);
        let mut grad = ParamVector::zeros(self.num_params);
        if scale != 0.0 {
            self.visit_grad_q(params, &mut cache, action, |i, g| grad[i] += scale * g);
        }
        Ok(grad)
    }
}

/// An architecture together with one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    pub arch: Architecture,
    pub params: ParamVector,
}

impl MlpNetwork {
    /// Leaky-ReLU network with deterministic seeded initialisation.
    pub fn init(layer_sizes: &[usize], slope: f64, seed: u64) -> Result<Self> {
        Self::init_with(layer_sizes, Activation::LeakyRelu { slope }, seed)
    }

    pub fn init_with(layer_sizes: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        let arch = Architecture::new(layer_sizes, activation)?;
        let params = arch.init_params(seed);
        Ok(MlpNetwork { arch, params })
    }

    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.arch.forward(&self.params, features)
    }

    pub fn grad_q(&self, features: &[f64], action: usize) -> Result<ParamVector> {
        self.arch.grad_q(&self.params, features, action)
    }

    pub fn grad_squared_error(
        &self,
        features: &[f64],
        action: usize,
        target: f64,
    ) -> Result<ParamVector> {
        self.arch
            .grad_squared_error(&self.params, features, action, target)
    }
}
