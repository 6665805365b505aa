//! Dense feed-forward networks with hand-written reverse-mode gradients.
//!
//! Hidden layers use ReLU. The output layer is either linear (critics) or a
//! `bound * tanh(z)` squashing (actors). Everything is `f64`.
//!
//! Batched tensors are row-major `(batch, features)`. Layer `l` stores its
//! weight matrix with shape `(layer_sizes[l + 1], layer_sizes[l])`, so a layer
//! computes `y = x W^T + b`.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum OutputActivation {
    Linear,
    /// `bound * tanh(z)`.
    ScaledTanh { bound: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    output: OutputActivation,
}

/// Per-layer activations recorded by [`Mlp::forward_cached`].
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// `layer_inputs[l]` is the input fed to layer `l`.
    layer_inputs: Vec<Array2<f64>>,
    /// Pre-activation of the last layer.
    last_pre: Array2<f64>,
    output: Array2<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }

    pub fn batch_size(&self) -> usize {
        self.output.nrows()
    }
}

/// Gradient tensors with the same layout as the network parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrads {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        MlpGrads {
            weights: net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: net.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()))
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|g| g.is_finite())
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            w.mapv_inplace(|x| x * factor);
        }
        for b in &mut self.biases {
            b.mapv_inplace(|x| x * factor);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, g| m.max(g.abs()))
    }
}

impl Mlp {
    /// Randomly initialised network. Weights and biases of each layer are drawn
    /// from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new<R: Rng + ?Sized>(
        layer_sizes: &[usize],
        output: OutputActivation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes, output)?;
        for (w, b) in net.weights.iter_mut().zip(net.biases.iter_mut()) {
            let bound = 1.0 / (w.ncols() as f64).sqrt();
            w.mapv_inplace(|_| rng.random_range(-bound..bound));
            b.mapv_inplace(|_| rng.random_range(-bound..bound));
        }
        Ok(net)
    }

    pub fn zeros(layer_sizes: &[usize], output: OutputActivation) -> Result<Self> {
        validate_layer_sizes(layer_sizes)?;
        validate_output(output)?;
        let weights = layer_sizes
            .windows(2)
            .map(|p| Array2::zeros((p[1], p[0])))
            .collect();
        let biases = layer_sizes[1..].iter().map(|&n| Array1::zeros(n)).collect();
        Ok(Mlp {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            output,
        })
    }

    pub fn from_parts(
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
        output: OutputActivation,
    ) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Argument("network needs at least one layer".into()));
        }
        ensure_len("bias count", weights.len(), biases.len())?;
        let mut layer_sizes = vec![weights[0].ncols()];
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            ensure_len("layer input width", layer_sizes[l], w.ncols())?;
            ensure_len("bias length", w.nrows(), b.len())?;
            layer_sizes.push(w.nrows());
        }
        validate_layer_sizes(&layer_sizes)?;
        validate_output(output)?;
        let net = Mlp {
            layer_sizes,
            weights,
            biases,
            output,
        };
        if !net.is_finite() {
            return Err(Error::Numeric("non-finite network parameter".into()));
        }
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated non-empty")
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Array1<f64>] {
        &mut self.biases
    }

    pub fn num_params(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.len() + b.len())
            .sum()
    }

    /// All parameters in layer order, weights (row-major) before biases.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| w.iter_mut().chain(b.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|p| p.is_finite())
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.layer_sizes == other.layer_sizes
    }

    pub fn copy_from(&mut self, other: &Mlp) -> Result<()> {
        self.check_same_shape(other)?;
        self.clone_from(other);
        Ok(())
    }

    fn check_same_shape(&self, other: &Mlp) -> Result<()> {
        ensure_len("layer count", self.layer_sizes.len(), other.layer_sizes.len())?;
        for (&a, &b) in self.layer_sizes.iter().zip(&other.layer_sizes) {
            ensure_len("layer width", a, b)?;
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::Argument(e.to_string()))?;
        Ok(self.forward_batch(x)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_batch(&self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        ensure_len("network input", self.input_dim(), input.ncols())?;
        let last = self.weights.len() - 1;
        let mut h = input.to_owned();
        for l in 0..last {
            h = self.affine(l, h.view());
            h.mapv_inplace(relu);
        }
        let z = self.affine(last, h.view());
        Ok(self.squash(z))
    }

    pub fn forward_cached(&self, input: ArrayView2<f64>) -> Result<ForwardCache> {
        ensure_len("network input", self.input_dim(), input.ncols())?;
        let last = self.weights.len() - 1;
        let mut layer_inputs = Vec::with_capacity(self.weights.len());
        layer_inputs.push(input.to_owned());
        for l in 0..last {
            let mut h = self.affine(l, layer_inputs[l].view());
            h.mapv_inplace(relu);
            layer_inputs.push(h);
        }
        let last_pre = self.affine(last, layer_inputs[last].view());
        let output = self.squash(last_pre.clone());
        Ok(ForwardCache {
            layer_inputs,
            last_pre,
            output,
        })
    }

    /// Gradients of `sum(output * output_grad)` with respect to the parameters
    /// and the input, summed over the batch.
    pub fn backward_batch(
        &self,
        cache: &ForwardCache,
        output_grad: ArrayView2<f64>,
    ) -> Result<(MlpGrads, Array2<f64>)> {
        let (grads, dx) = self.backprop(cache, output_grad, true)?;
        Ok((grads.expect("requested parameter gradients"), dx))
    }

    /// Input gradient only; skips the weight-gradient products.
    pub fn input_grad_batch(
        &self,
        cache: &ForwardCache,
        output_grad: ArrayView2<f64>,
    ) -> Result<Array2<f64>> {
        Ok(self.backprop(cache, output_grad, false)?.1)
    }

    pub fn backward(&self, input: &[f64], output_grad: &[f64]) -> Result<(MlpGrads, Vec<f64>)> {
        let x = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::Argument(e.to_string()))?;
        let g = ArrayView2::from_shape((1, output_grad.len()), output_grad)
            .map_err(|e| Error::Argument(e.to_string()))?;
        let cache = self.forward_cached(x)?;
        let (grads, dx) = self.backward_batch(&cache, g)?;
        Ok((grads, dx.into_raw_vec_and_offset().0))
    }

    fn backprop(
        &self,
        cache: &ForwardCache,
        output_grad: ArrayView2<f64>,
        want_params: bool,
    ) -> Result<(Option<MlpGrads>, Array2<f64>)> {
        ensure_len("output gradient width", self.output_dim(), output_grad.ncols())?;
        ensure_len("output gradient rows", cache.batch_size(), output_grad.nrows())?;
        let n_layers = self.weights.len();
        let mut delta = match self.output {
            OutputActivation::Linear => output_grad.to_owned(),
            OutputActivation::ScaledTanh { bound } => {
                let mut d = output_grad.to_owned();
                d.zip_mut_with(&cache.last_pre, |g, &z| {
                    let t = z.tanh();
                    *g *= bound * (1.0 - t * t);
                });
                d
            }
        };
        let mut grads = want_params.then(|| MlpGrads {
            weights: Vec::with_capacity(n_layers),
            biases: Vec::with_capacity(n_layers),
        });
        for l in (0..n_layers).rev() {
            if let Some(g) = grads.as_mut() {
                g.weights.push(delta.t().dot(&cache.layer_inputs[l]));
                g.biases.push(delta.sum_axis(Axis(0)));
            }
            let mut dx = delta.dot(&self.weights[l]);
            if l > 0 {
                // ReLU derivative, read off the stored post-activation.
                dx.zip_mut_with(&cache.layer_inputs[l], |d, &h| {
                    if h <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            delta = dx;
        }
        if let Some(g) = grads.as_mut() {
            g.weights.reverse();
            g.biases.reverse();
        }
        Ok((grads, delta))
    }

    fn affine(&self, l: usize, x: ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights[l].t());
        z += &self.biases[l];
        z
    }

    fn squash(&self, mut z: Array2<f64>) -> Array2<f64> {
        if let OutputActivation::ScaledTanh { bound } = self.output {
            z.mapv_inplace(|v| bound * v.tanh());
        }
        z
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = BufWriter::new(File::create(path)?);
        serde_json::to_writer(file, &MlpCheckpoint::from(self))?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let file = BufReader::new(File::open(path)?);
        let ckpt: MlpCheckpoint = serde_json::from_reader(file)?;
        ckpt.into_mlp()
    }
}

/// Versioned on-disk form of a network.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MlpCheckpoint {
    pub format: String,
    pub version: u32,
    pub network: Mlp,
}

pub const MLP_FORMAT: &str = "codesign-mlp";
pub const MLP_FORMAT_VERSION: u32 = 1;

impl From<&Mlp> for MlpCheckpoint {
    fn from(net: &Mlp) -> Self {
        MlpCheckpoint {
            format: MLP_FORMAT.to_string(),
            version: MLP_FORMAT_VERSION,
            network: net.clone(),
        }
    }
}

impl MlpCheckpoint {
    pub fn into_mlp(self) -> Result<Mlp> {
        if self.format != MLP_FORMAT || self.version != MLP_FORMAT_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported network checkpoint {} v{}",
                self.format, self.version
            )));
        }
        let net = self.network;
        Mlp::from_parts(net.weights, net.biases, net.output)
    }
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

fn validate_layer_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(Error::Argument(format!(
            "layer sizes must have at least two positive entries, got {sizes:?}"
        )));
    }
    Ok(())
}

fn validate_output(output: OutputActivation) -> Result<()> {
    match output {
        OutputActivation::ScaledTanh { bound } if !(bound.is_finite() && bound > 0.0) => Err(
            Error::Argument(format!("tanh output bound must be positive, got {bound}")),
        ),
        _ => Ok(()),
    }
}

/// Polyak averaging: `target <- tau * online + (1 - tau) * target`.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Argument(format!("tau must lie in [0, 1], got {tau}")));
    }
    target.check_same_shape(online)?;
    for (t, o) in target.params_mut().zip(online.params()) {
        *t = tau * o + (1.0 - tau) * *t;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step_count: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(net: &Mlp, config: AdamConfig) -> Result<Self> {
        let ok = config.learning_rate > 0.0
            && (0.0..1.0).contains(&config.beta1)
            && config.beta1 > 0.0
            && (0.0..1.0).contains(&config.beta2)
            && config.beta2 > 0.0
            && config.epsilon > 0.0;
        if !ok {
            return Err(Error::Argument(format!("invalid Adam settings {config:?}")));
        }
        let shapes: Vec<Vec<f64>> = net
            .weights
            .iter()
            .zip(&net.biases)
            .map(|(w, b)| vec![0.0; w.len() + b.len()])
            .collect();
        Ok(AdamState {
            config,
            step_count: 0,
            first_moment: shapes.clone(),
            second_moment: shapes,
        })
    }

    pub fn reset(&mut self) {
        self.step_count = 0;
        for m in self.first_moment.iter_mut().chain(self.second_moment.iter_mut()) {
            m.fill(0.0);
        }
    }

    /// One bias-corrected Adam update. Rejects non-finite gradients before
    /// touching any state.
    pub fn step(&mut self, net: &mut Mlp, grads: &MlpGrads) -> Result<()> {
        ensure_len("gradient layers", net.weights.len(), grads.weights.len())?;
        ensure_len("gradient layers", net.biases.len(), grads.biases.len())?;
        ensure_len("moment layers", net.weights.len(), self.first_moment.len())?;
        for l in 0..net.weights.len() {
            ensure_len("weight gradient", net.weights[l].len(), grads.weights[l].len())?;
            ensure_len("bias gradient", net.biases[l].len(), grads.biases[l].len())?;
            ensure_len(
                "moment size",
                net.weights[l].len() + net.biases[l].len(),
                self.first_moment[l].len(),
            )?;
        }
        if !grads.is_finite() {
            return Err(Error::Numeric("non-finite gradient passed to Adam".into()));
        }

        self.step_count += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step_count as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for l in 0..net.weights.len() {
            let m = &mut self.first_moment[l];
            let v = &mut self.second_moment[l];
            let params = net.weights[l].iter_mut().chain(net.biases[l].iter_mut());
            let g = grads.weights[l].iter().chain(grads.biases[l].iter());
            for (((p, &g), m), v) in params.zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}
