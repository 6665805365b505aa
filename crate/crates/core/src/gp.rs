//! Gaussian-process regression with a squared-exponential ARD kernel and a
//! cached Cholesky factor.
//!
//! Inputs are used as given; the optimiser feeds unit-cube coordinates.
//! With `standardize` on, targets are shifted and scaled to zero mean and
//! unit variance before fitting and the posterior is mapped back, so a unit
//! kernel variance equals the empirical target variance.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};

pub const INITIAL_JITTER: f64 = 1e-10;
pub const MAX_JITTER: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeKernel {
    pub variance: f64,
    pub lengthscales: Vec<f64>,
}

impl SeKernel {
    pub fn isotropic(dim: usize, variance: f64, lengthscale: f64) -> Self {
        SeKernel {
            variance,
            lengthscales: vec![lengthscale; dim],
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let r2: f64 = a
            .iter()
            .zip(b)
            .zip(&self.lengthscales)
            .map(|((x, y), l)| {
                let d = (x - y) / l;
                d * d
            })
            .sum();
        self.variance * (-0.5 * r2).exp()
    }

    fn validate(&self) -> Result<()> {
        if !(self.variance > 0.0) || self.lengthscales.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::Argument(format!("invalid kernel {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpModel {
    kernel: SeKernel,
    noise_variance: f64,
    standardize: bool,
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    y_mean: f64,
    y_scale: f64,
    /// Row-major lower-triangular factor of `K + (noise + jitter) I`.
    chol: Vec<f64>,
    /// `(K + (noise + jitter) I)^{-1} y` in standardised units.
    weights: Vec<f64>,
    jitter: f64,
}

impl GpModel {
    pub fn new(kernel: SeKernel, noise_variance: f64, standardize: bool) -> Result<Self> {
        kernel.validate()?;
        if !(noise_variance >= 0.0) {
            return Err(Error::Argument("noise variance must be non-negative".into()));
        }
        Ok(GpModel {
            kernel,
            noise_variance,
            standardize,
            inputs: Vec::new(),
            targets: Vec::new(),
            y_mean: 0.0,
            y_scale: 1.0,
            chol: Vec::new(),
            weights: Vec::new(),
            jitter: 0.0,
        })
    }

    /// Unit kernel variance on standardised targets, isotropic lengthscale
    /// and noise given as a fraction of the (unit) signal variance.
    pub fn standardized(dim: usize, lengthscale: f64, noise_ratio: f64) -> Result<Self> {
        Self::new(SeKernel::isotropic(dim, 1.0, lengthscale), noise_ratio, true)
    }

    pub fn kernel(&self) -> &SeKernel {
        &self.kernel
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Diagonal jitter added by the last fit beyond the noise variance.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.kernel.lengthscales.len()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Target shift and scale used by the last fit.
    pub fn standardization(&self) -> (f64, f64) {
        (self.y_mean, self.y_scale)
    }

    pub fn fit(&mut self, inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<()> {
        ensure_len("GP targets", inputs.len(), targets.len())?;
        if inputs.is_empty() {
            return Err(Error::Argument("GP fit needs at least one observation".into()));
        }
        for x in &inputs {
            ensure_len("GP input", self.dim(), x.len())?;
        }
        if inputs.iter().flatten().chain(&targets).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite GP observation".into()));
        }
        let (y_mean, y_scale) = if self.standardize {
            standardization(&targets)
        } else {
            (0.0, 1.0)
        };
        let y: Vec<f64> = targets.iter().map(|t| (t - y_mean) / y_scale).collect();

        let n = inputs.len();
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let k = self.kernel.eval(&inputs[i], &inputs[j]);
                gram[i * n + j] = k;
                gram[j * n + i] = k;
            }
        }
        let (chol, jitter) = cholesky_with_jitter(&gram, n, self.noise_variance)?;
        let weights = cholesky_solve(&chol, n, &y);

        self.inputs = inputs;
        self.targets = targets;
        self.y_mean = y_mean;
        self.y_scale = y_scale;
        self.chol = chol;
        self.weights = weights;
        self.jitter = jitter;
        Ok(())
    }

    pub fn add_observation(&mut self, x: Vec<f64>, y: f64) -> Result<()> {
        let mut inputs = self.inputs.clone();
        let mut targets = self.targets.clone();
        inputs.push(x);
        targets.push(y);
        self.fit(inputs, targets)
    }

    /// Predictive mean and variance (of the latent function) at `x`. With no
    /// data this is the prior: mean 0 and the kernel variance.
    pub fn posterior(&self, x: &[f64]) -> (f64, f64) {
        let prior = self.kernel.eval(x, x);
        if self.inputs.is_empty() {
            return (0.0, prior);
        }
        let n = self.inputs.len();
        let k_star: Vec<f64> = self.inputs.iter().map(|xi| self.kernel.eval(x, xi)).collect();
        let mean: f64 = k_star.iter().zip(&self.weights).map(|(k, w)| k * w).sum();
        let v = forward_substitute(&self.chol, n, &k_star);
        let var = (prior - v.iter().map(|v| v * v).sum::<f64>()).max(0.0);
        (
            self.y_mean + self.y_scale * mean,
            self.y_scale * self.y_scale * var,
        )
    }

    /// Log marginal likelihood of the standardised targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.inputs.len();
        if n == 0 {
            return 0.0;
        }
        let y: Vec<f64> = self
            .targets
            .iter()
            .map(|t| (t - self.y_mean) / self.y_scale)
            .collect();
        let fit: f64 = y.iter().zip(&self.weights).map(|(a, b)| a * b).sum();
        let log_det: f64 = (0..n).map(|i| self.chol[i * n + i].ln()).sum::<f64>() * 2.0;
        -0.5 * fit - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    /// Grid search over a shared lengthscale multiplier and noise ratio,
    /// keeping the best log marginal likelihood.
    pub fn refit_hyperparameters(&mut self) -> Result<()> {
        if self.inputs.is_empty() {
            return Ok(());
        }
        let inputs = self.inputs.clone();
        let targets = self.targets.clone();
        let base = self.kernel.lengthscales.clone();
        let mut best: Option<(f64, GpModel)> = None;
        for scale in [0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0] {
            for noise in [1e-6, 1e-4, 1e-2] {
                let kernel = SeKernel {
                    variance: self.kernel.variance,
                    lengthscales: base.iter().map(|l| l * scale).collect(),
                };
                let mut candidate = GpModel::new(kernel, noise * self.kernel.variance, self.standardize)?;
                if candidate.fit(inputs.clone(), targets.clone()).is_err() {
                    continue;
                }
                let lml = candidate.log_marginal_likelihood();
                if best.as_ref().is_none_or(|(b, _)| lml > *b) {
                    best = Some((lml, candidate));
                }
            }
        }
        match best {
            Some((_, model)) => {
                *self = model;
                Ok(())
            }
            None => Err(Error::Numeric("no hyperparameter candidate could be factorised".into())),
        }
    }
}

fn standardization(targets: &[f64]) -> (f64, f64) {
    let n = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / n;
    if targets.len() < 2 {
        return (mean, 1.0);
    }
    let var = targets.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd > 1e-12 * (1.0 + mean.abs()) {
        (mean, sd)
    } else {
        (mean, 1.0)
    }
}

/// Factorises `gram + noise I`, escalating diagonal jitter from 1e-10 by
/// factors of ten up to 1e-4 on failure.
pub fn cholesky_with_jitter(gram: &[f64], n: usize, noise: f64) -> Result<(Vec<f64>, f64)> {
    let mut jitter = 0.0;
    loop {
        let mut a = gram.to_vec();
        for i in 0..n {
            a[i * n + i] += noise + jitter;
        }
        if let Some(l) = cholesky(&a, n) {
            return Ok((l, jitter));
        }
        jitter = if jitter == 0.0 { INITIAL_JITTER } else { jitter * 10.0 };
        if jitter > MAX_JITTER * (1.0 + 1e-9) {
            let max_diag = (0..n).map(|i| gram[i * n + i]).fold(0.0, f64::max);
            let min_diag = (0..n).map(|i| gram[i * n + i]).fold(f64::INFINITY, f64::min);
            return Err(Error::Numeric(format!(
                "Cholesky failed with jitter {MAX_JITTER:e} (n = {n}, diagonal range [{min_diag:e}, {max_diag:e}], noise {noise:e})"
            )));
        }
    }
}

/// Lower-triangular `L` with `L L^T = a`, or `None` if `a` is not positive
/// definite.
pub fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(sum > 0.0) {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn forward_substitute(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

fn backward_substitute_transpose(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

pub fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    backward_substitute_transpose(l, n, &forward_substitute(l, n, b))
}
