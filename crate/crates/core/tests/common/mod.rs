//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use codesign::bounds::Bounds;
use codesign::cpg::{simulate_gait, CpgParams, GaitAction};
use codesign::gp::{GpModel, SeKernel};
use codesign::nn::{Mlp, MlpGrads, OutputActivation};
use codesign::offline::PopulationAgent;
use codesign::replay::{ReplayBuffer, Transition};
use codesign::td3::{Batch, Td3Config, TwinCritic};
use nalgebra::{DMatrix, DVector};
use ndarray::{array, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;

/// Central difference of `f` with respect to every parameter of the network
/// selected by `pick`, in `Mlp::params` order.
pub fn numeric_grad<T: Clone>(
    model: &T,
    pick: impl Fn(&mut T) -> &mut Mlp,
    f: impl Fn(&T) -> f64,
) -> Vec<f64> {
    let mut work = model.clone();
    let n = pick(&mut work).num_params();
    (0..n)
        .map(|i| {
            let orig = *pick(&mut work).params_mut().nth(i).unwrap();
            *pick(&mut work).params_mut().nth(i).unwrap() = orig + FD_STEP;
            let up = f(&work);
            *pick(&mut work).params_mut().nth(i).unwrap() = orig - FD_STEP;
            let down = f(&work);
            *pick(&mut work).params_mut().nth(i).unwrap() = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// `|a - b| / (|a| + |b|)` over whole gradient vectors.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let diff = analytic.iter().zip(numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm_a = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let norm_n = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    diff / (norm_a + norm_n).max(1e-12)
}

pub fn flat(grads: &MlpGrads) -> Vec<f64> {
    grads.iter().copied().collect()
}

pub fn random_sizes(rng: &mut ChaCha8Rng, input: usize, output: usize) -> Vec<usize> {
    let layers = rng.random_range(1..=3);
    let mut sizes = vec![input];
    for _ in 1..layers {
        sizes.push(rng.random_range(2..=16));
    }
    sizes.push(output);
    sizes
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-scale..scale))
}

pub fn random_output(rng: &mut ChaCha8Rng) -> OutputActivation {
    if rng.random_bool(0.5) {
        OutputActivation::Linear
    } else {
        OutputActivation::ScaledTanh { bound: 1.0 }
    }
}

pub fn random_batch(rng: &mut ChaCha8Rng, n: usize, sd: usize, ad: usize) -> Batch {
    Batch {
        states: random_matrix(rng, n, sd, 1.0),
        actions: random_matrix(rng, n, ad, 1.0),
        rewards: Array1::from_shape_fn(n, |_| rng.random_range(-1.0..1.0)),
        next_states: random_matrix(rng, n, sd, 1.0),
        dones: Array1::zeros(n),
    }
}

pub fn random_critic(rng: &mut ChaCha8Rng, sd: usize, ad: usize) -> TwinCritic {
    let sizes = random_sizes(rng, sd + ad, 1);
    let q1 = Mlp::new(&sizes, OutputActivation::Linear, rng).unwrap();
    let q2 = Mlp::new(&sizes, OutputActivation::Linear, rng).unwrap();
    TwinCritic::from_networks(q1.clone(), q2.clone(), q1, q2).unwrap()
}

/// GP posterior by an LU solve of the dense system, targets standardised with
/// the population standard deviation when `standardize` is set.
pub fn dense_posterior(
    kernel: &SeKernel,
    noise: f64,
    standardize: bool,
    xs: &[Vec<f64>],
    ys: &[f64],
    query: &[f64],
) -> (f64, f64) {
    let n = xs.len();
    let (mean, scale) = if standardize && n >= 2 {
        let m = ys.iter().sum::<f64>() / n as f64;
        let sd = (ys.iter().map(|y| (y - m).powi(2)).sum::<f64>() / n as f64).sqrt();
        (m, if sd > 1e-12 * (1.0 + m.abs()) { sd } else { 1.0 })
    } else if standardize {
        (ys[0], 1.0)
    } else {
        (0.0, 1.0)
    };
    let k = DMatrix::from_fn(n, n, |i, j| kernel.eval(&xs[i], &xs[j]) + if i == j { noise } else { 0.0 });
    let y = DVector::from_iterator(n, ys.iter().map(|v| (v - mean) / scale));
    let ks = DVector::from_iterator(n, xs.iter().map(|x| kernel.eval(query, x)));
    let lu = k.lu();
    let alpha = lu.solve(&y).expect("non-singular gram");
    let v = lu.solve(&ks).expect("non-singular gram");
    let mu = ks.dot(&alpha);
    let var = (kernel.eval(query, query) - ks.dot(&v)).max(0.0);
    (mean + scale * mu, scale * scale * var)
}

pub fn random_dataset(rng: &mut ChaCha8Rng) -> (SeKernel, f64, Vec<Vec<f64>>, Vec<f64>) {
    let dim = rng.random_range(1..=8);
    let n = rng.random_range(1..=50);
    let kernel = SeKernel {
        variance: rng.random_range(0.5..2.0),
        lengthscales: (0..dim).map(|_| rng.random_range(0.2..1.0)).collect(),
    };
    let noise = 10f64.powf(rng.random_range(-3.0..-1.0));
    let xs: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let ys = xs
        .iter()
        .map(|x| x.iter().map(|v| (3.0 * v).sin()).sum::<f64>() + rng.random_range(-0.1..0.1))
        .collect();
    (kernel, noise, xs, ys)
}

/// Worst absolute deviation of mean and variance over `queries` random points.
pub fn oracle_gap(seed: u64, standardize: bool, queries: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (kernel, noise, xs, ys) = random_dataset(&mut rng);
    let mut gp = GpModel::new(kernel.clone(), noise, standardize).unwrap();
    gp.fit(xs.clone(), ys.clone()).unwrap();
    assert_eq!(gp.jitter(), 0.0);
    let dim = xs[0].len();
    let (mut dm, mut dv) = (0.0f64, 0.0f64);
    for _ in 0..queries {
        let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.2..1.2)).collect();
        let (m, v) = gp.posterior(&q);
        let (om, ov) = dense_posterior(&kernel, noise, standardize, &xs, &ys, &q);
        dm = dm.max((m - om).abs());
        dv = dv.max((v - ov).abs());
    }
    (dm, dv)
}

/// Arg-max of `f` over a regular grid with `per_dim` points per dimension.
pub fn grid_argmax(bounds: &Bounds, per_dim: usize, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let dim = bounds.dim();
    let mut best = (f64::NEG_INFINITY, Vec::new());
    let total = per_dim.pow(dim as u32);
    for flat in 0..total {
        let mut rest = flat;
        let u: Vec<f64> = (0..dim)
            .map(|_| {
                let i = rest % per_dim;
                rest /= per_dim;
                i as f64 / (per_dim - 1) as f64
            })
            .collect();
        let x = bounds.denormalize(&u);
        let v = f(&x);
        if v > best.0 {
            best = (v, x);
        }
    }
    best.1
}

pub fn normalized_distance(bounds: &Bounds, a: &[f64], b: &[f64]) -> f64 {
    let (ua, ub) = (bounds.normalize(a), bounds.normalize(b));
    ua.iter().zip(&ub).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn expert(w: &Array2<f64>, s: &[f64]) -> Vec<f64> {
    (0..w.nrows())
        .map(|i| (0..s.len()).map(|j| w[[i, j]] * s[j]).sum::<f64>().tanh())
        .collect()
}

/// Largest held-out deviation after offline training with strong cloning.
pub fn cloning_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = array![[0.9, -0.6, 0.3, 0.0], [-0.2, 0.5, 0.8, -0.7]];
    let mut data = ReplayBuffer::new(10_000, seed).unwrap();
    let mut held_out = Vec::new();
    for i in 0..10_000 {
        let state: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let action = expert(&w, &state);
        if i % 10 == 0 {
            held_out.push((state, action));
            continue;
        }
        let next_state = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let reward = -state.iter().map(|s| s * s).sum::<f64>();
        data.push(Transition {
            state,
            action,
            reward,
            next_state,
            done: false,
            morphology: vec![],
        })
        .unwrap();
    }
    let mut agent = PopulationAgent::new(4, 2, Td3Config::default(), 1e3, &mut rng).unwrap();
    agent.train_offline(&mut data, 5000, &mut rng).unwrap();
    held_out
        .iter()
        .flat_map(|(s, a)| {
            let pi = agent.act(s).unwrap();
            pi.iter().zip(a).map(|(p, q)| (p - q).abs()).collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}

pub const SETPOINT: f64 = 0.4;
pub const GAIN: f64 = 20.0;

/// Amplitude from rest under critical damping: `R (1 - (1 + a t) e^{-a t})`.
pub fn amplitude_closed_form(t: f64) -> f64 {
    SETPOINT * (1.0 - (1.0 + GAIN * t) * (-GAIN * t).exp())
}

/// Largest deviation over a 1 s walk trajectory sampled every 10 ms against
/// a reference integrated with `dt / 16`.
pub fn trajectory_error(dt: f64) -> f64 {
    let gait = GaitAction::preset("walk").unwrap();
    let params = CpgParams::quadruped().with_gait(&gait).unwrap();
    let stride = (0.01 / dt).round() as usize;
    let coarse = simulate_gait(&params, &gait, 1.0, dt, stride).unwrap();
    let fine = simulate_gait(&params, &gait, 1.0, dt / 16.0, stride * 16).unwrap();
    coarse
        .samples
        .iter()
        .zip(&fine.samples)
        .flat_map(|(a, b)| a.commands.iter().zip(&b.commands).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}
