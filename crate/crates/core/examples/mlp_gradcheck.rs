//! Fits a small tanh network to `sin(3x)` with hand-written backprop and
//! Adam, after checking one gradient against a central difference.

use codesign::nn::{AdamConfig, AdamState, Mlp, OutputActivation};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> codesign::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut net = Mlp::new(&[1, 32, 32, 1], OutputActivation::Linear, &mut rng)?;

    let xs = Array2::from_shape_fn((64, 1), |(i, _)| -1.0 + 2.0 * i as f64 / 63.0);
    let ys = xs.mapv(|x| (3.0 * x).sin());
    let mse = |net: &Mlp| -> f64 {
        let out = net.forward_batch(xs.view()).unwrap();
        (&out - &ys).mapv(|d| d * d).mean().unwrap()
    };

    let cache = net.forward_cached(xs.view())?;
    let g = (cache.output() - &ys) * (2.0 / xs.nrows() as f64);
    let (grads, _) = net.backward_batch(&cache, g.view())?;
    let analytic = *grads.iter().next().unwrap();
    let h = 1e-5;
    let mut probe = net.clone();
    let w = probe.params_mut().next().unwrap();
    *w += h;
    let up = mse(&probe);
    *probe.params_mut().next().unwrap() -= 2.0 * h;
    let numeric = (up - mse(&probe)) / (2.0 * h);
    println!("first weight: analytic {analytic:.8}, central difference {numeric:.8}");

    let mut adam = AdamState::new(&net, AdamConfig { learning_rate: 3e-3, ..AdamConfig::default() })?;
    for epoch in 0..=2000 {
        let cache = net.forward_cached(xs.view())?;
        let g = (cache.output() - &ys) * (2.0 / xs.nrows() as f64);
        let (grads, _) = net.backward_batch(&cache, g.view())?;
        adam.step(&mut net, &grads)?;
        if epoch % 500 == 0 {
            println!("epoch {epoch:>4}  mse {:.6}", mse(&net));
        }
    }
    Ok(())
}
