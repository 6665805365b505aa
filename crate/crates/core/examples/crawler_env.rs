//! The planar crawler under its reference trot for a few leg shapes. The
//! morphology is three front-leg segment scales followed by three rear.

use codesign::envs::{make_env, EnvOptions};

fn main() -> codesign::Result<()> {
    let mut env = make_env("planar-crawler", &EnvOptions::default())?;
    let spec = env.spec().clone();
    println!(
        "{}: state {}, action {}, morphology {} in {:?}..{:?}, {} steps of {} s",
        spec.name,
        spec.state_dim,
        spec.action_dim,
        spec.morphology_dim,
        spec.morphology_bounds.low(),
        spec.morphology_bounds.high(),
        spec.episode_length,
        spec.dt
    );
    let trot = env.reference_action().expect("crawler has a reference gait");
    let shapes = [
        ("nominal", vec![1.0; 6]),
        ("short rear", vec![1.0, 1.0, 1.0, 0.6, 0.6, 0.6]),
        ("long rear", vec![1.0, 1.0, 1.0, 1.4, 1.4, 1.4]),
        ("big feet", vec![1.0, 1.0, 1.5, 1.0, 1.0, 1.5]),
        ("tiny", vec![0.5; 6]),
    ];
    for (label, xi) in shapes {
        env.reset(&xi, 0)?;
        let (mut total, mut progress) = (0.0, 0.0);
        loop {
            let out = env.step(&trot)?;
            total += out.reward;
            progress += out.components.progress;
            if out.done {
                break;
            }
        }
        println!("{label:<10} return {total:7.2}  (progress {progress:7.2})");
    }
    Ok(())
}
