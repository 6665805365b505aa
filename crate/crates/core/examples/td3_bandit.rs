//! TD3 on a one-step continuous bandit: reward `-(s + a)^2`, so the best
//! action is `a = -s`. The actor should learn the negation.

use codesign::replay::{ReplayBuffer, Transition};
use codesign::td3::{Batch, Td3Config, Td3Learner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> codesign::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let config = Td3Config {
        hidden: vec![32, 32],
        learning_rate: 1e-3,
        batch_size: 64,
        ..Td3Config::default()
    };
    let mut learner = Td3Learner::new(1, 1, config, &mut rng)?;
    let mut buffer = ReplayBuffer::new(5000, 3)?;
    for _ in 0..2000 {
        let s: f64 = rng.random_range(-0.8..0.8);
        let a: f64 = rng.random_range(-1.0..1.0);
        buffer.push(Transition {
            state: vec![s],
            action: vec![a],
            reward: -(s + a).powi(2),
            next_state: vec![0.0],
            done: true,
            morphology: vec![],
        })?;
    }

    for step in 1..=3000 {
        let batch = Batch::from_transitions(&buffer.sample_batch(64)?)?;
        let stats = learner.update(&batch, 0.0, &mut rng)?;
        if step % 1000 == 0 {
            println!("step {step}: critic loss {:.5}", stats.critic_loss);
        }
    }
    for s in [-0.6, -0.2, 0.0, 0.4, 0.7] {
        println!("s = {s:+.1}  pi(s) = {:+.3}", learner.act(&[s])?[0]);
    }
    Ok(())
}
