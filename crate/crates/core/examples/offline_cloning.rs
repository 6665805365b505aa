//! Offline TD3 with a strong behaviour-cloning weight recovers the policy
//! that generated a fixed dataset.

use codesign::offline::PopulationAgent;
use codesign::replay::{ReplayBuffer, Transition};
use codesign::td3::Td3Config;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn behaviour(s: &[f64]) -> Vec<f64> {
    vec![(0.9 * s[0] - 0.6 * s[1]).tanh(), (0.5 * s[1] + 0.8 * s[2]).tanh()]
}

fn main() -> codesign::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut data = ReplayBuffer::new(5000, 11)?;
    for _ in 0..5000 {
        let state: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let next_state = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        data.push(Transition {
            action: behaviour(&state),
            reward: -state[0].abs(),
            state,
            next_state,
            done: false,
            morphology: vec![],
        })?;
    }

    for alpha in [0.4, 1e3] {
        let mut agent = PopulationAgent::new(3, 2, Td3Config::default(), alpha, &mut rng)?;
        agent.train_offline(&mut data, 3000, &mut rng)?;
        let mut worst: f64 = 0.0;
        for _ in 0..500 {
            let s: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let gap = agent.act(&s)?.iter().zip(behaviour(&s)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            worst = worst.max(gap);
        }
        println!("alpha {alpha:>6}: worst deviation from the behaviour policy {worst:.3}");
    }
    Ok(())
}
