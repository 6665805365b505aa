//! The three run buffers: per-morphology transitions, the pooled store, and
//! initial states. Shows ring overwrite, uniform sampling and a dump/load
//! round trip.

use codesign::replay::{Buffers, ReplayBuffer, Transition};

fn transition(i: usize, morphology: f64) -> Transition {
    Transition {
        state: vec![i as f64, 0.0],
        action: vec![0.05 * i as f64],
        reward: 1.0,
        next_state: vec![i as f64 + 1.0, 0.0],
        done: i % 10 == 9,
        morphology: vec![morphology],
    }
}

fn main() -> codesign::Result<()> {
    let mut buffers = Buffers::new([8, 100, 100], 42)?;
    for (iteration, xi) in [0.8, 1.2].into_iter().enumerate() {
        buffers.ind.clear();
        for i in 0..12 {
            let t = transition(i, xi);
            if i == 0 {
                buffers.init.push([t.state.clone(), t.morphology.clone()].concat())?;
            }
            buffers.ind.push(t.clone())?;
            buffers.pop.push(t)?;
        }
        println!(
            "iteration {iteration}: ind {} of {}, pop {}, init {}",
            buffers.ind.len(),
            buffers.ind.capacity(),
            buffers.pop.len(),
            buffers.init.len()
        );
    }

    let oldest: Vec<f64> = buffers.ind.iter().map(|t| t.state[0]).collect();
    println!("ring keeps the newest 8 steps: {oldest:?}");
    let batch = buffers.pop.sample_batch(4)?;
    let xis: Vec<f64> = batch.iter().map(|t| t.morphology[0]).collect();
    println!("pooled batch mixes morphologies: {xis:?}");

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("pop.bin");
    buffers.pop.dump(&path)?;
    let back = ReplayBuffer::load(&path, 7)?;
    println!("reloaded {} transitions, identical: {}", back.len(), back.iter().eq(buffers.pop.iter()));
    Ok(())
}
