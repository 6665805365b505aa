//! GP-UCB on the two-bump benchmark: random probes, then acquisition steps.
//! Prints the trace and the distance of the best point from the true peak.

use codesign::bo::{bo_round, BenchFunction, BoConfig, BoState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> codesign::Result<()> {
    let f = BenchFunction::Bumps;
    let config = BoConfig::default();
    let mut state = BoState::new(f.bounds(), config.kappa);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let out = bo_round(&mut state, &config, |x| Ok(f.eval(x)), &mut rng)?;

    for row in out.trace.iter().skip(config.random_probes - 3).step_by(3) {
        println!(
            "{:>3} {:<5} x = [{:.3}, {:.3}]  f = {:.4}",
            row.step,
            row.kind.as_str(),
            row.morphology[0],
            row.morphology[1],
            row.fitness
        );
    }
    let best = &out.best.morphology;
    let opt = f.optimum();
    let dist = ((best[0] - opt[0]).powi(2) + (best[1] - opt[1]).powi(2)).sqrt();
    println!("best [{:.3}, {:.3}] value {:.4}, {dist:.3} from the peak", best[0], best[1], out.best.fitness);
    Ok(())
}
