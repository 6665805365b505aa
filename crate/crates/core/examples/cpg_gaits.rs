//! Runs the coupled-oscillator network for each named gait and reports how
//! closely the wrapped phase differences lock to the commanded biases. Pass
//! a gait name to print its joint commands over the first second as CSV.

use std::io::stdout;

use codesign::cpg::{phase_locking_error, simulate_gait, CpgParams, GaitAction, DEFAULT_DT};

fn main() -> codesign::Result<()> {
    if let Some(name) = std::env::args().nth(1) {
        let gait = GaitAction::preset(&name)?;
        let params = CpgParams::quadruped().with_gait(&gait)?;
        return simulate_gait(&params, &gait, 1.0, DEFAULT_DT, 10)?.write_csv(stdout());
    }
    for name in ["walk", "trot", "pace", "bound", "pronk"] {
        let gait = GaitAction::preset(name)?;
        let params = CpgParams::quadruped().with_gait(&gait)?;
        let errors: Vec<String> = [0.25, 0.5, 1.0, 2.0]
            .iter()
            .map(|&t| {
                let traj = simulate_gait(&params, &gait, t, DEFAULT_DT, 1000).unwrap();
                format!("{:.1e}", phase_locking_error(traj.final_state.as_ref().unwrap(), &params.phase_bias))
            })
            .collect();
        println!("{name:<6} locking error at 0.25/0.5/1/2 s: {}", errors.join("  "));
    }
    Ok(())
}
