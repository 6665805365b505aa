//! Two-iteration runs of each transfer variant from the same seed. The
//! first episode after the morphology change shows how much of the
//! population policy survives the transfer.

use codesign::config::{AblationMode, ExperimentConfig};
use codesign::harness::{run_ablation, RunOptions};

fn main() -> codesign::Result<()> {
    let mut config = ExperimentConfig::desk();
    config.iterations = 2;
    config.episodes_per_iteration = 12;

    println!("{:<16} {:>10} {:>10} {:>8}", "mode", "first", "last", "beta");
    for mode in [
        AblationMode::NoCopy,
        AblationMode::DirectCopy,
        AblationMode::FixedTerm,
        AblationMode::AdaptiveTerm,
        AblationMode::SingleNetwork,
    ] {
        let log = run_ablation(config.clone(), mode, &RunOptions::default())?;
        let rows: Vec<_> = log.episodes_of(1).collect();
        let (first, last) = (rows[0], rows[rows.len() - 1]);
        println!(
            "{:<16} {:>10.2} {:>10.2} {:>8.3}",
            mode.as_str(),
            first.episode_return,
            last.episode_return,
            last.beta
        );
    }
    Ok(())
}
