//! Stops a run after its first iteration, resumes from the checkpoint and
//! checks the result against an uninterrupted run.

use codesign::config::ExperimentConfig;
use codesign::harness::{resume_codesign, run_codesign, RunOptions};

fn main() -> codesign::Result<()> {
    let mut config = ExperimentConfig::desk();
    config.iterations = 3;
    config.episodes_per_iteration = 4;

    let dir = tempfile::tempdir()?;
    let partial = RunOptions {
        out_dir: Some(dir.path().to_path_buf()),
        checkpoints: true,
        stop_after: Some(1),
        ..RunOptions::default()
    };
    let stopped = run_codesign(config.clone(), &partial)?;
    println!("stopped after {} iteration(s); checkpoints {:?}", stopped.iterations.len(), stopped.checkpoints);

    let checkpoint = dir.path().join("checkpoints/iter_000");
    let mut files: Vec<_> = std::fs::read_dir(&checkpoint)?.map(|e| e.map(|e| e.file_name())).collect::<Result<_, _>>()?;
    files.sort();
    println!("{} holds {files:?}", checkpoint.display());

    let resumed = resume_codesign(&checkpoint, &RunOptions::default())?;
    let straight = run_codesign(config, &RunOptions::default())?;
    println!("resumed returns   {:.3?}", resumed.eval_returns());
    println!("straight returns  {:.3?}", straight.eval_returns());
    let same = resumed.episodes == straight.episodes && resumed.iterations == straight.iterations;
    println!("identical episode and iteration records: {same}");
    Ok(())
}
