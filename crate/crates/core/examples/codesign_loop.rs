//! A short co-design run on the crawler, stepped one iteration at a time so
//! the morphology proposals and the population surrogate can be printed as
//! they arrive. Reports are written to `out/codesign_loop`.

use codesign::config::ExperimentConfig;
use codesign::harness::{Run, RunOptions};

fn main() -> codesign::Result<()> {
    env_logger::init();
    let mut config = ExperimentConfig::desk();
    config.iterations = 4;
    config.episodes_per_iteration = 10;
    config.seed = 1;

    let options = RunOptions {
        out_dir: Some("out/codesign_loop".into()),
        ..RunOptions::default()
    };
    let mut run = Run::new(config)?;
    while !run.is_finished() {
        let k = run.next_iteration();
        run.run_iteration(&options)?;
        let row = &run.log().iterations[k];
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(" ");
        println!("iteration {k}: xi [{}]", fmt(&row.morphology));
        println!("  mean training return {:.2}, greedy return {:.2}", row.mean_return, row.eval_return);
        if let Some(fit) = row.next_fitness {
            println!("  next xi [{}], surrogate {fit:.2}", fmt(&row.next_morphology));
        }
    }
    println!("D_pop holds {} transitions", run.buffers().pop.len());
    Ok(())
}
