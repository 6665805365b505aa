use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use codesign::bo::{bo_round, save_trace, BenchFunction, BoConfig, BoState};
use codesign::config::{AblationMode, ExperimentConfig, Preset};
use codesign::cpg::{phase_locking_error, simulate_gait, CpgParams, GaitAction, DEFAULT_DT};
use codesign::harness::{evaluate_population, resume_codesign, run_codesign, RunLog, RunOptions};
use codesign::offline::PopulationAgent;
use codesign::{Error, Result};

#[derive(Parser)]
#[command(name = "codesign", version, about = "Morphology and controller co-design")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML file overriding preset values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "codesign-out")]
    out: PathBuf,
    /// `paper` for full-scale hyperparameters, `desk` for a single-CPU budget.
    #[arg(long, global = true, default_value = "desk")]
    preset: String,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full co-design loop.
    Codesign {
        #[arg(long)]
        iterations: Option<usize>,
        /// Write a resumable checkpoint after every iteration.
        #[arg(long)]
        checkpoints: bool,
        /// Continue from a checkpoint directory.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Run the loop in one ablation mode.
    Ablate {
        #[arg(long)]
        mode: String,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Integrate the CPG under a gait preset or four comma-separated phases.
    CpgSim {
        #[arg(long, allow_hyphen_values = true)]
        gait: String,
        #[arg(long, default_value_t = 2.0)]
        duration: f64,
        #[arg(long, default_value_t = DEFAULT_DT)]
        dt: f64,
        #[arg(long, default_value_t = 10)]
        record_every: usize,
    },
    /// GP-UCB on a benchmark function with a known optimum.
    BoBench {
        #[arg(long = "fn", default_value = "quadratic")]
        function: String,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        probes: Option<usize>,
    },
    /// Greedy return of a saved population policy.
    Eval {
        /// A population checkpoint file or a checkpoint directory.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Comma-separated morphology; defaults to the checkpoint's next morphology or the box centre.
        #[arg(long, allow_hyphen_values = true)]
        morphology: Option<String>,
        #[arg(long, default_value_t = 5)]
        episodes: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let preset: Preset = common.preset.parse()?;
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::from_toml_file(preset, path)?,
        None => ExperimentConfig::preset(preset),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Argument(format!("'{v}' is not a number")))
        })
        .collect()
}

fn summarize(log: &RunLog, out: &Path) {
    for r in &log.iterations {
        println!(
            "iteration {:>3}  mean return {:>10.3}  eval {:>10.3}",
            r.iteration, r.mean_return, r.eval_return
        );
    }
    if let Some(xi) = log.final_morphology() {
        println!("selected morphology: {xi:?}");
    }
    println!("reports written to {}", out.display());
}

fn run(cli: Cli) -> Result<()> {
    let common = &cli.common;
    match cli.command {
        Command::Codesign {
            iterations,
            checkpoints,
            resume,
        } => {
            let options = RunOptions {
                out_dir: Some(common.out.clone()),
                checkpoints: checkpoints || resume.is_some(),
                record_cpg: true,
                ..RunOptions::default()
            };
            let log = match resume {
                Some(dir) => resume_codesign(&dir, &options)?,
                None => {
                    let mut config = load_config(common)?;
                    if let Some(n) = iterations {
                        config.iterations = n;
                    }
                    run_codesign(config, &options)?
                }
            };
            summarize(&log, &common.out);
        }
        Command::Ablate { mode, iterations } => {
            let mut config = load_config(common)?;
            config.mode = mode.parse::<AblationMode>()?;
            if let Some(n) = iterations {
                config.iterations = n;
            }
            let options = RunOptions {
                out_dir: Some(common.out.clone()),
                record_cpg: true,
                ..RunOptions::default()
            };
            let log = run_codesign(config, &options)?;
            summarize(&log, &common.out);
        }
        Command::CpgSim {
            gait,
            duration,
            dt,
            record_every,
        } => {
            let action = if gait.contains(',') {
                GaitAction::new(parse_vector(&gait)?)?
            } else {
                GaitAction::preset(&gait)?
            };
            let params = CpgParams::quadruped().with_gait(&action)?;
            let traj = simulate_gait(&params, &action, duration, dt, record_every)?;
            std::fs::create_dir_all(&common.out)?;
            let path = common.out.join("cpg_trajectory.csv");
            traj.write_csv(std::io::BufWriter::new(std::fs::File::create(&path)?))?;
            let state = traj.final_state.as_ref().expect("simulation records a final state");
            println!("phase-locking error after {duration} s: {:.3e} rad", phase_locking_error(state, &params.phase_bias));
            println!("amplitudes: {:?}", state.amp);
            println!("trajectory written to {}", path.display());
        }
        Command::BoBench { function, steps, probes } => {
            let f = BenchFunction::parse(&function)?;
            let mut bo = BoConfig::default();
            if let Some(s) = steps {
                bo.steps = s;
            }
            if let Some(p) = probes {
                bo.random_probes = p;
            }
            let seed = common.seed.unwrap_or(0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut state = BoState::new(f.bounds(), bo.kappa);
            let outcome = bo_round(&mut state, &bo, |x| Ok(f.eval(x)), &mut rng)?;
            let bounds = f.bounds();
            let u = bounds.normalize(&outcome.best.morphology);
            let u_opt = bounds.normalize(&f.optimum());
            let dist = u.iter().zip(&u_opt).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            std::fs::create_dir_all(&common.out)?;
            let path = common.out.join("bo_trace.csv");
            save_trace(&path, seed, 0, &outcome.trace)?;
            println!("best {:?} fitness {:.6}", outcome.best.morphology, outcome.best.fitness);
            println!("optimum {:?} fitness {:.6}", f.optimum(), f.eval(&f.optimum()));
            println!("distance to optimum (normalised): {dist:.4}");
            println!("trace written to {}", path.display());
        }
        Command::Eval {
            checkpoint,
            morphology,
            episodes,
        } => {
            let (file, state_dir) = if checkpoint.is_dir() {
                let file = std::fs::read_dir(&checkpoint)?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .find(|p| p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("population_")))
                    .ok_or_else(|| Error::Argument(format!("no population checkpoint in {}", checkpoint.display())))?;
                (file, Some(checkpoint.clone()))
            } else {
                (checkpoint.clone(), None)
            };
            let (agent, iteration) = PopulationAgent::load(&file)?;
            let config = match state_dir.as_ref().map(|d| d.join("state.json")).filter(|p| p.exists()) {
                Some(state) => run_config_from_state(&state)?,
                None => load_config(common)?,
            };
            let spec = config.env_spec()?;
            let bounds = config.search_bounds(&spec)?;
            let xi = match morphology {
                Some(text) => parse_vector(&text)?,
                None => match state_dir.as_ref().map(|d| d.join("state.json")).filter(|p| p.exists()) {
                    Some(state) => next_morphology_from_state(&state)?,
                    None => bounds.midpoint(),
                },
            };
            let ret = evaluate_population(&agent, &config, &xi, episodes)?;
            println!("population policy from iteration {iteration} on {xi:?}: mean greedy return {ret:.4}");
        }
    }
    Ok(())
}

fn read_state(path: &Path) -> Result<serde_json::Value> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

fn run_config_from_state(path: &Path) -> Result<ExperimentConfig> {
    let state = read_state(path)?;
    Ok(serde_json::from_value(state["config"].clone())?)
}

fn next_morphology_from_state(path: &Path) -> Result<Vec<f64>> {
    let state = read_state(path)?;
    Ok(serde_json::from_value(state["xi_next"].clone())?)
}
