//! The co-design loop and its ablations, logging, checkpoints and resume.
//!
//! One iteration: clear `D_ind`, apply the morphology chosen last time,
//! prepare the individual learner according to the mode, run the training
//! episodes (rollout, cloning-weight update, population and individual
//! updates), evaluate greedily, then run a BO round on the population
//! surrogate to pick the next morphology.
//!
//! All randomness flows from one seeded generator held in the run state, so
//! a run is a pure function of its configuration. A checkpoint written after
//! iteration `k` holds that generator, both agents with optimiser state, the
//! buffers and the log so far; resuming from it reproduces the rest of the
//! uninterrupted run exactly.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bo::{bo_round, join, write_trace_csv, BoState, BoTraceRow, BO_TRACE_HEADER};
use crate::bounds::Bounds;
use crate::config::{AblationMode, ExperimentConfig, OfflineSchedule};
use crate::envs::{make_env, Env, EnvSpec};
use crate::error::{Error, Result};
use crate::nn::Mlp;
use crate::offline::PopulationAgent;
use crate::online::{rollout_episode, Behaviour, BetaController, ExplorationPolicy, IndividualAgent, TrainStats};
use crate::replay::{Buffers, InitStateStore, ReplayBuffer};

const STATE_FORMAT: &str = "codesign-run";
const STATE_VERSION: u32 = 1;

pub const EPISODE_HEADER: &str = "seed,mode,iteration,episode,morphology,return,beta,critic_loss,actor_loss,bc_term_mean,population_critic_loss,population_actor_loss,d_ind,d_pop,d_init";
pub const ITERATION_HEADER: &str = "seed,mode,iteration,episode,morphology,mean_return,last_return,eval_return,next_morphology,next_fitness,next_fitness_std_error";
pub const CPG_HEADER: &str = "seed,iteration,episode,step,t,commands,wrapped_phase";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub seed: u64,
    pub mode: AblationMode,
    pub iteration: usize,
    pub episode: usize,
    pub morphology: Vec<f64>,
    pub episode_return: f64,
    /// Cloning weight after this episode's controller step.
    pub beta: f64,
    pub critic_loss: Option<f64>,
    pub actor_loss: Option<f64>,
    pub bc_term_mean: Option<f64>,
    pub population_critic_loss: Option<f64>,
    pub population_actor_loss: Option<f64>,
    pub d_ind: usize,
    pub d_pop: usize,
    pub d_init: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub seed: u64,
    pub mode: AblationMode,
    pub iteration: usize,
    /// Number of training episodes run in the iteration.
    pub episode: usize,
    pub morphology: Vec<f64>,
    pub mean_return: f64,
    pub last_return: f64,
    /// Mean greedy return of the trained policy on this morphology.
    pub eval_return: f64,
    pub next_morphology: Vec<f64>,
    /// Surrogate fitness of the next morphology (absent under random sampling).
    pub next_fitness: Option<f64>,
    pub next_fitness_std_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpgRow {
    pub seed: u64,
    pub iteration: usize,
    pub episode: usize,
    pub step: usize,
    pub t: f64,
    pub commands: Vec<f64>,
    pub wrapped_phase: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Instrumentation {
    pub individual_agents_allocated: usize,
    pub population_agents_allocated: usize,
    /// `D_ind` size just before and just after each iteration's clear.
    pub d_ind_before_clear: Vec<usize>,
    pub d_ind_after_clear: Vec<usize>,
    /// `D_init` growth per episode.
    pub d_init_pushes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub seed: u64,
    pub mode: AblationMode,
    pub episodes: Vec<EpisodeRow>,
    pub iterations: Vec<IterationRow>,
    pub bo_trace: Vec<(usize, BoTraceRow)>,
    pub cpg: Vec<CpgRow>,
    /// Checkpoint directories, relative to the output directory.
    pub checkpoints: Vec<String>,
    pub instrumentation: Instrumentation,
}

impl RunLog {
    pub fn new(seed: u64, mode: AblationMode) -> Self {
        RunLog {
            seed,
            mode,
            episodes: Vec::new(),
            iterations: Vec::new(),
            bo_trace: Vec::new(),
            cpg: Vec::new(),
            checkpoints: Vec::new(),
            instrumentation: Instrumentation::default(),
        }
    }

    /// Morphology selected by the last completed iteration.
    pub fn final_morphology(&self) -> Option<&[f64]> {
        self.iterations.last().map(|r| r.next_morphology.as_slice())
    }

    /// Greedy evaluation return per iteration.
    pub fn eval_returns(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.eval_return).collect()
    }

    pub fn episodes_of(&self, iteration: usize) -> impl Iterator<Item = &EpisodeRow> {
        self.episodes.iter().filter(move |r| r.iteration == iteration)
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Reports and checkpoints go here; nothing is written if unset.
    pub out_dir: Option<PathBuf>,
    pub checkpoints: bool,
    /// Stop after this many completed iterations (counting resumed ones).
    pub stop_after: Option<usize>,
    /// Record CPG trajectories of evaluation episodes.
    pub record_cpg: bool,
}

#[derive(Serialize, Deserialize)]
struct StateFile {
    format: String,
    version: u32,
    config: ExperimentConfig,
    next_iteration: usize,
    xi_next: Vec<f64>,
    rng: ChaCha8Rng,
    warmup_remaining: usize,
    single_beta: Option<BetaController>,
    samplers: [ChaCha8Rng; 3],
    log: RunLog,
}

/// Live state of a run between iterations.
pub struct Run {
    config: ExperimentConfig,
    spec: EnvSpec,
    bounds: Bounds,
    env: Box<dyn Env>,
    rng: ChaCha8Rng,
    buffers: Buffers,
    population: PopulationAgent,
    individual: Option<IndividualAgent>,
    /// Controller for the single learner in single-network mode.
    single_beta: Option<BetaController>,
    exploration: ExplorationPolicy,
    warmup_remaining: usize,
    next_iteration: usize,
    xi_next: Vec<f64>,
    log: RunLog,
}

impl Run {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let env = make_env(&config.env, &config.env_options)?;
        let spec = env.spec().clone();
        let bounds = config.search_bounds(&spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let c = config.capacities;
        let buffers = Buffers::new([c.individual, c.population, c.initial], rng.random())?;
        let obs_dim = spec.observation_dim();
        let mut log = RunLog::new(config.seed, config.mode);
        let population = PopulationAgent::new(obs_dim, spec.action_dim, config.td3.clone(), config.alpha, &mut rng)?;
        log.instrumentation.population_agents_allocated += 1;
        let beta = BetaController::new(config.mode.beta_settings(config.beta), spec.return_target)?;
        let exploration = ExplorationPolicy::new(config.exploration_sigma, spec.action_dim)?;
        let (individual, single_beta) = if config.mode.single_network() {
            (None, Some(beta))
        } else {
            let agent = IndividualAgent::new(
                obs_dim,
                spec.action_dim,
                config.td3.clone(),
                beta,
                exploration.clone(),
                &mut rng,
            )?;
            log.instrumentation.individual_agents_allocated += 1;
            (Some(agent), None)
        };
        let xi_next = if config.mode.uses_bo() {
            config.initial_morphology(&bounds)?
        } else {
            bounds.sample(&mut rng)
        };
        Ok(Run {
            warmup_remaining: config.warmup_steps,
            config,
            spec,
            bounds,
            env,
            rng,
            buffers,
            population,
            individual,
            single_beta,
            exploration,
            next_iteration: 0,
            xi_next,
            log,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn log(&self) -> &RunLog {
        &self.log
    }

    pub fn buffers(&self) -> &Buffers {
        &self.buffers
    }

    pub fn population(&self) -> &PopulationAgent {
        &self.population
    }

    pub fn individual(&self) -> Option<&IndividualAgent> {
        self.individual.as_ref()
    }

    pub fn next_iteration(&self) -> usize {
        self.next_iteration
    }

    pub fn is_finished(&self) -> bool {
        self.next_iteration >= self.config.iterations
    }

    /// Runs the remaining iterations, checkpointing and reporting per
    /// `options`. On failure, reports for the completed part are still
    /// written before the error is returned.
    pub fn run_to_end(mut self, options: &RunOptions) -> Result<RunLog> {
        if let Some(dir) = &options.out_dir {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("config.toml"), self.config.to_toml_string()?)?;
        }
        let outcome = loop {
            if self.is_finished() || options.stop_after.is_some_and(|n| self.next_iteration >= n) {
                break Ok(());
            }
            if let Err(e) = self.run_iteration(options) {
                break Err(e);
            }
        };
        if let Some(dir) = &options.out_dir {
            emit_reports(&self.log, dir)?;
        }
        outcome.map(|()| self.log)
    }

    /// One full iteration, followed by a checkpoint if enabled.
    pub fn run_iteration(&mut self, options: &RunOptions) -> Result<()> {
        let k = self.next_iteration;
        let before = self.buffers.ind.len();
        self.buffers.ind.clear();
        let instr = &mut self.log.instrumentation;
        instr.d_ind_before_clear.push(before);
        instr.d_ind_after_clear.push(self.buffers.ind.len());

        let xi = self.xi_next.clone();
        self.prepare_agents(k)?;

        let updates = self.config.updates_per_episode(&self.spec);
        let mut returns = Vec::with_capacity(self.config.episodes_per_iteration);
        for e in 0..self.config.episodes_per_iteration {
            let r = self.run_episode(k, e, &xi, updates)?;
            returns.push(r);
        }
        if self.config.offline_schedule == OfflineSchedule::PostHoc && !self.config.mode.single_network() {
            self.train_population(updates * self.config.episodes_per_iteration)?;
        }

        let eval_return = self.evaluate(k, &xi, options.record_cpg)?;
        let (next, fitness) = self.select_next(k)?;

        self.log.iterations.push(IterationRow {
            seed: self.config.seed,
            mode: self.config.mode,
            iteration: k,
            episode: returns.len(),
            morphology: xi,
            mean_return: returns.iter().sum::<f64>() / returns.len() as f64,
            last_return: *returns.last().expect("at least one episode"),
            eval_return,
            next_morphology: next.clone(),
            next_fitness: fitness.map(|f| f.0),
            next_fitness_std_error: fitness.map(|f| f.1),
        });
        self.xi_next = next;
        self.next_iteration += 1;
        log::info!(
            "iteration {k}: mean return {:.3}, eval {:.3}",
            self.log.iterations[k].mean_return,
            eval_return
        );

        if options.checkpoints {
            if let Some(dir) = &options.out_dir {
                self.checkpoint(dir)?;
            }
        }
        Ok(())
    }

    fn prepare_agents(&mut self, k: usize) -> Result<()> {
        if let Some(beta) = &mut self.single_beta {
            beta.reset();
            return Ok(());
        }
        let agent = self.individual.as_mut().expect("individual agent in two-network modes");
        if k == 0 {
            agent.beta.reset();
        } else if self.config.mode.warm_starts() {
            agent.warm_start(&self.population)?;
        } else {
            agent.reinitialize(&mut self.rng)?;
        }
        Ok(())
    }

    fn run_episode(&mut self, k: usize, e: usize, xi: &[f64], updates: usize) -> Result<f64> {
        let seed: u64 = self.rng.random();
        let init_before = self.buffers.init.len();
        let actor: &Mlp = match &self.individual {
            Some(agent) => &agent.learner.actor,
            None => &self.population.learner.actor,
        };
        let result = rollout_episode(
            self.env.as_mut(),
            xi,
            seed,
            Behaviour::Explore {
                actor,
                noise: &self.exploration,
                warmup: &mut self.warmup_remaining,
            },
            Some(&mut self.buffers),
            &mut self.rng,
        )?;
        self.log
            .instrumentation
            .d_init_pushes
            .push(self.buffers.init.len() - init_before);

        let mut pop_stats = TrainStats::default();
        let ind_stats;
        let beta;
        if let Some(ctrl) = &mut self.single_beta {
            ctrl.observe_return(result.episode_return);
            beta = ctrl.beta();
            ind_stats = self.train_population_with(updates, beta)?;
        } else {
            let agent = self.individual.as_mut().expect("individual agent");
            agent.beta.observe_return(result.episode_return);
            beta = agent.beta.beta();
            if self.config.offline_schedule == OfflineSchedule::Interleaved {
                pop_stats = self.train_population(updates)?;
            }
            let agent = self.individual.as_mut().expect("individual agent");
            ind_stats = agent.train_epoch(&mut self.buffers.ind, updates, &mut self.rng)?;
        }

        self.log.episodes.push(EpisodeRow {
            seed: self.config.seed,
            mode: self.config.mode,
            iteration: k,
            episode: e,
            morphology: xi.to_vec(),
            episode_return: result.episode_return,
            beta,
            critic_loss: ind_stats.critic_loss,
            actor_loss: ind_stats.actor_loss,
            bc_term_mean: ind_stats.bc_term_mean,
            population_critic_loss: pop_stats.critic_loss,
            population_actor_loss: pop_stats.actor_loss,
            d_ind: self.buffers.ind.len(),
            d_pop: self.buffers.pop.len(),
            d_init: self.buffers.init.len(),
        });
        Ok(result.episode_return)
    }

    fn train_population(&mut self, updates: usize) -> Result<TrainStats> {
        let alpha = self.population.alpha;
        self.train_population_with(updates, alpha)
    }

    fn train_population_with(&mut self, updates: usize, weight: f64) -> Result<TrainStats> {
        if updates == 0 {
            return Ok(TrainStats::default());
        }
        if self.buffers.pop.len() < self.population.learner.config.batch_size {
            log::warn!(
                "population training skipped: {} transitions, batch size {}",
                self.buffers.pop.len(),
                self.population.learner.config.batch_size
            );
            return Ok(TrainStats::default());
        }
        self.population
            .train_with_weight(&mut self.buffers.pop, updates, weight, &mut self.rng)
    }

    /// The policy that collects data in this mode.
    pub fn acting_policy(&self) -> &Mlp {
        match &self.individual {
            Some(agent) => &agent.learner.actor,
            None => &self.population.learner.actor,
        }
    }

    fn evaluate(&mut self, k: usize, xi: &[f64], record_cpg: bool) -> Result<f64> {
        let n = self.config.eval_episodes.max(1);
        let mut total = 0.0;
        for j in 0..n {
            let seed = eval_seed(self.config.seed, k, j);
            let ret = if record_cpg && self.env.cpg_state().is_some() {
                let (ret, rows) = self.traced_greedy_episode(k, j, xi, seed)?;
                self.log.cpg.extend(rows);
                ret
            } else {
                let actor = self.acting_policy().clone();
                rollout_episode(self.env.as_mut(), xi, seed, Behaviour::Greedy(&actor), None, &mut self.rng)?
                    .episode_return
            };
            total += ret;
        }
        Ok(total / n as f64)
    }

    fn traced_greedy_episode(&mut self, k: usize, j: usize, xi: &[f64], seed: u64) -> Result<(f64, Vec<CpgRow>)> {
        let actor = self.acting_policy().clone();
        let episode = self.config.episodes_per_iteration + j;
        let run_seed = self.config.seed;
        let mut rows = Vec::new();
        let mut push = |env: &dyn Env, step: usize| {
            if let Some(state) = env.cpg_state() {
                rows.push(CpgRow {
                    seed: run_seed,
                    iteration: k,
                    episode,
                    step,
                    t: step as f64 * env.spec().dt,
                    commands: crate::cpg::cpg_output(state),
                    wrapped_phase: state.wrapped_phase(),
                });
            }
        };
        let mut obs = self.env.reset(xi, seed)?;
        push(self.env.as_ref(), 0);
        let mut total = 0.0;
        for step in 1..=self.spec.episode_length {
            let out = self.env.step(&actor.forward(&obs)?)?;
            total += out.reward;
            push(self.env.as_ref(), step);
            obs = out.observation;
            if out.done {
                break;
            }
        }
        Ok((total, rows))
    }

    /// Next morphology and its surrogate fitness with standard error.
    fn select_next(&mut self, k: usize) -> Result<(Vec<f64>, Option<(f64, f64)>)> {
        if !self.config.mode.uses_bo() {
            return Ok((self.bounds.sample(&mut self.rng), None));
        }
        let starts: Vec<Vec<f64>> = self
            .buffers
            .init
            .sample(self.config.surrogate_samples)?
            .into_iter()
            .cloned()
            .collect();
        let refs: Vec<&Vec<f64>> = starts.iter().collect();
        let population = &self.population;
        let mut state = BoState::new(self.bounds.clone(), self.config.bo.kappa);
        let outcome = bo_round(
            &mut state,
            &self.config.bo,
            |x| Ok(population.surrogate_estimate(&refs, x)?.mean),
            &mut self.rng,
        )?;
        let best = population.surrogate_estimate(&refs, &outcome.best.morphology)?;
        self.log
            .bo_trace
            .extend(outcome.trace.into_iter().map(|row| (k, row)));
        Ok((outcome.best.morphology, Some((best.mean, best.std_error))))
    }

    fn checkpoint(&mut self, out_dir: &Path) -> Result<()> {
        let k = self.next_iteration - 1;
        let name = format!("iter_{k:03}");
        let dir = out_dir.join("checkpoints").join(&name);
        fs::create_dir_all(&dir)?;
        self.log.checkpoints.push(format!("checkpoints/{name}"));
        self.population
            .save(&dir.join(PopulationAgent::checkpoint_file_name(k)), k)?;
        if let Some(agent) = &self.individual {
            fs::write(dir.join("individual.json"), serde_json::to_vec(agent)?)?;
        }
        self.buffers.ind.dump(&dir.join("d_ind.bin"))?;
        self.buffers.pop.dump(&dir.join("d_pop.bin"))?;
        self.buffers.init.dump(&dir.join("d_init.bin"))?;
        let state = StateFile {
            format: STATE_FORMAT.into(),
            version: STATE_VERSION,
            config: self.config.clone(),
            next_iteration: self.next_iteration,
            xi_next: self.xi_next.clone(),
            rng: self.rng.clone(),
            warmup_remaining: self.warmup_remaining,
            single_beta: self.single_beta.clone(),
            samplers: [
                self.buffers.ind.sampler().clone(),
                self.buffers.pop.sampler().clone(),
                self.buffers.init.sampler().clone(),
            ],
            log: self.log.clone(),
        };
        fs::write(dir.join("state.json"), serde_json::to_vec(&state)?)?;
        Ok(())
    }

    /// Restores a run from a checkpoint directory written after some iteration.
    pub fn resume(checkpoint_dir: &Path) -> Result<Self> {
        let state: StateFile = serde_json::from_slice(&fs::read(checkpoint_dir.join("state.json"))?)?;
        if state.format != STATE_FORMAT || state.version != STATE_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported run state {} v{}",
                state.format, state.version
            )));
        }
        let config = state.config;
        config.validate()?;
        let env = make_env(&config.env, &config.env_options)?;
        let spec = env.spec().clone();
        let bounds = config.search_bounds(&spec)?;
        let k = state
            .next_iteration
            .checked_sub(1)
            .ok_or_else(|| Error::State("checkpoint precedes the first iteration".into()))?;
        let (population, saved_at) =
            PopulationAgent::load(&checkpoint_dir.join(PopulationAgent::checkpoint_file_name(k)))?;
        if saved_at != k {
            return Err(Error::State(format!("population checkpoint is from iteration {saved_at}, expected {k}")));
        }
        let individual = if config.mode.single_network() {
            None
        } else {
            Some(serde_json::from_slice(&fs::read(checkpoint_dir.join("individual.json"))?)?)
        };
        let [s_ind, s_pop, s_init] = state.samplers;
        let mut ind = ReplayBuffer::load(&checkpoint_dir.join("d_ind.bin"), 0)?;
        let mut pop = ReplayBuffer::load(&checkpoint_dir.join("d_pop.bin"), 0)?;
        let mut init = InitStateStore::load(&checkpoint_dir.join("d_init.bin"), 0)?;
        ind.set_sampler(s_ind);
        pop.set_sampler(s_pop);
        init.set_sampler(s_init);
        Ok(Run {
            exploration: ExplorationPolicy::new(config.exploration_sigma, spec.action_dim)?,
            config,
            spec,
            bounds,
            env,
            rng: state.rng,
            buffers: Buffers { ind, pop, init },
            population,
            individual,
            single_beta: state.single_beta,
            warmup_remaining: state.warmup_remaining,
            next_iteration: state.next_iteration,
            xi_next: state.xi_next,
            log: state.log,
        })
    }
}

fn eval_seed(seed: u64, iteration: usize, j: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xe7a1_5eed);
    rng.set_stream(((iteration as u64) << 16) | j as u64);
    rng.random()
}

/// Full co-design loop in the configured mode.
pub fn run_codesign(config: ExperimentConfig, options: &RunOptions) -> Result<RunLog> {
    Run::new(config)?.run_to_end(options)
}

/// Same loop with `mode` forced.
pub fn run_ablation(mut config: ExperimentConfig, mode: AblationMode, options: &RunOptions) -> Result<RunLog> {
    config.mode = mode;
    run_codesign(config, options)
}

/// Continues a checkpointed run to completion.
pub fn resume_codesign(checkpoint_dir: &Path, options: &RunOptions) -> Result<RunLog> {
    Run::resume(checkpoint_dir)?.run_to_end(options)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

/// Writes `episodes.csv`, `iterations.csv`, `bo_trace.csv`,
/// `cpg_trajectory.csv` and `run_log.json` into `out_dir`.
pub fn emit_reports(log: &RunLog, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let paths: Vec<PathBuf> = ["episodes.csv", "iterations.csv", "bo_trace.csv", "cpg_trajectory.csv", "run_log.json"]
        .iter()
        .map(|n| out_dir.join(n))
        .collect();

    let mut w = create(&paths[0])?;
    writeln!(w, "{EPISODE_HEADER}")?;
    for r in &log.episodes {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.seed,
            r.mode,
            r.iteration,
            r.episode,
            join(&r.morphology),
            r.episode_return,
            r.beta,
            opt(r.critic_loss),
            opt(r.actor_loss),
            opt(r.bc_term_mean),
            opt(r.population_critic_loss),
            opt(r.population_actor_loss),
            r.d_ind,
            r.d_pop,
            r.d_init
        )?;
    }
    w.flush()?;

    let mut w = create(&paths[1])?;
    writeln!(w, "{ITERATION_HEADER}")?;
    for r in &log.iterations {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.seed,
            r.mode,
            r.iteration,
            r.episode,
            join(&r.morphology),
            r.mean_return,
            r.last_return,
            r.eval_return,
            join(&r.next_morphology),
            opt(r.next_fitness),
            opt(r.next_fitness_std_error)
        )?;
    }
    w.flush()?;

    let mut w = create(&paths[2])?;
    writeln!(w, "{BO_TRACE_HEADER}")?;
    let mut start = 0;
    while start < log.bo_trace.len() {
        let it = log.bo_trace[start].0;
        let end = start + log.bo_trace[start..].iter().take_while(|(i, _)| *i == it).count();
        let rows: Vec<BoTraceRow> = log.bo_trace[start..end].iter().map(|(_, r)| r.clone()).collect();
        write_trace_csv(&mut w, log.seed, it, &rows)?;
        start = end;
    }
    w.flush()?;

    let mut w = create(&paths[3])?;
    writeln!(w, "{CPG_HEADER}")?;
    for r in &log.cpg {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.seed,
            r.iteration,
            r.episode,
            r.step,
            r.t,
            join(&r.commands),
            join(&r.wrapped_phase)
        )?;
    }
    w.flush()?;

    fs::write(&paths[4], serde_json::to_vec_pretty(log)?)?;
    Ok(paths)
}

/// Greedy return of a saved population policy on `morphology`, averaged over
/// `episodes` seeded resets.
pub fn evaluate_population(
    agent: &PopulationAgent,
    config: &ExperimentConfig,
    morphology: &[f64],
    episodes: usize,
) -> Result<f64> {
    let mut env = make_env(&config.env, &config.env_options)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut total = 0.0;
    for j in 0..episodes.max(1) {
        total += rollout_episode(
            env.as_mut(),
            morphology,
            eval_seed(config.seed, usize::MAX >> 16, j),
            Behaviour::Greedy(&agent.learner.actor),
            None,
            &mut rng,
        )?
        .episode_return;
    }
    Ok(total / episodes.max(1) as f64)
}
