//! The individual learner: online TD3 whose behaviour-cloning weight is
//! steered by a PD controller on episodic return, plus episode collection.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::envs::Env;
use crate::error::{Error, Result};
use crate::nn::Mlp;
use crate::offline::PopulationAgent;
use crate::replay::{Buffers, ReplayBuffer, Transition, ACTION_BOUND};
use crate::td3::{Batch, Td3Config, Td3Learner};

/// `kp (r_current - r_target) + kd max(0, r_last - r_current)`.
pub fn beta_delta(kp: f64, kd: f64, r_target: f64, r_last: f64, r_current: f64) -> f64 {
    kp * (r_current - r_target) + kd * (r_last - r_current).max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaMode {
    Adaptive,
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaSettings {
    pub initial: f64,
    pub kp: f64,
    pub kd: f64,
    pub min: f64,
    pub max: f64,
    pub mode: BetaMode,
}

impl Default for BetaSettings {
    fn default() -> Self {
        BetaSettings {
            initial: 0.4,
            kp: 3e-5,
            kd: 8e-5,
            min: 0.0,
            max: 1.0,
            mode: BetaMode::Adaptive,
        }
    }
}

impl BetaSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.min <= self.max) || !(self.initial >= self.min && self.initial <= self.max) {
            return Err(Error::Config(format!(
                "beta {} must lie in [{}, {}]",
                self.initial, self.min, self.max
            )));
        }
        if self.min < 0.0 || !self.kp.is_finite() || !self.kd.is_finite() {
            return Err(Error::Config("invalid beta controller gains or range".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaController {
    pub settings: BetaSettings,
    pub r_target: f64,
    beta: f64,
    r_last: Option<f64>,
    r_current: Option<f64>,
}

impl BetaController {
    pub fn new(settings: BetaSettings, r_target: f64) -> Result<Self> {
        settings.validate()?;
        Ok(BetaController {
            beta: settings.initial,
            settings,
            r_target,
            r_last: None,
            r_current: None,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn r_last(&self) -> Option<f64> {
        self.r_last
    }

    pub fn r_current(&self) -> Option<f64> {
        self.r_current
    }

    /// Shifts the return history and applies one controller step. The first
    /// episode has no predecessor, so its derivative term is zero. Returns
    /// the unclamped increment (zero in fixed mode).
    pub fn observe_return(&mut self, episode_return: f64) -> f64 {
        self.r_last = self.r_current.or(Some(episode_return));
        self.r_current = Some(episode_return);
        self.update()
    }

    /// Applies the controller to the stored returns.
    pub fn update(&mut self) -> f64 {
        let (Some(last), Some(current)) = (self.r_last, self.r_current) else {
            return 0.0;
        };
        if self.settings.mode == BetaMode::Fixed {
            return 0.0;
        }
        let s = &self.settings;
        let delta = beta_delta(s.kp, s.kd, self.r_target, last, current);
        self.beta = (self.beta + delta).clamp(s.min, s.max);
        delta
    }

    /// Back to the configured initial weight with no return history.
    pub fn reset(&mut self) {
        self.beta = self.settings.initial;
        self.r_last = None;
        self.r_current = None;
    }
}

/// Gaussian action noise clipped to the action box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplorationPolicy {
    pub action_noise_sigma: f64,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
}

impl ExplorationPolicy {
    pub fn new(sigma: f64, action_dim: usize) -> Result<Self> {
        let policy = ExplorationPolicy {
            action_noise_sigma: sigma,
            action_low: vec![-ACTION_BOUND; action_dim],
            action_high: vec![ACTION_BOUND; action_dim],
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.action_noise_sigma > 0.0) {
            return Err(Error::Config("exploration sigma must be positive".into()));
        }
        crate::error::ensure_len("action bounds", self.action_low.len(), self.action_high.len())?;
        if self.action_low.iter().zip(&self.action_high).any(|(l, h)| !(l < h)) {
            return Err(Error::Config("exploration bounds need low < high".into()));
        }
        Ok(())
    }

    pub fn perturb<R: Rng + ?Sized>(&self, action: &[f64], rng: &mut R) -> Vec<f64> {
        let normal = Normal::new(0.0, self.action_noise_sigma).expect("validated sigma");
        action
            .iter()
            .zip(self.action_low.iter().zip(&self.action_high))
            .map(|(a, (l, h))| (a + normal.sample(rng)).clamp(*l, *h))
            .collect()
    }

    pub fn random_action<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.action_low
            .iter()
            .zip(&self.action_high)
            .map(|(l, h)| rng.random_range(*l..=*h))
            .collect()
    }
}

/// How actions are chosen during a rollout.
pub enum Behaviour<'a> {
    /// The deterministic policy output.
    Greedy(&'a Mlp),
    /// Policy output plus exploration noise; the first `warmup` steps (shared
    /// counter, decremented as used) draw uniformly instead.
    Explore {
        actor: &'a Mlp,
        noise: &'a ExplorationPolicy,
        warmup: &'a mut usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub episode_return: f64,
    pub steps: usize,
    /// Internal part of the first observation.
    pub initial_state: Vec<f64>,
    pub actions: Vec<Vec<f64>>,
}

/// Runs one episode from `env.reset(morphology, seed)`. Each completed step
/// is stored in `D_ind` and `D_pop`, and the initial internal state in
/// `D_init`, when `buffers` is given. A failing step aborts the episode
/// without writing anything for that step.
pub fn rollout_episode<R: Rng + ?Sized>(
    env: &mut dyn Env,
    morphology: &[f64],
    seed: u64,
    mut behaviour: Behaviour<'_>,
    mut buffers: Option<&mut Buffers>,
    rng: &mut R,
) -> Result<EpisodeResult> {
    let spec = env.spec().clone();
    let mut obs = env.reset(morphology, seed)?;
    let initial_state = obs[..spec.state_dim].to_vec();
    if let Some(b) = buffers.as_deref_mut() {
        b.init.push(initial_state.clone())?;
    }
    let mut total = 0.0;
    let mut actions = Vec::with_capacity(spec.episode_length);
    for _ in 0..spec.episode_length {
        let action = match &mut behaviour {
            Behaviour::Greedy(actor) => actor.forward(&obs)?,
            Behaviour::Explore {
                actor,
                noise,
                warmup,
            } => {
                if **warmup > 0 {
                    **warmup -= 1;
                    noise.random_action(rng)
                } else {
                    noise.perturb(&actor.forward(&obs)?, rng)
                }
            }
        };
        let out = env.step(&action)?;
        total += out.reward;
        if let Some(b) = buffers.as_deref_mut() {
            let t = Transition {
                state: obs[..spec.state_dim].to_vec(),
                action: action.clone(),
                reward: out.reward,
                next_state: out.observation[..spec.state_dim].to_vec(),
                done: out.done,
                morphology: morphology.to_vec(),
            };
            b.ind.push(t.clone())?;
            b.pop.push(t)?;
        }
        actions.push(action);
        obs = out.observation;
        if out.done {
            break;
        }
    }
    Ok(EpisodeResult {
        episode_return: total,
        steps: actions.len(),
        initial_state,
        actions,
    })
}

/// Mean diagnostics over a run of updates; `None` fields had no samples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub updates: usize,
    pub critic_loss: Option<f64>,
    pub actor_loss: Option<f64>,
    pub q_term_mean: Option<f64>,
    pub bc_term_mean: Option<f64>,
}

/// `n_updates` sampled updates of `learner` on `buffer` with cloning weight
/// `weight`. The caller checks that the buffer holds enough data.
pub(crate) fn run_updates<R: Rng + ?Sized>(
    learner: &mut Td3Learner,
    buffer: &mut ReplayBuffer,
    n_updates: usize,
    weight: f64,
    rng: &mut R,
) -> Result<TrainStats> {
    let mut sums = [0.0; 4];
    let mut actor_steps = 0usize;
    for _ in 0..n_updates {
        let batch = Batch::from_transitions(&buffer.sample_batch(learner.config.batch_size)?)?;
        let stats = learner.update(&batch, weight, rng)?;
        sums[0] += stats.critic_loss;
        if let (Some(a), Some(q), Some(bc)) = (stats.actor_loss, stats.q_term_mean, stats.bc_term_mean) {
            sums[1] += a;
            sums[2] += q;
            sums[3] += bc;
            actor_steps += 1;
        }
    }
    let mean = |s: f64, n: usize| (n > 0).then(|| s / n as f64);
    Ok(TrainStats {
        updates: n_updates,
        critic_loss: mean(sums[0], n_updates),
        actor_loss: mean(sums[1], actor_steps),
        q_term_mean: mean(sums[2], actor_steps),
        bc_term_mean: mean(sums[3], actor_steps),
    })
}

/// The online learner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndividualAgent {
    pub learner: Td3Learner,
    pub beta: BetaController,
    pub exploration: ExplorationPolicy,
}

impl IndividualAgent {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        config: Td3Config,
        beta: BetaController,
        exploration: ExplorationPolicy,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(IndividualAgent {
            learner: Td3Learner::new(state_dim, action_dim, config, rng)?,
            beta,
            exploration,
        })
    }

    /// Fresh random parameters and optimiser state, keeping the configuration.
    pub fn reinitialize<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        self.learner = Td3Learner::new(
            self.learner.state_dim(),
            self.learner.action_dim(),
            self.learner.config.clone(),
            rng,
        )?;
        self.beta.reset();
        Ok(())
    }

    /// Trains on `D_ind` with the current cloning weight. With fewer stored
    /// transitions than one batch the call logs a warning and does nothing.
    pub fn train_epoch<R: Rng + ?Sized>(
        &mut self,
        d_ind: &mut ReplayBuffer,
        n_updates: usize,
        rng: &mut R,
    ) -> Result<TrainStats> {
        if n_updates == 0 {
            return Ok(TrainStats::default());
        }
        if d_ind.len() < self.learner.config.batch_size {
            log::warn!(
                "individual training skipped: {} transitions, batch size {}",
                d_ind.len(),
                self.learner.config.batch_size
            );
            return Ok(TrainStats::default());
        }
        run_updates(&mut self.learner, d_ind, n_updates, self.beta.beta(), rng)
    }

    /// Copies all population networks, resets optimiser state and the
    /// cloning-weight controller.
    pub fn warm_start(&mut self, population: &PopulationAgent) -> Result<()> {
        self.learner
            .load_networks_from(&population.learner)
            .map_err(|e| match e {
                Error::Shape { .. } => Error::Config(format!("warm start shape mismatch: {e}")),
                other => other,
            })?;
        self.beta.reset();
        Ok(())
    }
}
