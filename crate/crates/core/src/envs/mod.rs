//! Morphology-conditioned environments.
//!
//! Every environment returns observations laid out as
//! `internal state (state_dim) ++ morphology (morphology_dim)`, and rewards
//! of the form `progress + action_penalty + alive`, where for locomotion
//! `progress = (x_{t+1} - x_t) / alpha1`, `action_penalty = -alpha2 * |a|^2`
//! and `alive = alpha3`.

mod crawler;
mod synthetic;

pub use crawler::{CrawlerGeometry, PlanarCrawlerEnv, CRAWLER_NAME};
pub use synthetic::{SyntheticFitnessEnv, SYNTHETIC_NAME};

use serde::{Deserialize, Serialize};

use crate::bounds::Bounds;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardCoeffs {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: String,
    pub state_dim: usize,
    pub action_dim: usize,
    pub morphology_dim: usize,
    pub morphology_bounds: Bounds,
    pub reward_coeffs: RewardCoeffs,
    pub episode_length: usize,
    /// Control period in seconds.
    pub dt: f64,
    /// Return the individual learner aims for; drives the adaptive cloning weight.
    pub return_target: f64,
}

impl EnvSpec {
    pub fn observation_dim(&self) -> usize {
        self.state_dim + self.morphology_dim
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.reward_coeffs.alpha1 > 0.0) {
            return Err(Error::Config("alpha1 must be positive".into()));
        }
        if self.state_dim == 0 || self.action_dim == 0 || self.episode_length == 0 {
            return Err(Error::Config("environment dimensions must be positive".into()));
        }
        if self.morphology_bounds.dim() != self.morphology_dim {
            return Err(Error::Config("morphology bounds do not match dimension".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardComponents {
    pub progress: f64,
    /// Non-positive.
    pub action_penalty: f64,
    pub alive: f64,
}

impl RewardComponents {
    pub fn total(&self) -> f64 {
        self.progress + self.action_penalty + self.alive
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub components: RewardComponents,
}

pub trait Env: Send {
    fn spec(&self) -> &EnvSpec;

    /// Applies `morphology` and returns the initial observation. Deterministic
    /// in `(morphology, seed)`.
    fn reset(&mut self, morphology: &[f64], seed: u64) -> Result<Vec<f64>>;

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome>;

    /// Greedy reference action used to calibrate return targets, if the
    /// environment has one.
    fn reference_action(&self) -> Option<Vec<f64>> {
        None
    }

    /// Oscillator state for environments driven by a CPG.
    fn cpg_state(&self) -> Option<&crate::cpg::CpgState> {
        None
    }
}

/// Options shared by the registry constructors.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnvOptions {
    pub episode_length: Option<usize>,
    /// Scale of the seeded perturbation of the initial state (crawler only).
    pub initial_jitter: Option<f64>,
    /// Apply the gait only from the first action of each episode (crawler only).
    pub gait_per_episode: bool,
    /// Use wrapped phase errors in the CPG coupling (crawler only).
    pub wrapped_coupling: bool,
    pub return_target: Option<f64>,
}

pub fn env_names() -> &'static [&'static str] {
    &[CRAWLER_NAME, SYNTHETIC_NAME]
}

pub fn make_env(name: &str, options: &EnvOptions) -> Result<Box<dyn Env>> {
    match name {
        CRAWLER_NAME => Ok(Box::new(PlanarCrawlerEnv::new(options)?)),
        SYNTHETIC_NAME => Ok(Box::new(SyntheticFitnessEnv::new(options)?)),
        other => Err(Error::Config(format!(
            "unknown environment '{other}', expected one of {:?}",
            env_names()
        ))),
    }
}

pub(crate) fn check_action(action: &[f64], dim: usize) -> Result<()> {
    crate::error::ensure_len("action", dim, action.len())?;
    if action.iter().any(|a| !(a.abs() <= 1.0)) {
        return Err(Error::Argument(format!("action {action:?} outside [-1, 1]")));
    }
    Ok(())
}
