//! Known-optimum test environment.
//!
//! Per-step reward `c - |xi - xi*|^2 - alpha2 |a - a*(xi)|^2` with
//! `a*(xi)_k = xi_k - 1`. The internal state is the episode clock
//! `(sin(2 pi t / T), cos(2 pi t / T))`, so dynamics ignore the action.

use std::f64::consts::TAU;

use super::{check_action, Env, EnvOptions, EnvSpec, RewardComponents, RewardCoeffs, StepOutcome};
use crate::bounds::Bounds;
use crate::error::{Error, Result};

pub const SYNTHETIC_NAME: &str = "synthetic-fitness";

const DEFAULT_EPISODE_LENGTH: usize = 50;
const PEAK_REWARD: f64 = 1.0;

pub struct SyntheticFitnessEnv {
    spec: EnvSpec,
    optimum: Vec<f64>,
    morphology: Vec<f64>,
    t: usize,
    ready: bool,
}

impl SyntheticFitnessEnv {
    pub fn new(options: &EnvOptions) -> Result<Self> {
        Self::with_optimum(vec![1.2, 0.8], options)
    }

    pub fn with_optimum(optimum: Vec<f64>, options: &EnvOptions) -> Result<Self> {
        let dim = optimum.len();
        let bounds = Bounds::uniform(dim, 0.5, 1.5)?;
        bounds.check(&optimum)?;
        let episode_length = options.episode_length.unwrap_or(DEFAULT_EPISODE_LENGTH);
        let spec = EnvSpec {
            name: SYNTHETIC_NAME.to_string(),
            state_dim: 2,
            action_dim: dim,
            morphology_dim: dim,
            morphology_bounds: bounds,
            reward_coeffs: RewardCoeffs {
                alpha1: 1.0,
                alpha2: 0.1,
                alpha3: 0.0,
            },
            episode_length,
            dt: 1.0,
            return_target: options
                .return_target
                .unwrap_or(PEAK_REWARD * episode_length as f64),
        };
        spec.validate()?;
        Ok(SyntheticFitnessEnv {
            morphology: spec.morphology_bounds.midpoint(),
            spec,
            optimum,
            t: 0,
            ready: false,
        })
    }

    /// The hidden optimal morphology.
    pub fn optimal_morphology(&self) -> Vec<f64> {
        self.optimum.clone()
    }

    pub fn optimal_action(morphology: &[f64]) -> Vec<f64> {
        morphology.iter().map(|x| x - 1.0).collect()
    }

    /// Reward for one step; independent of the clock.
    pub fn reward(&self, morphology: &[f64], action: &[f64]) -> RewardComponents {
        let shape: f64 = morphology
            .iter()
            .zip(&self.optimum)
            .map(|(x, o)| (x - o) * (x - o))
            .sum();
        let err: f64 = action
            .iter()
            .zip(Self::optimal_action(morphology))
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        RewardComponents {
            progress: PEAK_REWARD - shape,
            action_penalty: -self.spec.reward_coeffs.alpha2 * err,
            alive: self.spec.reward_coeffs.alpha3,
        }
    }

    fn observation(&self) -> Vec<f64> {
        let phase = TAU * self.t as f64 / self.spec.episode_length as f64;
        let mut obs = vec![phase.sin(), phase.cos()];
        obs.extend_from_slice(&self.morphology);
        obs
    }
}

impl Env for SyntheticFitnessEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, morphology: &[f64], _seed: u64) -> Result<Vec<f64>> {
        self.spec.morphology_bounds.check(morphology)?;
        self.morphology = morphology.to_vec();
        self.t = 0;
        self.ready = true;
        Ok(self.observation())
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        if !self.ready {
            return Err(Error::State("step called before reset or after episode end".into()));
        }
        check_action(action, self.spec.action_dim)?;
        let components = self.reward(&self.morphology, action);
        self.t += 1;
        let done = self.t >= self.spec.episode_length;
        if done {
            self.ready = false;
        }
        Ok(StepOutcome {
            observation: self.observation(),
            reward: components.total(),
            done,
            components,
        })
    }

    fn reference_action(&self) -> Option<Vec<f64>> {
        Some(Self::optimal_action(&self.morphology))
    }
}
