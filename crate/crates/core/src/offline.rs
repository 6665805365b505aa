//! The population learner: TD3 with a fixed behaviour-cloning weight, trained
//! only from the pooled buffer, whose critic scores candidate morphologies.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::online::{run_updates, TrainStats};
use crate::replay::ReplayBuffer;
use crate::td3::{Td3Config, Td3Learner};

pub const DEFAULT_ALPHA: f64 = 0.4;

const CHECKPOINT_FORMAT: &str = "codesign-population";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationAgent {
    pub learner: Td3Learner,
    pub alpha: f64,
}

#[derive(Serialize, Deserialize)]
struct PopulationCheckpoint {
    format: String,
    version: u32,
    iteration: usize,
    agent: PopulationAgent,
}

/// Sample mean of the surrogate over several start states.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateEstimate {
    pub mean: f64,
    /// Standard error of the mean; zero for a single sample.
    pub std_error: f64,
    pub samples: usize,
}

impl PopulationAgent {
    /// `state_dim` is the full observation width (internal state plus morphology).
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        config: Td3Config,
        alpha: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(alpha >= 0.0) {
            return Err(Error::Config(format!("alpha must be non-negative, got {alpha}")));
        }
        Ok(PopulationAgent {
            learner: Td3Learner::new(state_dim, action_dim, config, rng)?,
            alpha,
        })
    }

    pub fn act(&self, observation: &[f64]) -> Result<Vec<f64>> {
        self.learner.act(observation)
    }

    /// `n_updates` updates on batches from `d_pop` with cloning weight
    /// `alpha`. Fails if the buffer holds less than one batch.
    pub fn train_offline<R: Rng + ?Sized>(
        &mut self,
        d_pop: &mut ReplayBuffer,
        n_updates: usize,
        rng: &mut R,
    ) -> Result<TrainStats> {
        self.train_with_weight(d_pop, n_updates, self.alpha, rng)
    }

    pub(crate) fn train_with_weight<R: Rng + ?Sized>(
        &mut self,
        d_pop: &mut ReplayBuffer,
        n_updates: usize,
        weight: f64,
        rng: &mut R,
    ) -> Result<TrainStats> {
        let batch = self.learner.config.batch_size;
        if d_pop.len() < batch {
            return Err(Error::State(format!(
                "offline training needs at least {batch} transitions, buffer holds {}",
                d_pop.len()
            )));
        }
        run_updates(&mut self.learner, d_pop, n_updates, weight, rng)
    }

    /// `Q1(s0 ++ xi, pi(s0 ++ xi))`.
    pub fn surrogate_value(&self, s0: &[f64], morphology: &[f64]) -> Result<f64> {
        let mut obs = Vec::with_capacity(s0.len() + morphology.len());
        obs.extend_from_slice(s0);
        obs.extend_from_slice(morphology);
        let action = self.learner.actor.forward(&obs)?;
        obs.extend_from_slice(&action);
        Ok(self.learner.critic.q1.forward(&obs)?[0])
    }

    pub fn surrogate_estimate(&self, states: &[&Vec<f64>], morphology: &[f64]) -> Result<SurrogateEstimate> {
        if states.is_empty() {
            return Err(Error::State("surrogate estimate needs at least one start state".into()));
        }
        let values = states
            .iter()
            .map(|s| self.surrogate_value(s, morphology))
            .collect::<Result<Vec<_>>>()?;
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std_error = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Ok(SurrogateEstimate {
            mean,
            std_error,
            samples: values.len(),
        })
    }

    pub fn checkpoint_file_name(iteration: usize) -> String {
        format!("population_{iteration:03}.json")
    }

    pub fn save(&self, path: &Path, iteration: usize) -> Result<()> {
        let ckpt = PopulationCheckpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            iteration,
            agent: self.clone(),
        };
        std::fs::write(path, serde_json::to_vec(&ckpt)?)?;
        Ok(())
    }

    /// Returns the agent and the iteration it was saved at.
    pub fn load(path: &Path) -> Result<(Self, usize)> {
        let ckpt: PopulationCheckpoint = serde_json::from_slice(&std::fs::read(path)?)?;
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported population checkpoint {} v{}",
                ckpt.format, ckpt.version
            )));
        }
        Ok((ckpt.agent, ckpt.iteration))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Mlp, OutputActivation};
    use crate::replay::Transition;
    use crate::td3::TwinCritic;
    use ndarray::{array, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_config() -> Td3Config {
        Td3Config {
            hidden: vec![8],
            batch_size: 4,
            ..Td3Config::default()
        }
    }

    fn agent_with_critic(q1: Mlp) -> PopulationAgent {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut agent = PopulationAgent::new(3, 1, small_config(), DEFAULT_ALPHA, &mut rng).unwrap();
        let q2 = q1.clone();
        let critic = TwinCritic::from_networks(q1.clone(), q2.clone(), q1, q2).unwrap();
        agent.learner = Td3Learner::from_networks(agent.learner.actor.clone(), critic, small_config()).unwrap();
        agent
    }

    #[test]
    fn constant_critic_gives_constant_surrogate() {
        let q = Mlp::from_parts(vec![Array2::zeros((1, 4))], vec![array![7.0]], OutputActivation::Linear).unwrap();
        let agent = agent_with_critic(q);
        for (s0, xi) in [([0.0, 1.0], [0.5]), ([3.0, -2.0], [1.5])] {
            assert_eq!(agent.surrogate_value(&s0, &xi).unwrap(), 7.0);
        }
    }

    #[test]
    fn surrogate_prefers_morphology_with_higher_q() {
        // Q = 2 * xi, independent of state and action.
        let q = Mlp::from_parts(
            vec![array![[0.0, 0.0, 2.0, 0.0]]],
            vec![array![0.0]],
            OutputActivation::Linear,
        )
        .unwrap();
        let agent = agent_with_critic(q);
        let s0 = [0.1, 0.2];
        assert!(agent.surrogate_value(&s0, &[1.4]).unwrap() > agent.surrogate_value(&s0, &[0.6]).unwrap());
    }

    #[test]
    fn estimate_reports_standard_error() {
        let q = Mlp::from_parts(
            vec![array![[1.0, 0.0, 0.0, 0.0]]],
            vec![array![0.0]],
            OutputActivation::Linear,
        )
        .unwrap();
        let agent = agent_with_critic(q);
        let a = vec![1.0, 0.0];
        let b = vec![3.0, 0.0];
        let est = agent.surrogate_estimate(&[&a, &b], &[1.0]).unwrap();
        assert_eq!(est.mean, 2.0);
        assert!((est.std_error - 1.0).abs() < 1e-12);
    }

    #[test]
    fn offline_training_requires_a_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut agent = PopulationAgent::new(3, 1, small_config(), DEFAULT_ALPHA, &mut rng).unwrap();
        let mut buf = ReplayBuffer::new(100, 0).unwrap();
        assert!(matches!(agent.train_offline(&mut buf, 1, &mut rng), Err(Error::State(_))));
        for i in 0..4 {
            buf.push(Transition {
                state: vec![i as f64, 0.0],
                action: vec![0.5],
                reward: 1.0,
                next_state: vec![0.0, 0.0],
                done: false,
                morphology: vec![1.0],
            })
            .unwrap();
        }
        let stats = agent.train_offline(&mut buf, 3, &mut rng).unwrap();
        assert_eq!(stats.updates, 3);
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let agent = PopulationAgent::new(3, 2, small_config(), 0.7, &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(PopulationAgent::checkpoint_file_name(3));
        agent.save(&path, 3).unwrap();
        assert!(path.ends_with("population_003.json"));
        let (back, it) = PopulationAgent::load(&path).unwrap();
        assert_eq!(it, 3);
        assert_eq!(back, agent);
    }
}
