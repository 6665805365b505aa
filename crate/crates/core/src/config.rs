//! Experiment configuration: named presets plus TOML overrides.
//!
//! A TOML file only needs the keys it changes; everything else comes from
//! the selected preset. Unknown keys are rejected.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bo::BoConfig;
use crate::bounds::Bounds;
use crate::envs::{make_env, EnvOptions, EnvSpec, CRAWLER_NAME};
use crate::error::{Error, Result};
use crate::online::{BetaMode, BetaSettings};
use crate::td3::Td3Config;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    /// Warm start plus adaptive cloning weight, with BO over morphology.
    Full,
    /// Random re-initialisation of the individual learner every iteration.
    NoCopy,
    /// Warm start with the cloning weight pinned at zero.
    DirectCopy,
    /// Warm start with a constant cloning weight.
    FixedTerm,
    /// Warm start with the adaptive cloning weight.
    AdaptiveTerm,
    /// One learner collects data, trains on the pooled buffer and scores morphologies.
    SingleNetwork,
    /// Morphologies drawn uniformly each iteration instead of by BO.
    RandomSampling,
}

impl AblationMode {
    pub const ALL: [AblationMode; 7] = [
        AblationMode::Full,
        AblationMode::NoCopy,
        AblationMode::DirectCopy,
        AblationMode::FixedTerm,
        AblationMode::AdaptiveTerm,
        AblationMode::SingleNetwork,
        AblationMode::RandomSampling,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AblationMode::Full => "full",
            AblationMode::NoCopy => "no_copy",
            AblationMode::DirectCopy => "direct_copy",
            AblationMode::FixedTerm => "fixed_term",
            AblationMode::AdaptiveTerm => "adaptive_term",
            AblationMode::SingleNetwork => "single_network",
            AblationMode::RandomSampling => "random_sampling",
        }
    }

    /// Whether the individual learner is copied from the population learner
    /// at iteration boundaries.
    pub fn warm_starts(&self) -> bool {
        !matches!(self, AblationMode::NoCopy | AblationMode::SingleNetwork)
    }

    pub fn uses_bo(&self) -> bool {
        *self != AblationMode::RandomSampling
    }

    pub fn single_network(&self) -> bool {
        *self == AblationMode::SingleNetwork
    }

    /// Cloning-weight controller settings for this mode.
    pub fn beta_settings(&self, base: BetaSettings) -> BetaSettings {
        match self {
            AblationMode::DirectCopy => BetaSettings {
                initial: 0.0,
                mode: BetaMode::Fixed,
                ..base
            },
            AblationMode::FixedTerm => BetaSettings {
                mode: BetaMode::Fixed,
                ..base
            },
            _ => BetaSettings {
                mode: BetaMode::Adaptive,
                ..base
            },
        }
    }
}

impl fmt::Display for AblationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AblationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AblationMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s || m.as_str().replace('_', "-") == s)
            .ok_or_else(|| {
                let names: Vec<_> = AblationMode::ALL.iter().map(AblationMode::as_str).collect();
                Error::Config(format!("unknown mode '{s}', expected one of {names:?}"))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OfflineSchedule {
    /// Population updates interleaved with individual updates after every episode.
    Interleaved,
    /// All population updates for an iteration run after its last episode.
    PostHoc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Paper,
    Desk,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            other => Err(Error::Config(format!("unknown preset '{other}', expected paper or desk"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Capacities {
    pub individual: usize,
    pub population: usize,
    pub initial: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: String,
    #[serde(default)]
    pub env_options: EnvOptions,
    /// Narrower search box than the environment's own bounds, if set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub morphology_bounds: Option<Bounds>,
    /// First morphology; the centre of the search box if unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_morphology: Option<Vec<f64>>,
    pub seed: u64,
    pub mode: AblationMode,
    pub iterations: usize,
    pub episodes_per_iteration: usize,
    /// Gradient updates per episode; the episode length if unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub updates_per_episode: Option<usize>,
    /// Uniform-random action steps at the start of the run.
    pub warmup_steps: usize,
    pub exploration_sigma: f64,
    pub td3: Td3Config,
    pub alpha: f64,
    pub beta: BetaSettings,
    pub capacities: Capacities,
    pub bo: BoConfig,
    /// Start states drawn from the initial-state store per BO round.
    pub surrogate_samples: usize,
    pub offline_schedule: OfflineSchedule,
    /// Greedy evaluation episodes after each iteration's training.
    pub eval_episodes: usize,
}

impl ExperimentConfig {
    /// Full-scale hyperparameters with 1000-step episodes.
    pub fn paper() -> Self {
        ExperimentConfig {
            env: CRAWLER_NAME.into(),
            env_options: EnvOptions {
                episode_length: Some(1000),
                ..EnvOptions::default()
            },
            morphology_bounds: None,
            initial_morphology: None,
            seed: 0,
            mode: AblationMode::Full,
            iterations: 10,
            episodes_per_iteration: 30,
            updates_per_episode: None,
            warmup_steps: 1000,
            exploration_sigma: 0.1,
            td3: Td3Config::default(),
            alpha: 0.4,
            beta: BetaSettings::default(),
            capacities: Capacities {
                individual: 1_000_000,
                population: 10_000_000,
                initial: 1_000_000,
            },
            bo: BoConfig::default(),
            surrogate_samples: 64,
            offline_schedule: OfflineSchedule::Interleaved,
            eval_episodes: 1,
        }
    }

    /// Shrunk for a single CPU: 50-step episodes, smaller buffers, and
    /// controller gains scaled up by the ratio of episode lengths so the
    /// cloning weight moves at a comparable rate on the smaller returns.
    pub fn desk() -> Self {
        let paper = Self::paper();
        let scale = 1000.0 / 50.0;
        ExperimentConfig {
            env_options: EnvOptions {
                episode_length: Some(50),
                ..EnvOptions::default()
            },
            warmup_steps: 500,
            beta: BetaSettings {
                kp: paper.beta.kp * scale,
                kd: paper.beta.kd * scale,
                ..paper.beta
            },
            capacities: Capacities {
                individual: 100_000,
                population: 1_000_000,
                initial: 100_000,
            },
            ..paper
        }
    }

    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Paper => Self::paper(),
            Preset::Desk => Self::desk(),
        }
    }

    /// Preset values overridden by the keys present in `text`.
    pub fn from_toml_str(preset: Preset, text: &str) -> Result<Self> {
        let overrides: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(format!("config parse error: {e}")))?;
        let base = toml::Table::try_from(Self::preset(preset))
            .map_err(|e| Error::Config(format!("preset serialisation failed: {e}")))?;
        let merged = merge(base, overrides);
        let config: ExperimentConfig = merged
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("invalid config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_toml_file(preset: Preset, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(preset, &text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn env_spec(&self) -> Result<EnvSpec> {
        Ok(make_env(&self.env, &self.env_options)?.spec().clone())
    }

    /// The box searched over: the override if given, else the environment's.
    pub fn search_bounds(&self, spec: &EnvSpec) -> Result<Bounds> {
        match &self.morphology_bounds {
            None => Ok(spec.morphology_bounds.clone()),
            Some(b) => {
                if b.dim() != spec.morphology_dim
                    || !spec.morphology_bounds.contains(b.low())
                    || !spec.morphology_bounds.contains(b.high())
                {
                    return Err(Error::Config(format!(
                        "morphology bounds must lie inside the environment box {:?}",
                        spec.morphology_bounds
                    )));
                }
                Ok(b.clone())
            }
        }
    }

    pub fn initial_morphology(&self, bounds: &Bounds) -> Result<Vec<f64>> {
        match &self.initial_morphology {
            None => Ok(bounds.midpoint()),
            Some(x) => {
                bounds.check(x).map_err(|e| Error::Config(format!("initial morphology: {e}")))?;
                Ok(x.clone())
            }
        }
    }

    pub fn updates_per_episode(&self, spec: &EnvSpec) -> usize {
        self.updates_per_episode.unwrap_or(spec.episode_length)
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.env_spec()?;
        let bounds = self.search_bounds(&spec)?;
        self.initial_morphology(&bounds)?;
        let cfg = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        self.td3.validate().map_err(cfg)?;
        self.beta.validate().map_err(cfg)?;
        self.bo.validate().map_err(cfg)?;
        if self.iterations == 0 || self.episodes_per_iteration == 0 {
            return Err(Error::Config("iterations and episodes per iteration must be positive".into()));
        }
        if !(self.exploration_sigma > 0.0) || !(self.alpha >= 0.0) {
            return Err(Error::Config("exploration sigma must be positive and alpha non-negative".into()));
        }
        let c = &self.capacities;
        if c.individual == 0 || c.population == 0 || c.initial == 0 {
            return Err(Error::Config("buffer capacities must be positive".into()));
        }
        if self.surrogate_samples == 0 {
            return Err(Error::Config("surrogate needs at least one start state".into()));
        }
        if self.mode.uses_bo() && self.bo.steps + self.bo.random_probes == 0 {
            return Err(Error::Config("BO needs at least one probe or step".into()));
        }
        Ok(())
    }
}

fn merge(mut base: toml::Table, overrides: toml::Table) -> toml::Table {
    for (key, value) in overrides {
        match (base.remove(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => {
                base.insert(key, toml::Value::Table(merge(b, o)));
            }
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
    base
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        ExperimentConfig::paper().validate().unwrap();
        ExperimentConfig::desk().validate().unwrap();
    }

    #[test]
    fn paper_preset_matches_table() {
        let c = ExperimentConfig::paper();
        assert_eq!(c.td3.learning_rate, 3e-4);
        assert_eq!(c.td3.tau, 5e-3);
        assert_eq!(c.td3.batch_size, 256);
        assert_eq!(c.td3.policy_noise.sigma, 0.2);
        assert_eq!(c.td3.policy_noise.clip, 0.5);
        assert_eq!(c.td3.policy_update_frequency, 1);
        assert_eq!(c.alpha, 0.4);
        assert_eq!((c.beta.kp, c.beta.kd), (3e-5, 8e-5));
        assert_eq!((c.bo.steps, c.bo.random_probes), (30, 30));
        assert_eq!(c.env_options.episode_length, Some(1000));
        assert_eq!(c.capacities.population, 10_000_000);
    }

    #[test]
    fn toml_overrides_only_given_keys() {
        let c = ExperimentConfig::from_toml_str(
            Preset::Desk,
            "seed = 9\nmode = \"no_copy\"\n[bo]\nsteps = 3\n[td3]\nhidden = [16]\n",
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.mode, AblationMode::NoCopy);
        assert_eq!(c.bo.steps, 3);
        assert_eq!(c.bo.random_probes, 30);
        assert_eq!(c.td3.hidden, vec![16]);
        assert_eq!(c.episodes_per_iteration, 30);
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let err = ExperimentConfig::from_toml_str(Preset::Desk, "episodes = 3").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn round_trips_through_toml() {
        let c = ExperimentConfig::desk();
        let text = c.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(Preset::Paper, &text).unwrap(), c);
    }

    #[test]
    fn mode_names_parse() {
        for m in AblationMode::ALL {
            assert_eq!(m.as_str().parse::<AblationMode>().unwrap(), m);
        }
        assert!("bogus".parse::<AblationMode>().is_err());
    }
}
