//! Planar four-legged crawler driven by a CPG, with analytic strut kinematics.
//!
//! Morphology (6 scale factors in `[0.5, 1.5]`): front thigh, front calf,
//! front foot, rear thigh, rear calf, rear foot. Legs are ordered left front,
//! right front, left rear, right rear; front legs share the first three
//! factors and rear legs the last three.
//!
//! Leg model, for segment scales `s = (s_thigh, s_calf, s_foot)`:
//!
//! * segment lengths `l_k = base_k * s_k` with `base = (0.10, 0.10, 0.04)` m,
//!   leg length `L = l_1 + l_2 + l_3`;
//! * hip inertia `I = sum_k rho_k (b_k^3 - a_k^3) / 3` for segment `k` spanning
//!   `[a_k, b_k]` from the hip, densities `rho = (1.0, 0.6, 2.0)` kg/m;
//! * tracking ratio `q = 1 / (1 + I / I_ref)`, `I_ref = 2.5e-3` kg m^2;
//! * traction `c = 1 - exp(-l_3 / 0.03)`;
//! * gain `g = q * c * L`.
//!
//! The body pitch factor is `P = exp(-((L_rear - L_front - 0.03) / 0.1)^2)`.
//!
//! Each control step (20 ms) applies the action as per-leg CPG phases
//! `p_i = pi * a_i` and integrates the CPG with RK4 at 1 ms. After every
//! sub-step, with joint command `theta_i` and its rate `dtheta_i`:
//!
//! * leg `i` is in stance iff `sin(phi_i) > 0`; `k` legs are in stance;
//! * stance sweep `u_i = max(0, -g_i cos(theta_i) dtheta_i)`;
//! * body speed `v = P * k (4 - k) / 4 * mean_{stance} u_i` (zero when `k = 0`);
//! * body position `x += v * 1 ms`.
//!
//! When all legs share one phase the stance support factor `k (4 - k) / 4` is
//! zero, so a pronk makes no forward progress.
//!
//! Internal state (13): `sin(phi_i)`, `cos(phi_i)`, `r_i` for the four legs,
//! then the mean body speed over the previous control step.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_action, Env, EnvOptions, EnvSpec, RewardComponents, RewardCoeffs, StepOutcome};
use crate::bounds::Bounds;
use crate::cpg::{
    cpg_derivative, cpg_output, cpg_output_rate, cpg_step, CpgParams, CpgState, GaitAction,
    DEFAULT_DT,
};
use crate::error::{Error, Result};

pub const CRAWLER_NAME: &str = "planar-crawler";

const N_LEGS: usize = 4;
const STATE_DIM: usize = 3 * N_LEGS + 1;
const CONTROL_DT: f64 = 0.02;
const DEFAULT_EPISODE_LENGTH: usize = 1000;
const DEFAULT_JITTER: f64 = 0.5;
/// Per-step return target: the trot reference at the nominal morphology
/// averages 0.67 per step over 50 steps and 0.72 over 1000.
pub const RETURN_TARGET_PER_STEP: f64 = 0.7;

#[derive(Clone, Debug, PartialEq)]
pub struct CrawlerGeometry {
    pub base_lengths: [f64; 3],
    pub densities: [f64; 3],
    pub inertia_ref: f64,
    pub traction_length: f64,
    pub pitch_offset: f64,
    pub pitch_width: f64,
}

impl Default for CrawlerGeometry {
    fn default() -> Self {
        CrawlerGeometry {
            base_lengths: [0.10, 0.10, 0.04],
            densities: [1.0, 0.6, 2.0],
            inertia_ref: 2.5e-3,
            traction_length: 0.03,
            pitch_offset: 0.03,
            pitch_width: 0.1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LegModel {
    pub length: f64,
    pub inertia: f64,
    pub gain: f64,
}

impl CrawlerGeometry {
    pub fn leg(&self, scales: &[f64]) -> LegModel {
        let mut start = 0.0;
        let mut inertia = 0.0;
        for k in 0..3 {
            let end = start + self.base_lengths[k] * scales[k];
            inertia += self.densities[k] * (end * end * end - start * start * start) / 3.0;
            start = end;
        }
        let length = start;
        let foot = self.base_lengths[2] * scales[2];
        let tracking = 1.0 / (1.0 + inertia / self.inertia_ref);
        let traction = 1.0 - (-foot / self.traction_length).exp();
        LegModel {
            length,
            inertia,
            gain: tracking * traction * length,
        }
    }

    /// Leg models in CPG order plus the pitch factor.
    pub fn legs(&self, morphology: &[f64]) -> ([LegModel; N_LEGS], f64) {
        let front = self.leg(&morphology[..3]);
        let rear = self.leg(&morphology[3..6]);
        let z = (rear.length - front.length - self.pitch_offset) / self.pitch_width;
        ([front, front, rear, rear], (-z * z).exp())
    }
}

pub struct PlanarCrawlerEnv {
    spec: EnvSpec,
    geometry: CrawlerGeometry,
    base_params: CpgParams,
    params: CpgParams,
    cpg: CpgState,
    legs: [LegModel; N_LEGS],
    pitch: f64,
    morphology: Vec<f64>,
    position: f64,
    last_speed: f64,
    t: usize,
    jitter: f64,
    gait_per_episode: bool,
    ready: bool,
}

impl PlanarCrawlerEnv {
    pub fn new(options: &EnvOptions) -> Result<Self> {
        let episode_length = options.episode_length.unwrap_or(DEFAULT_EPISODE_LENGTH);
        let spec = EnvSpec {
            name: CRAWLER_NAME.to_string(),
            state_dim: STATE_DIM,
            action_dim: N_LEGS,
            morphology_dim: 6,
            morphology_bounds: Bounds::uniform(6, 0.5, 1.5)?,
            reward_coeffs: RewardCoeffs {
                alpha1: CONTROL_DT,
                alpha2: 0.1,
                alpha3: 0.05,
            },
            episode_length,
            dt: CONTROL_DT,
            return_target: options
                .return_target
                .unwrap_or(RETURN_TARGET_PER_STEP * episode_length as f64),
        };
        spec.validate()?;
        let jitter = options.initial_jitter.unwrap_or(DEFAULT_JITTER);
        if !(0.0..=1.0).contains(&jitter) {
            return Err(Error::Config("initial jitter must lie in [0, 1]".into()));
        }
        let mut base_params = CpgParams::quadruped();
        base_params.wrapped_coupling = options.wrapped_coupling;
        let geometry = CrawlerGeometry::default();
        let nominal = vec![1.0; 6];
        let (legs, pitch) = geometry.legs(&nominal);
        Ok(PlanarCrawlerEnv {
            spec,
            geometry,
            params: base_params.clone(),
            base_params,
            cpg: CpgState::at_rest(N_LEGS),
            legs,
            pitch,
            morphology: nominal,
            position: 0.0,
            last_speed: 0.0,
            t: 0,
            jitter,
            gait_per_episode: options.gait_per_episode,
            ready: false,
        })
    }

    pub fn geometry(&self) -> &CrawlerGeometry {
        &self.geometry
    }

    pub fn position(&self) -> f64 {
        self.position
    }

    fn observation(&self) -> Vec<f64> {
        let mut obs = Vec::with_capacity(self.spec.observation_dim());
        obs.extend(self.cpg.phase.iter().map(|p| p.sin()));
        obs.extend(self.cpg.phase.iter().map(|p| p.cos()));
        obs.extend_from_slice(&self.cpg.amp);
        obs.push(self.last_speed);
        obs.extend_from_slice(&self.morphology);
        obs
    }

    fn body_speed(&self) -> f64 {
        let deriv = cpg_derivative(&self.cpg, &self.params);
        let theta = cpg_output(&self.cpg);
        let theta_rate = cpg_output_rate(&self.cpg, &deriv);
        let mut stance = 0usize;
        let mut sweep = 0.0;
        for i in 0..N_LEGS {
            if self.cpg.phase[i].sin() > 0.0 {
                stance += 1;
                sweep += (-self.legs[i].gain * theta[i].cos() * theta_rate[i]).max(0.0);
            }
        }
        if stance == 0 {
            return 0.0;
        }
        let support = (stance * (N_LEGS - stance)) as f64 / (N_LEGS * N_LEGS / 4) as f64;
        self.pitch * support * sweep / stance as f64
    }
}

impl Env for PlanarCrawlerEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, morphology: &[f64], seed: u64) -> Result<Vec<f64>> {
        self.spec.morphology_bounds.check(morphology)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cpg = CpgState::at_rest(N_LEGS);
        for i in 0..N_LEGS {
            cpg.amp[i] = self.jitter * rng.random::<f64>() * self.base_params.amplitude[i];
            cpg.offset[i] = self.jitter * rng.random::<f64>() * self.base_params.offset[i];
        }
        self.cpg = cpg;
        self.params = self.base_params.clone();
        self.morphology = morphology.to_vec();
        let (legs, pitch) = self.geometry.legs(morphology);
        self.legs = legs;
        self.pitch = pitch;
        self.position = 0.0;
        self.last_speed = 0.0;
        self.t = 0;
        self.ready = true;
        Ok(self.observation())
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        if !self.ready {
            return Err(Error::State("step called before reset or after episode end".into()));
        }
        check_action(action, N_LEGS)?;
        if !self.gait_per_episode || self.t == 0 {
            let phases = action.iter().map(|a| PI * a).collect();
            self.params.set_gait(&GaitAction::new(phases)?)?;
        }
        let substeps = (CONTROL_DT / DEFAULT_DT).round() as usize;
        let start = self.position;
        for _ in 0..substeps {
            self.cpg = cpg_step(&self.cpg, &self.params, DEFAULT_DT)?;
            self.position += self.body_speed() * DEFAULT_DT;
        }
        let displacement = self.position - start;
        self.last_speed = displacement / CONTROL_DT;
        self.t += 1;

        let RewardCoeffs {
            alpha1,
            alpha2,
            alpha3,
        } = self.spec.reward_coeffs;
        let components = RewardComponents {
            progress: displacement / alpha1,
            action_penalty: -alpha2 * action.iter().map(|a| a * a).sum::<f64>(),
            alive: alpha3,
        };
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
        Some(vec![-0.5, 0.5, 0.5, -0.5])
    }

    fn cpg_state(&self) -> Option<&CpgState> {
        Some(&self.cpg)
    }
}
