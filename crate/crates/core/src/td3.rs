//! Twin-critic machinery shared by the individual and population learners:
//! smoothed clipped-double-Q targets, the critic regression loss and the
//! normalised-Q actor objective with a behaviour-cloning penalty.
//!
//! Reductions are fixed so hand-computed values can be checked exactly:
//!
//! * critic loss: `sum_i 0.5 * mean_b (y_b - Q_i(s_b, a_b))^2` over both critics;
//! * actor loss: `-mean_b [ Q_1(s_b, pi(s_b)) / lambda - w * sum_k (pi_k(s_b) - a_bk)^2 ]`
//!   with `lambda = mean_b |Q_1(s_b, a_b)|` held constant (clamped below at 1e-8).

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::nn::{soft_update, AdamConfig, AdamState, Mlp, MlpGrads, OutputActivation};
use crate::replay::{Transition, ACTION_BOUND};

/// Lower clamp on the Q normaliser.
pub const MIN_Q_NORMALIZER: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingNoise {
    pub sigma: f64,
    pub clip: f64,
}

impl Default for SmoothingNoise {
    fn default() -> Self {
        SmoothingNoise {
            sigma: 0.2,
            clip: 0.5,
        }
    }
}

impl SmoothingNoise {
    pub fn validate(&self) -> Result<()> {
        if self.sigma > 0.0 && self.clip > 0.0 {
            Ok(())
        } else {
            Err(Error::Argument(format!("invalid smoothing noise {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Td3Config {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub gamma: f64,
    pub policy_noise: SmoothingNoise,
    pub policy_update_frequency: usize,
}

impl Default for Td3Config {
    fn default() -> Self {
        Td3Config {
            hidden: vec![64, 64],
            learning_rate: 3e-4,
            tau: 5e-3,
            batch_size: 256,
            gamma: 0.99,
            policy_noise: SmoothingNoise::default(),
            policy_update_frequency: 1,
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Config("tau must lie in [0, 1]".into()));
        }
        if self.batch_size == 0 || self.policy_update_frequency == 0 {
            return Err(Error::Config("batch size and policy frequency must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config("gamma must lie in [0, 1)".into()));
        }
        self.policy_noise
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            ..AdamConfig::default()
        }
    }
}

/// Column-stacked view of a list of transitions. Rows of `states` and
/// `next_states` are observations: internal state followed by morphology.
#[derive(Clone, Debug)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    pub dones: Array1<f64>,
}

impl Batch {
    pub fn from_transitions(items: &[&Transition]) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| Error::Argument("empty batch".into()))?;
        let (n, sd, ad, md) = (
            items.len(),
            first.state.len(),
            first.action.len(),
            first.morphology.len(),
        );
        let mut states = Array2::zeros((n, sd + md));
        let mut next_states = Array2::zeros((n, sd + md));
        let mut actions = Array2::zeros((n, ad));
        let mut rewards = Array1::zeros(n);
        let mut dones = Array1::zeros(n);
        for (i, t) in items.iter().enumerate() {
            ensure_len("batch state width", sd, t.state.len())?;
            ensure_len("batch next-state width", sd, t.next_state.len())?;
            ensure_len("batch action width", ad, t.action.len())?;
            ensure_len("batch morphology width", md, t.morphology.len())?;
            let morph = ndarray::aview1(&t.morphology);
            let mut row = states.row_mut(i);
            row.slice_mut(s![..sd]).assign(&ndarray::aview1(&t.state));
            row.slice_mut(s![sd..]).assign(&morph);
            let mut row = next_states.row_mut(i);
            row.slice_mut(s![..sd]).assign(&ndarray::aview1(&t.next_state));
            row.slice_mut(s![sd..]).assign(&morph);
            actions.row_mut(i).assign(&ndarray::aview1(&t.action));
            rewards[i] = t.reward;
            dones[i] = if t.done { 1.0 } else { 0.0 };
        }
        Ok(Batch {
            states,
            actions,
            rewards,
            next_states,
            dones,
        })
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwinCritic {
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
}

impl TwinCritic {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        let sizes = layer_sizes(state_dim + action_dim, hidden, 1);
        let q1 = Mlp::new(&sizes, OutputActivation::Linear, rng)?;
        let q2 = Mlp::new(&sizes, OutputActivation::Linear, rng)?;
        Ok(TwinCritic {
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            q1,
            q2,
        })
    }

    pub fn from_networks(q1: Mlp, q2: Mlp, q1_target: Mlp, q2_target: Mlp) -> Result<Self> {
        let ok = [&q2, &q1_target, &q2_target]
            .iter()
            .all(|n| n.same_shape(&q1));
        if !ok || q1.output_dim() != 1 {
            return Err(Error::Argument("twin critics need identical single-output shapes".into()));
        }
        Ok(TwinCritic {
            q1,
            q2,
            q1_target,
            q2_target,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.q1.input_dim()
    }

    pub fn soft_update_targets(&mut self, tau: f64) -> Result<()> {
        soft_update(&mut self.q1_target, &self.q1, tau)?;
        soft_update(&mut self.q2_target, &self.q2, tau)
    }

    pub fn copy_from(&mut self, other: &TwinCritic) -> Result<()> {
        self.q1.copy_from(&other.q1)?;
        self.q2.copy_from(&other.q2)?;
        self.q1_target.copy_from(&other.q1_target)?;
        self.q2_target.copy_from(&other.q2_target)
    }
}

pub fn layer_sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut sizes = Vec::with_capacity(hidden.len() + 2);
    sizes.push(input);
    sizes.extend_from_slice(hidden);
    sizes.push(output);
    sizes
}

pub fn actor_network<R: Rng + ?Sized>(
    state_dim: usize,
    action_dim: usize,
    hidden: &[usize],
    rng: &mut R,
) -> Result<Mlp> {
    Mlp::new(
        &layer_sizes(state_dim, hidden, action_dim),
        OutputActivation::ScaledTanh {
            bound: ACTION_BOUND,
        },
        rng,
    )
}

pub(crate) fn state_action(states: ArrayView2<f64>, actions: ArrayView2<f64>) -> Result<Array2<f64>> {
    concatenate(Axis(1), &[states, actions]).map_err(|e| Error::Argument(e.to_string()))
}

/// Clipped-double-Q target with target-policy smoothing:
/// `y = r + gamma * (1 - done) * min_i Qbar_i(s', clip(pibar(s') + eps, -1, 1))`,
/// `eps ~ clip(N(0, sigma), -c, c)`.
pub fn td_target<R: Rng + ?Sized>(
    critic: &TwinCritic,
    actor_target: &Mlp,
    batch: &Batch,
    gamma: f64,
    noise: SmoothingNoise,
    rng: &mut R,
) -> Result<Array1<f64>> {
    if batch.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Argument(format!("gamma must lie in [0, 1), got {gamma}")));
    }
    noise.validate()?;
    let normal = Normal::new(0.0, noise.sigma).map_err(|e| Error::Argument(e.to_string()))?;
    let mut next_actions = actor_target.forward_batch(batch.next_states.view())?;
    next_actions.mapv_inplace(|a| {
        let eps: f64 = normal.sample(rng);
        (a + eps.clamp(-noise.clip, noise.clip)).clamp(-ACTION_BOUND, ACTION_BOUND)
    });
    let sa = state_action(batch.next_states.view(), next_actions.view())?;
    let q1 = critic.q1_target.forward_batch(sa.view())?;
    let q2 = critic.q2_target.forward_batch(sa.view())?;
    let targets = (0..batch.len())
        .map(|i| {
            let q = q1[[i, 0]].min(q2[[i, 0]]);
            batch.rewards[i] + gamma * (1.0 - batch.dones[i]) * q
        })
        .collect();
    Ok(targets)
}

#[derive(Clone, Debug)]
pub struct CriticLoss {
    pub loss: f64,
    pub q1_grads: MlpGrads,
    pub q2_grads: MlpGrads,
}

pub fn critic_loss(critic: &TwinCritic, batch: &Batch, targets: &Array1<f64>) -> Result<CriticLoss> {
    ensure_len("critic targets", batch.len(), targets.len())?;
    let sa = state_action(batch.states.view(), batch.actions.view())?;
    let n = batch.len() as f64;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(2);
    for net in [&critic.q1, &critic.q2] {
        let cache = net.forward_cached(sa.view())?;
        let mut residual = cache.output().clone();
        for (r, y) in residual.column_mut(0).iter_mut().zip(targets) {
            *r -= y;
        }
        loss += 0.5 * residual.iter().map(|r| r * r).sum::<f64>() / n;
        residual.mapv_inplace(|r| r / n);
        grads.push(net.backward_batch(&cache, residual.view())?.0);
    }
    let q2_grads = grads.pop().expect("two critics");
    let q1_grads = grads.pop().expect("two critics");
    Ok(CriticLoss {
        loss,
        q1_grads,
        q2_grads,
    })
}

#[derive(Clone, Debug)]
pub struct ActorLoss {
    pub loss: f64,
    pub grads: MlpGrads,
    /// Batch mean of `Q_1(s, pi(s)) / lambda`.
    pub q_term_mean: f64,
    /// Batch mean of `w * sum_k (pi_k - a_k)^2`.
    pub bc_term_mean: f64,
    /// Batch mean of the unweighted squared action error.
    pub bc_error_mean: f64,
    pub normalizer: f64,
    pub normalizer_clamped: bool,
}

pub fn bc_actor_loss(actor: &Mlp, critic: &TwinCritic, batch: &Batch, weight: f64) -> Result<ActorLoss> {
    if batch.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    if !(weight >= 0.0 && weight.is_finite()) {
        return Err(Error::Argument(format!("behaviour-cloning weight must be >= 0, got {weight}")));
    }
    let n = batch.len();
    let nf = n as f64;
    let action_dim = batch.actions.ncols();

    let data_sa = state_action(batch.states.view(), batch.actions.view())?;
    let data_q = critic.q1.forward_batch(data_sa.view())?;
    let raw_normalizer = data_q.iter().map(|q| q.abs()).sum::<f64>() / nf;
    let normalizer_clamped = raw_normalizer < MIN_Q_NORMALIZER;
    if normalizer_clamped {
        log::debug!("Q normaliser {raw_normalizer:e} clamped to {MIN_Q_NORMALIZER:e}");
    }
    let normalizer = raw_normalizer.max(MIN_Q_NORMALIZER);

    let actor_cache = actor.forward_cached(batch.states.view())?;
    let pi = actor_cache.output();
    let pi_sa = state_action(batch.states.view(), pi.view())?;
    let q_cache = critic.q1.forward_cached(pi_sa.view())?;

    let q_term_mean = q_cache.output().iter().sum::<f64>() / normalizer / nf;
    let diff = pi - &batch.actions;
    let sq_err = diff.mapv(|d| d * d).sum_axis(Axis(1));
    let bc_error_mean = sq_err.sum() / nf;
    let bc_term_mean = weight * bc_error_mean;
    let loss = -(q_term_mean - bc_term_mean);

    let dq = Array2::from_elem((n, 1), -1.0 / (normalizer * nf));
    let d_input = critic.q1.input_grad_batch(&q_cache, dq.view())?;
    let state_dim = d_input.ncols() - action_dim;
    let mut d_pi = d_input.slice(s![.., state_dim..]).to_owned();
    d_pi.zip_mut_with(&diff, |g, &d| *g += 2.0 * weight * d / nf);
    let (grads, _) = actor.backward_batch(&actor_cache, d_pi.view())?;

    Ok(ActorLoss {
        loss,
        grads,
        q_term_mean,
        bc_term_mean,
        bc_error_mean,
        normalizer,
        normalizer_clamped,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: Option<f64>,
    pub q_term_mean: Option<f64>,
    pub bc_term_mean: Option<f64>,
}

/// Actor, twin critic, their targets and optimiser state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Td3Learner {
    pub config: Td3Config,
    pub actor: Mlp,
    pub actor_target: Mlp,
    pub critic: TwinCritic,
    actor_adam: AdamState,
    q1_adam: AdamState,
    q2_adam: AdamState,
    pub critic_updates: u64,
    pub actor_updates: u64,
}

impl Td3Learner {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        config: Td3Config,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let actor = actor_network(state_dim, action_dim, &config.hidden, rng)?;
        let critic = TwinCritic::new(state_dim, action_dim, &config.hidden, rng)?;
        Self::from_networks(actor, critic, config)
    }

    pub fn from_networks(actor: Mlp, critic: TwinCritic, config: Td3Config) -> Result<Self> {
        ensure_len(
            "critic input",
            actor.input_dim() + actor.output_dim(),
            critic.input_dim(),
        )?;
        let adam = config.adam();
        Ok(Td3Learner {
            actor_adam: AdamState::new(&actor, adam)?,
            q1_adam: AdamState::new(&critic.q1, adam)?,
            q2_adam: AdamState::new(&critic.q2, adam)?,
            actor_target: actor.clone(),
            actor,
            critic,
            config,
            critic_updates: 0,
            actor_updates: 0,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.actor.output_dim()
    }

    pub fn act(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.actor.forward(state)
    }

    /// Copies every network from `other` and resets optimiser state.
    pub fn load_networks_from(&mut self, other: &Td3Learner) -> Result<()> {
        self.actor.copy_from(&other.actor)?;
        self.actor_target.copy_from(&other.actor_target)?;
        self.critic.copy_from(&other.critic)?;
        self.reset_optimizers();
        Ok(())
    }

    pub fn reset_optimizers(&mut self) {
        self.actor_adam.reset();
        self.q1_adam.reset();
        self.q2_adam.reset();
        self.critic_updates = 0;
        self.actor_updates = 0;
    }

    /// One critic step; every `policy_update_frequency` critic steps also an
    /// actor step followed by Polyak updates of all targets.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        batch: &Batch,
        bc_weight: f64,
        rng: &mut R,
    ) -> Result<UpdateStats> {
        let cfg = &self.config;
        let targets = td_target(
            &self.critic,
            &self.actor_target,
            batch,
            cfg.gamma,
            cfg.policy_noise,
            rng,
        )?;
        let c = critic_loss(&self.critic, batch, &targets)?;
        if !(c.q1_grads.is_finite() && c.q2_grads.is_finite()) {
            return Err(Error::Numeric("non-finite critic gradient".into()));
        }
        self.q1_adam.step(&mut self.critic.q1, &c.q1_grads)?;
        self.q2_adam.step(&mut self.critic.q2, &c.q2_grads)?;
        self.critic_updates += 1;

        let mut stats = UpdateStats {
            critic_loss: c.loss,
            ..UpdateStats::default()
        };
        if self.critic_updates % self.config.policy_update_frequency as u64 == 0 {
            let a = bc_actor_loss(&self.actor, &self.critic, batch, bc_weight)?;
            self.actor_adam.step(&mut self.actor, &a.grads)?;
            self.actor_updates += 1;
            let tau = self.config.tau;
            soft_update(&mut self.actor_target, &self.actor, tau)?;
            self.critic.soft_update_targets(tau)?;
            stats.actor_loss = Some(a.loss);
            stats.q_term_mean = Some(a.q_term_mean);
            stats.bc_term_mean = Some(a.bc_term_mean);
        }
        Ok(stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Single-layer network whose output is the constant `c`.
    fn constant_net(input: usize, c: f64) -> Mlp {
        Mlp::from_parts(
            vec![Array2::zeros((1, input))],
            vec![array![c]],
            OutputActivation::Linear,
        )
        .unwrap()
    }

    fn constant_critic(input: usize, c1: f64, c2: f64) -> TwinCritic {
        TwinCritic::from_networks(
            constant_net(input, c1),
            constant_net(input, c2),
            constant_net(input, c1),
            constant_net(input, c2),
        )
        .unwrap()
    }

    fn batch(rewards: &[f64], dones: &[bool]) -> Batch {
        let ts: Vec<Transition> = rewards
            .iter()
            .zip(dones)
            .map(|(&r, &d)| Transition {
                state: vec![0.1, -0.2],
                action: vec![0.3],
                reward: r,
                next_state: vec![0.4, 0.5],
                done: d,
                morphology: vec![],
            })
            .collect();
        let refs: Vec<&Transition> = ts.iter().collect();
        Batch::from_transitions(&refs).unwrap()
    }

    fn actor() -> Mlp {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        actor_network(2, 1, &[8], &mut rng).unwrap()
    }

    #[test]
    fn myopic_target_is_reward() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = batch(&[1.0, -2.0, 0.5], &[false; 3]);
        let critic = constant_critic(3, 10.0, 20.0);
        let y = td_target(&critic, &actor(), &b, 0.0, SmoothingNoise::default(), &mut rng).unwrap();
        assert_eq!(y.to_vec(), vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn terminal_cuts_bootstrap() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = batch(&[1.0, 1.0], &[true, false]);
        let critic = constant_critic(3, 2.0, 5.0);
        let y = td_target(&critic, &actor(), &b, 0.99, SmoothingNoise::default(), &mut rng).unwrap();
        assert_eq!(y[0], 1.0);
        assert!((y[1] - 2.98).abs() < 1e-12);
    }

    #[test]
    fn min_target_is_symmetric_in_critics() {
        let b = batch(&[0.7], &[false]);
        let y_a = td_target(
            &constant_critic(3, 2.0, 5.0),
            &actor(),
            &b,
            0.9,
            SmoothingNoise::default(),
            &mut ChaCha8Rng::seed_from_u64(4),
        )
        .unwrap();
        let y_b = td_target(
            &constant_critic(3, 5.0, 2.0),
            &actor(),
            &b,
            0.9,
            SmoothingNoise::default(),
            &mut ChaCha8Rng::seed_from_u64(4),
        )
        .unwrap();
        assert_eq!(y_a, y_b);
    }

    #[test]
    fn perfect_fit_has_zero_loss() {
        let b = batch(&[3.0, 3.0], &[false; 2]);
        let critic = constant_critic(3, 3.0, 3.0);
        let c = critic_loss(&critic, &b, &array![3.0, 3.0]).unwrap();
        assert_eq!(c.loss, 0.0);
        assert_eq!(c.q1_grads.max_abs(), 0.0);
        assert_eq!(c.q2_grads.max_abs(), 0.0);
    }

    #[test]
    fn single_sample_loss_sums_half_squares_over_critics() {
        let b = batch(&[0.0], &[false]);
        let critic = constant_critic(3, 0.0, 0.0);
        let c = critic_loss(&critic, &b, &array![2.0]).unwrap();
        assert_eq!(c.loss, 4.0);
        let c2 = critic_loss(&critic, &b, &array![4.0]).unwrap();
        assert_eq!(c2.loss, 4.0 * c.loss);
    }

    #[test]
    fn normaliser_is_mean_absolute_q() {
        // Q1(s, a) = 3 * a_0 - ... chosen so the dataset actions give |Q| = {2, 4}.
        let q1 = Mlp::from_parts(
            vec![array![[0.0, 0.0, 1.0]]],
            vec![array![0.0]],
            OutputActivation::Linear,
        )
        .unwrap();
        let critic = TwinCritic::from_networks(q1.clone(), q1.clone(), q1.clone(), q1).unwrap();
        let ts = [
            Transition {
                state: vec![0.0, 0.0],
                action: vec![2.0 / 4.0],
                reward: 0.0,
                next_state: vec![0.0, 0.0],
                done: false,
                morphology: vec![],
            },
            Transition {
                state: vec![0.0, 0.0],
                action: vec![-4.0 / 4.0],
                reward: 0.0,
                next_state: vec![0.0, 0.0],
                done: false,
                morphology: vec![],
            },
        ];
        // Scale the critic so |Q| = {2, 4}.
        let mut critic = critic;
        critic.q1.weights_mut()[0][[0, 2]] = 4.0;
        let refs: Vec<&Transition> = ts.iter().collect();
        let b = Batch::from_transitions(&refs).unwrap();
        let a = bc_actor_loss(&actor(), &critic, &b, 0.0).unwrap();
        assert_eq!(a.normalizer, 3.0);
        assert_eq!(a.bc_term_mean, 0.0);
        assert!(!a.normalizer_clamped);
    }

    #[test]
    fn cloning_term_vanishes_on_dataset_actions() {
        let pi = actor();
        let mut ts = Vec::new();
        for s in [[0.1, 0.2], [-0.3, 0.4]] {
            let a = pi.forward(&s).unwrap();
            ts.push(Transition {
                state: s.to_vec(),
                action: a,
                reward: 0.0,
                next_state: s.to_vec(),
                done: false,
                morphology: vec![],
            });
        }
        let refs: Vec<&Transition> = ts.iter().collect();
        let b = Batch::from_transitions(&refs).unwrap();
        let a = bc_actor_loss(&pi, &constant_critic(3, 1.0, 1.0), &b, 5.0).unwrap();
        assert_eq!(a.bc_error_mean, 0.0);
        assert_eq!(a.bc_term_mean, 0.0);
    }

    #[test]
    fn zero_critic_normaliser_is_clamped() {
        let b = batch(&[0.0], &[false]);
        let a = bc_actor_loss(&actor(), &constant_critic(3, 0.0, 0.0), &b, 1.0).unwrap();
        assert!(a.normalizer_clamped);
        assert_eq!(a.normalizer, MIN_Q_NORMALIZER);
    }

    #[test]
    fn policy_frequency_gates_actor_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let config = Td3Config {
            hidden: vec![8],
            policy_update_frequency: 2,
            ..Td3Config::default()
        };
        let mut learner = Td3Learner::new(2, 1, config, &mut rng).unwrap();
        let b = batch(&[1.0, 0.0, 0.5], &[false; 3]);
        for _ in 0..10 {
            learner.update(&b, 0.4, &mut rng).unwrap();
        }
        assert_eq!(learner.critic_updates, 10);
        assert_eq!(learner.actor_updates, 5);
    }
}
