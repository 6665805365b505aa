mod common;

use codesign::offline::PopulationAgent;
use codesign::online::{
    beta_delta, BetaController, BetaMode, BetaSettings, ExplorationPolicy, IndividualAgent,
};
use codesign::replay::Transition;
use codesign::td3::{Batch, Td3Config, Td3Learner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::cloning_error;

#[test]
fn hand_evaluated_controller_step() {
    let delta = beta_delta(3e-5, 8e-5, 1000.0, 200.0, 100.0);
    assert_eq!(delta, -0.019);
    // rising returns contribute no derivative term
    assert_eq!(beta_delta(3e-5, 8e-5, 1000.0, 100.0, 200.0), 3e-5 * -800.0);
}

#[test]
fn beta_stays_clamped_and_replays_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10_000 {
        let settings = BetaSettings {
            initial: rng.random_range(0.0..=1.0),
            kp: 10f64.powf(rng.random_range(-6.0..-1.0)),
            kd: 10f64.powf(rng.random_range(-6.0..-1.0)),
            ..BetaSettings::default()
        };
        let target = rng.random_range(-500.0..1500.0);
        let mut ctl = BetaController::new(settings, target).unwrap();
        let mut beta = settings.initial;
        let mut last: Option<f64> = None;
        for _ in 0..rng.random_range(1..40) {
            let r = rng.random_range(-2000.0..2000.0);
            let prev = last.unwrap_or(r);
            let expected = beta_delta(settings.kp, settings.kd, target, prev, r);
            let delta = ctl.observe_return(r);
            assert_eq!(delta, expected);
            beta = (beta + expected).clamp(0.0, 1.0);
            assert_eq!(ctl.beta(), beta);
            assert!((0.0..=1.0).contains(&ctl.beta()));
            last = Some(r);
        }
    }
}

#[test]
fn fixed_controller_ignores_returns() {
    let settings = BetaSettings {
        mode: BetaMode::Fixed,
        ..BetaSettings::default()
    };
    let mut ctl = BetaController::new(settings, 1000.0).unwrap();
    for r in [0.0, 5000.0, -5000.0, 1000.0] {
        ctl.observe_return(r);
        assert_eq!(ctl.beta(), 0.4);
    }
}

#[test]
fn strong_cloning_recovers_the_behaviour_policy() {
    let err = cloning_error(1);
    assert!(err <= 0.05, "held-out L-inf error {err}");
}

#[test]
fn critic_fits_a_single_terminal_transition() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let config = Td3Config {
        hidden: vec![16, 16],
        learning_rate: 1e-3,
        batch_size: 1,
        ..Td3Config::default()
    };
    let mut learner = Td3Learner::new(3, 2, config, &mut rng).unwrap();
    let t = Transition {
        state: vec![0.2, -0.4, 0.9],
        action: vec![0.5, -0.5],
        reward: 1.7,
        next_state: vec![0.0, 0.0, 0.0],
        done: true,
        morphology: vec![],
    };
    let batch = Batch::from_transitions(&[&t]).unwrap();
    for _ in 0..3000 {
        learner.update(&batch, 0.0, &mut rng).unwrap();
    }
    let mut sa = t.state.clone();
    sa.extend_from_slice(&t.action);
    for q in [&learner.critic.q1, &learner.critic.q2] {
        let v = q.forward(&sa).unwrap()[0];
        assert!((v - 1.7).abs() < 1e-3, "Q = {v}");
    }
}

#[test]
fn warm_start_copies_population_policy() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let population = PopulationAgent::new(5, 2, Td3Config::default(), 0.4, &mut rng).unwrap();
    let beta = BetaController::new(BetaSettings::default(), 10.0).unwrap();
    let exploration = ExplorationPolicy::new(0.1, 2).unwrap();
    let mut individual = IndividualAgent::new(5, 2, Td3Config::default(), beta, exploration, &mut rng).unwrap();
    let s = [0.1, 0.2, -0.3, 0.4, 1.0];
    assert_ne!(individual.learner.act(&s).unwrap(), population.act(&s).unwrap());
    individual.warm_start(&population).unwrap();
    assert_eq!(individual.learner.act(&s).unwrap(), population.act(&s).unwrap());
    assert_eq!(individual.learner.critic, population.learner.critic);
}
