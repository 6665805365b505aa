use std::fs;
use std::path::Path;

use codesign::bo::AcquisitionSettings;
use codesign::config::{AblationMode, ExperimentConfig};
use codesign::harness::{
    emit_reports, resume_codesign, run_codesign, Run, RunLog, RunOptions, EPISODE_HEADER, ITERATION_HEADER,
};
use codesign::online::{BetaController, BetaMode};
use codesign::td3::Td3Config;

fn tiny(mode: AblationMode) -> ExperimentConfig {
    let mut c = ExperimentConfig::desk();
    c.mode = mode;
    c.seed = 7;
    c.env_options.episode_length = Some(20);
    c.iterations = 3;
    c.episodes_per_iteration = 3;
    c.updates_per_episode = Some(5);
    c.warmup_steps = 30;
    c.td3 = Td3Config {
        hidden: vec![16, 16],
        batch_size: 32,
        ..Td3Config::default()
    };
    c.capacities.individual = 1000;
    c.capacities.population = 5000;
    c.capacities.initial = 1000;
    c.bo.steps = 3;
    c.bo.random_probes = 3;
    c.bo.acquisition = AcquisitionSettings {
        seeds: 64,
        polish_starts: 2,
        polish_sweeps: 5,
        ..AcquisitionSettings::default()
    };
    c.surrogate_samples = 8;
    c
}

fn quiet() -> RunOptions {
    RunOptions::default()
}

fn written(dir: &Path, checkpoints: bool) -> RunOptions {
    RunOptions {
        out_dir: Some(dir.to_path_buf()),
        checkpoints,
        record_cpg: true,
        ..RunOptions::default()
    }
}

/// Every file under `dir` as (relative path, bytes), sorted by path.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn identical_seeds_write_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_codesign(tiny(AblationMode::Full), &written(a.path(), true)).unwrap();
    run_codesign(tiny(AblationMode::Full), &written(b.path(), true)).unwrap();
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    assert!(sa.len() > 10);
    assert_eq!(sa, sb);

    let mut other = tiny(AblationMode::Full);
    other.seed = 8;
    let log = run_codesign(other, &quiet()).unwrap();
    let first = run_codesign(tiny(AblationMode::Full), &quiet()).unwrap();
    assert_ne!(log.episodes, first.episodes);
}

#[test]
fn buffers_follow_their_lifecycle() {
    let log = run_codesign(tiny(AblationMode::Full), &quiet()).unwrap();
    let instr = &log.instrumentation;
    let per_iteration = 3 * 20;
    assert_eq!(instr.d_ind_after_clear, vec![0; 3]);
    assert_eq!(instr.d_ind_before_clear, vec![0, per_iteration, per_iteration]);
    assert_eq!(instr.d_init_pushes, vec![1; 9]);
    for pair in log.episodes.windows(2) {
        assert!(pair[1].d_pop >= pair[0].d_pop);
    }
    for (i, row) in log.episodes.iter().enumerate() {
        assert_eq!(row.d_ind, (row.episode + 1) * 20);
        assert_eq!(row.d_pop, (i + 1) * 20);
        assert_eq!(row.d_init, i + 1);
    }
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let full_dir = tempfile::tempdir().unwrap();
    let full = run_codesign(tiny(AblationMode::Full), &written(full_dir.path(), true)).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let options = RunOptions {
        stop_after: Some(1),
        ..written(dir.path(), true)
    };
    let partial = run_codesign(tiny(AblationMode::Full), &options).unwrap();
    assert_eq!(partial.iterations.len(), 1);
    let resumed = resume_codesign(&dir.path().join("checkpoints/iter_000"), &written(dir.path(), true)).unwrap();
    assert_eq!(resumed, full);
    assert_eq!(snapshot(dir.path()), snapshot(full_dir.path()));
}

#[test]
fn resume_works_for_every_mode() {
    for mode in [AblationMode::SingleNetwork, AblationMode::NoCopy, AblationMode::RandomSampling] {
        let mut config = tiny(mode);
        config.iterations = 2;
        let full = run_codesign(config.clone(), &quiet()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let options = RunOptions {
            stop_after: Some(1),
            ..written(dir.path(), true)
        };
        run_codesign(config, &options).unwrap();
        let resumed = resume_codesign(&dir.path().join("checkpoints/iter_000"), &quiet()).unwrap();
        assert_eq!(resumed.episodes, full.episodes, "{mode}");
        assert_eq!(resumed.iterations, full.iterations, "{mode}");
    }
}

#[test]
fn single_iteration_without_acquisition_returns_the_probe() {
    let mut config = tiny(AblationMode::Full);
    config.iterations = 1;
    config.bo.steps = 0;
    config.bo.random_probes = 1;
    let log = run_codesign(config, &quiet()).unwrap();
    assert_eq!(log.bo_trace.len(), 1);
    assert_eq!(log.final_morphology().unwrap(), log.bo_trace[0].1.morphology.as_slice());
}

#[test]
fn single_network_allocates_one_agent() {
    let log = run_codesign(tiny(AblationMode::SingleNetwork), &quiet()).unwrap();
    let instr = &log.instrumentation;
    assert_eq!(instr.individual_agents_allocated + instr.population_agents_allocated, 1);
    assert!(log.episodes.iter().all(|r| r.population_critic_loss.is_none()));
}

#[test]
fn fixed_and_direct_modes_pin_beta() {
    let log = run_codesign(tiny(AblationMode::FixedTerm), &quiet()).unwrap();
    assert!(log.episodes.iter().all(|r| r.beta == 0.4));
    let log = run_codesign(tiny(AblationMode::DirectCopy), &quiet()).unwrap();
    assert!(log.episodes.iter().all(|r| r.beta == 0.0));
}

/// Replays the controller over the logged returns of each iteration.
fn replay_beta(config: &ExperimentConfig, log: &RunLog) {
    let target = config.env_spec().unwrap().return_target;
    let settings = config.mode.beta_settings(config.beta);
    assert_eq!(settings.mode, BetaMode::Adaptive);
    for k in 0..log.iterations.len() {
        let mut ctl = BetaController::new(settings, target).unwrap();
        for row in log.episodes_of(k) {
            ctl.observe_return(row.episode_return);
            assert_eq!(ctl.beta(), row.beta, "iteration {k} episode {}", row.episode);
        }
    }
}

#[test]
fn adaptive_beta_log_is_self_consistent() {
    for mode in [AblationMode::Full, AblationMode::AdaptiveTerm, AblationMode::NoCopy] {
        let mut config = tiny(mode);
        config.episodes_per_iteration = 6;
        config.env_options.return_target = Some(2.0);
        let log = run_codesign(config.clone(), &quiet()).unwrap();
        assert!(log.episodes.iter().any(|r| r.beta != config.beta.initial), "{mode}: beta never moved");
        replay_beta(&config, &log);
    }
}

#[test]
fn random_sampling_draws_fresh_morphologies() {
    let mut config = tiny(AblationMode::RandomSampling);
    config.iterations = 4;
    let log = run_codesign(config.clone(), &quiet()).unwrap();
    assert!(log.bo_trace.is_empty());
    let spec = config.env_spec().unwrap();
    let xis: Vec<&Vec<f64>> = log.iterations.iter().map(|r| &r.morphology).collect();
    for (i, xi) in xis.iter().enumerate() {
        assert!(spec.morphology_bounds.contains(xi));
        assert!(xis[..i].iter().all(|other| other != xi));
    }
    assert_ne!(xis[0], &spec.morphology_bounds.midpoint());
}

#[test]
fn reports_have_one_row_per_record() {
    let dir = tempfile::tempdir().unwrap();
    let empty = RunLog::new(0, AblationMode::Full);
    emit_reports(&empty, dir.path()).unwrap();
    let lines = |name: &str| fs::read_to_string(dir.path().join(name)).unwrap().lines().count();
    for name in ["episodes.csv", "iterations.csv", "bo_trace.csv", "cpg_trajectory.csv"] {
        assert_eq!(lines(name), 1, "{name}");
    }

    let mut config = tiny(AblationMode::Full);
    config.iterations = 1;
    config.episodes_per_iteration = 1;
    let log = run_codesign(config, &written(dir.path(), false)).unwrap();
    let episodes = fs::read_to_string(dir.path().join("episodes.csv")).unwrap();
    assert_eq!(episodes.lines().next().unwrap(), EPISODE_HEADER);
    assert_eq!(episodes.lines().count(), 2);
    let iterations = fs::read_to_string(dir.path().join("iterations.csv")).unwrap();
    assert_eq!(iterations.lines().next().unwrap(), ITERATION_HEADER);
    assert_eq!(iterations.lines().count(), 1 + log.iterations.len());
    assert_eq!(lines("bo_trace.csv"), 1 + log.bo_trace.len());
    assert_eq!(lines("cpg_trajectory.csv"), 1 + 21);
    let back: RunLog = serde_json::from_slice(&fs::read(dir.path().join("run_log.json")).unwrap()).unwrap();
    assert_eq!(back, log);
}

#[test]
fn stepping_a_run_matches_run_to_end() {
    let mut run = Run::new(tiny(AblationMode::Full)).unwrap();
    while !run.is_finished() {
        run.run_iteration(&quiet()).unwrap();
    }
    let stepped = run.log().clone();
    assert_eq!(stepped, run_codesign(tiny(AblationMode::Full), &quiet()).unwrap());
}
