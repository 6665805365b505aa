//! GP-UCB Bayesian optimisation over a morphology box.
//!
//! The GP works in unit-cube coordinates; proposals and the trace are
//! reported in the original units. A round first spends `random_probes`
//! uniform evaluations, then `steps` acquisition steps, refitting after every
//! evaluation.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::Bounds;
use crate::error::{Error, Result};
use crate::gp::GpModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionSettings {
    pub seeds: usize,
    pub polish_starts: usize,
    pub polish_sweeps: usize,
    /// Initial coordinate step in unit-cube coordinates.
    pub initial_step: f64,
    pub min_step: f64,
}

impl Default for AcquisitionSettings {
    fn default() -> Self {
        AcquisitionSettings {
            seeds: 1024,
            polish_starts: 16,
            polish_sweeps: 50,
            initial_step: 0.1,
            min_step: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoConfig {
    pub steps: usize,
    pub random_probes: usize,
    pub kappa: f64,
    pub lengthscale: f64,
    /// Noise variance as a fraction of the (standardised) signal variance.
    pub noise_ratio: f64,
    pub refit_hyperparameters: bool,
    pub acquisition: AcquisitionSettings,
}

impl Default for BoConfig {
    fn default() -> Self {
        BoConfig {
            steps: 30,
            random_probes: 30,
            kappa: 2.0,
            lengthscale: 0.2,
            noise_ratio: 1e-4,
            refit_hyperparameters: false,
            acquisition: AcquisitionSettings::default(),
        }
    }
}

impl BoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa >= 0.0) || !(self.lengthscale > 0.0) || !(self.noise_ratio >= 0.0) {
            return Err(Error::Config("invalid BO kappa, lengthscale or noise".into()));
        }
        let a = &self.acquisition;
        if a.seeds == 0 || a.polish_starts == 0 || !(a.initial_step > 0.0) {
            return Err(Error::Config("acquisition needs seeds, starts and a positive step".into()));
        }
        Ok(())
    }

    pub fn model(&self, dim: usize) -> Result<GpModel> {
        GpModel::standardized(dim, self.lengthscale, self.noise_ratio)
    }
}

pub fn ucb(model: &GpModel, x: &[f64], kappa: f64) -> f64 {
    let (mean, var) = model.posterior(x);
    mean + kappa.sqrt() * var.sqrt()
}

/// Maximises the UCB score over the unit cube: uniform seeds, then
/// coordinate ascent with step halving from the best few. Ties keep the
/// earliest candidate.
pub fn ucb_acquire<R: Rng + ?Sized>(
    model: &GpModel,
    kappa: f64,
    settings: &AcquisitionSettings,
    rng: &mut R,
) -> Vec<f64> {
    let dim = model.dim();
    let mut seeds: Vec<(f64, Vec<f64>)> = (0..settings.seeds)
        .map(|_| {
            let x: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
            (ucb(model, &x, kappa), x)
        })
        .collect();
    // Stable sort keeps index order among equal scores.
    seeds.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best: Option<(f64, Vec<f64>)> = None;
    for (score, x) in seeds.into_iter().take(settings.polish_starts) {
        let polished = coordinate_ascent(model, kappa, settings, x, score);
        if best.as_ref().is_none_or(|(b, _)| polished.0 > *b) {
            best = Some(polished);
        }
    }
    best.expect("at least one seed").1
}

fn coordinate_ascent(
    model: &GpModel,
    kappa: f64,
    settings: &AcquisitionSettings,
    mut x: Vec<f64>,
    mut score: f64,
) -> (f64, Vec<f64>) {
    let mut step = settings.initial_step;
    for _ in 0..settings.polish_sweeps {
        let mut improved = false;
        for d in 0..x.len() {
            for dir in [1.0, -1.0] {
                let mut cand = x.clone();
                cand[d] = (cand[d] + dir * step).clamp(0.0, 1.0);
                if cand[d] == x[d] {
                    continue;
                }
                let s = ucb(model, &cand, kappa);
                if s > score {
                    score = s;
                    x = cand;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
            if step < settings.min_step {
                break;
            }
        }
    }
    (score, x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalKind {
    Probe,
    Ucb,
}

impl ProposalKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProposalKind::Probe => "probe",
            ProposalKind::Ucb => "ucb",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub morphology: Vec<f64>,
    pub fitness: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoTraceRow {
    pub step: usize,
    pub kind: ProposalKind,
    pub morphology: Vec<f64>,
    pub fitness: f64,
    /// Posterior at the proposal before it was evaluated.
    pub mean: f64,
    pub variance: f64,
    pub best: f64,
}

/// Observations gathered by one optimiser instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoState {
    pub bounds: Bounds,
    pub observations: Vec<Observation>,
    pub probes: usize,
    pub kappa: f64,
    /// Acquisition steps completed.
    pub step: usize,
}

impl BoState {
    pub fn new(bounds: Bounds, kappa: f64) -> Self {
        BoState {
            bounds,
            observations: Vec::new(),
            probes: 0,
            kappa,
            step: 0,
        }
    }

    pub fn best(&self) -> Option<&Observation> {
        self.observations
            .iter()
            .fold(None, |acc: Option<&Observation>, o| match acc {
                Some(b) if b.fitness >= o.fitness => Some(b),
                _ => Some(o),
            })
    }

    pub fn fit_model(&self, config: &BoConfig) -> Result<GpModel> {
        let mut model = config.model(self.bounds.dim())?;
        if self.observations.is_empty() {
            return Ok(model);
        }
        let xs = self
            .observations
            .iter()
            .map(|o| self.bounds.normalize(&o.morphology))
            .collect();
        let ys = self.observations.iter().map(|o| o.fitness).collect();
        model.fit(xs, ys)?;
        if config.refit_hyperparameters {
            model.refit_hyperparameters()?;
        }
        Ok(model)
    }

    fn record(&mut self, kind: ProposalKind, x: Vec<f64>, fitness: f64, prior: (f64, f64), trace: &mut Vec<BoTraceRow>) {
        match kind {
            ProposalKind::Probe => self.probes += 1,
            ProposalKind::Ucb => self.step += 1,
        }
        self.observations.push(Observation {
            morphology: x.clone(),
            fitness,
        });
        let best = self.best().map_or(fitness, |b| b.fitness);
        trace.push(BoTraceRow {
            step: self.observations.len() - 1,
            kind,
            morphology: x,
            fitness,
            mean: prior.0,
            variance: prior.1,
            best,
        });
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoOutcome {
    pub best: Observation,
    pub trace: Vec<BoTraceRow>,
}

/// Runs probes then acquisition steps, appending to `state`. If the
/// evaluator fails the error is returned and `state` keeps every completed
/// evaluation.
pub fn bo_round<R, F>(state: &mut BoState, config: &BoConfig, mut evaluator: F, rng: &mut R) -> Result<BoOutcome>
where
    R: Rng + ?Sized,
    F: FnMut(&[f64]) -> Result<f64>,
{
    config.validate()?;
    let mut trace = Vec::new();
    let mut model = state.fit_model(config)?;
    for _ in 0..config.random_probes {
        let x = state.bounds.sample(rng);
        let prior = model.posterior(&state.bounds.normalize(&x));
        let y = evaluate(&mut evaluator, &x)?;
        state.record(ProposalKind::Probe, x, y, prior, &mut trace);
        model = state.fit_model(config)?;
    }
    for _ in 0..config.steps {
        let u = ucb_acquire(&model, state.kappa, &config.acquisition, rng);
        let x = state.bounds.denormalize(&u);
        let prior = model.posterior(&u);
        let y = evaluate(&mut evaluator, &x)?;
        state.record(ProposalKind::Ucb, x, y, prior, &mut trace);
        model = state.fit_model(config)?;
    }
    let best = state
        .best()
        .cloned()
        .ok_or_else(|| Error::State("BO round finished without any evaluation".into()))?;
    Ok(BoOutcome { best, trace })
}

fn evaluate<F: FnMut(&[f64]) -> Result<f64>>(evaluator: &mut F, x: &[f64]) -> Result<f64> {
    let y = evaluator(x)?;
    if !y.is_finite() {
        return Err(Error::Numeric(format!("fitness at {x:?} is not finite")));
    }
    Ok(y)
}

pub const BO_TRACE_HEADER: &str = "seed,iteration,step,kind,morphology,fitness,mean,variance,best";

/// Writes trace rows tagged with seed and iteration. Morphology vectors are
/// `;`-separated inside one column.
pub fn write_trace_csv<W: Write>(w: &mut W, seed: u64, iteration: usize, rows: &[BoTraceRow]) -> Result<()> {
    for r in rows {
        writeln!(
            w,
            "{seed},{iteration},{},{},{},{},{},{},{}",
            r.step,
            r.kind.as_str(),
            join(&r.morphology),
            r.fitness,
            r.mean,
            r.variance,
            r.best
        )?;
    }
    Ok(())
}

pub(crate) fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

/// Test objectives with known optima.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchFunction {
    /// `1 - |x - (1.2, 0.8)|^2` on `[0.5, 1.5]^2`.
    Quadratic,
    /// `-(x - 0.3)^2` on `[0, 1]`.
    Quadratic1d,
    /// Two Gaussian bumps on `[0, 1]^2`, the taller at `(0.75, 0.25)`.
    Bumps,
}

impl BenchFunction {
    pub const NAMES: [&'static str; 3] = ["quadratic", "quadratic-1d", "bumps"];

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "quadratic" => Ok(BenchFunction::Quadratic),
            "quadratic-1d" => Ok(BenchFunction::Quadratic1d),
            "bumps" => Ok(BenchFunction::Bumps),
            other => Err(Error::Argument(format!(
                "unknown benchmark '{other}', expected one of {:?}",
                Self::NAMES
            ))),
        }
    }

    pub fn bounds(&self) -> Bounds {
        match self {
            BenchFunction::Quadratic => Bounds::uniform(2, 0.5, 1.5),
            BenchFunction::Quadratic1d => Bounds::unit(1),
            BenchFunction::Bumps => Bounds::unit(2),
        }
        .expect("static bounds")
    }

    pub fn optimum(&self) -> Vec<f64> {
        match self {
            BenchFunction::Quadratic => vec![1.2, 0.8],
            BenchFunction::Quadratic1d => vec![0.3],
            BenchFunction::Bumps => vec![0.75, 0.25],
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            BenchFunction::Quadratic => 1.0 - (x[0] - 1.2).powi(2) - (x[1] - 0.8).powi(2),
            BenchFunction::Quadratic1d => -(x[0] - 0.3).powi(2),
            BenchFunction::Bumps => {
                let bump = |cx: f64, cy: f64, h: f64| {
                    h * (-((x[0] - cx).powi(2) + (x[1] - cy).powi(2)) / (2.0 * 0.1 * 0.1)).exp()
                };
                bump(0.75, 0.25, 1.0) + bump(0.2, 0.8, 0.6)
            }
        }
    }
}

/// Writes the trace as CSV with header to `path`.
pub fn save_trace(path: &Path, seed: u64, iteration: usize, rows: &[BoTraceRow]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{BO_TRACE_HEADER}")?;
    write_trace_csv(&mut w, seed, iteration, rows)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_kappa_picks_posterior_mean_maximum() {
        let mut model = GpModel::standardized(1, 0.2, 1e-4).unwrap();
        model
            .fit(vec![vec![0.1], vec![0.5], vec![0.9]], vec![0.0, 2.0, 0.5])
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = ucb_acquire(&model, 0.0, &AcquisitionSettings::default(), &mut rng);
        let grid_best = (0..=1000)
            .map(|i| i as f64 / 1000.0)
            .max_by(|a, b| model.posterior(&[*a]).0.total_cmp(&model.posterior(&[*b]).0))
            .unwrap();
        assert!((x[0] - grid_best).abs() < 2e-3, "{} vs {grid_best}", x[0]);
    }

    #[test]
    fn empty_model_acquisition_stays_in_box() {
        let model = GpModel::standardized(3, 0.2, 1e-4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = ucb_acquire(&model, 2.0, &AcquisitionSettings::default(), &mut rng);
        assert!(x.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn probes_only_round_returns_best_probe() {
        let f = BenchFunction::Quadratic;
        let mut state = BoState::new(f.bounds(), 2.0);
        let config = BoConfig {
            steps: 0,
            random_probes: 7,
            ..BoConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = bo_round(&mut state, &config, |x| Ok(f.eval(x)), &mut rng).unwrap();
        let best = state.observations.iter().map(|o| o.fitness).fold(f64::MIN, f64::max);
        assert_eq!(out.best.fitness, best);
        assert_eq!(state.probes, 7);
        assert_eq!(state.step, 0);
    }

    #[test]
    fn constant_evaluator_returns_constant() {
        let mut state = BoState::new(Bounds::unit(2).unwrap(), 2.0);
        let config = BoConfig {
            steps: 3,
            random_probes: 2,
            ..BoConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = bo_round(&mut state, &config, |_| Ok(5.0), &mut rng).unwrap();
        assert_eq!(out.best.fitness, 5.0);
        assert_eq!(out.trace.len(), 5);
    }

    #[test]
    fn evaluator_fault_keeps_completed_steps() {
        let mut state = BoState::new(Bounds::unit(1).unwrap(), 2.0);
        let config = BoConfig {
            steps: 5,
            random_probes: 2,
            ..BoConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut calls = 0;
        let res = bo_round(
            &mut state,
            &config,
            |x| {
                calls += 1;
                if calls == 4 {
                    Err(Error::Env("evaluator down".into()))
                } else {
                    Ok(x[0])
                }
            },
            &mut rng,
        );
        assert!(res.is_err());
        assert_eq!(state.observations.len(), 3);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn best_so_far_is_non_decreasing() {
        let f = BenchFunction::Bumps;
        let mut state = BoState::new(f.bounds(), 2.0);
        let config = BoConfig {
            steps: 10,
            random_probes: 5,
            ..BoConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let out = bo_round(&mut state, &config, |x| Ok(f.eval(x)), &mut rng).unwrap();
        assert!(out.trace.windows(2).all(|w| w[1].best >= w[0].best));
    }
}
