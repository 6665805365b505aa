//! Central pattern generator: a network of coupled phase oscillators with
//! critically damped amplitude and offset dynamics.
//!
//! ```text
//! dphi_i/dt = 2 pi f_i + sum_j mu_ij (phi_j - phi_i - bias_ij)
//! d2r_i/dt2 = a_r^2 (R_i - r_i) - 2 a_r dr_i/dt
//! d2x_i/dt2 = a_x^2 (X_i - x_i) - 2 a_x dx_i/dt
//! theta_i   = x_i + r_i cos(phi_i)
//! ```
//!
//! A gait is selected through per-leg phases `p`, with `bias_ij = p_j - p_i`.
//! Phases are kept unwrapped; [`wrap_angle`] gives the principal value.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};

/// Largest integration step accepted by [`cpg_step`].
pub const MAX_DT: f64 = 2e-3;
pub const DEFAULT_DT: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpgParams {
    pub frequency: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub offset: Vec<f64>,
    pub amplitude_gain: f64,
    pub offset_gain: f64,
    /// `coupling[i][j]` is the weight of oscillator `j` on oscillator `i`.
    pub coupling: Vec<Vec<f64>>,
    pub phase_bias: Vec<Vec<f64>>,
    /// Use the wrapped phase error in the coupling term instead of the raw
    /// difference.
    pub wrapped_coupling: bool,
}

impl CpgParams {
    /// Four oscillators at 10 Hz, amplitude 0.4 rad, offset 0.04 rad, gains 20,
    /// all-to-all coupling 20 and zero phase bias.
    pub fn quadruped() -> Self {
        Self::uniform(4, 10.0, 0.4, 0.04, 20.0, 20.0, 20.0)
    }

    pub fn uniform(
        n: usize,
        frequency: f64,
        amplitude: f64,
        offset: f64,
        amplitude_gain: f64,
        offset_gain: f64,
        coupling: f64,
    ) -> Self {
        let coupling = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { coupling }).collect())
            .collect();
        CpgParams {
            frequency: vec![frequency; n],
            amplitude: vec![amplitude; n],
            offset: vec![offset; n],
            amplitude_gain,
            offset_gain,
            coupling,
            phase_bias: vec![vec![0.0; n]; n],
            wrapped_coupling: false,
        }
    }

    pub fn n_osc(&self) -> usize {
        self.frequency.len()
    }

    pub fn with_gait(mut self, gait: &GaitAction) -> Result<Self> {
        self.set_gait(gait)?;
        Ok(self)
    }

    pub fn set_gait(&mut self, gait: &GaitAction) -> Result<()> {
        ensure_len("gait phases", self.n_osc(), gait.phases.len())?;
        self.phase_bias = phase_bias_from_action(gait);
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_osc();
        if n == 0 {
            return Err(Error::Argument("CPG needs at least one oscillator".into()));
        }
        ensure_len("amplitude", n, self.amplitude.len())?;
        ensure_len("offset", n, self.offset.len())?;
        ensure_len("coupling rows", n, self.coupling.len())?;
        ensure_len("phase bias rows", n, self.phase_bias.len())?;
        for i in 0..n {
            ensure_len("coupling columns", n, self.coupling[i].len())?;
            ensure_len("phase bias columns", n, self.phase_bias[i].len())?;
            if self.coupling[i][i] != 0.0 {
                return Err(Error::Argument("oscillators must not self-couple".into()));
            }
            if self.coupling[i].iter().any(|&m| m < 0.0) {
                return Err(Error::Argument("coupling weights must be non-negative".into()));
            }
        }
        if !(self.amplitude_gain > 0.0 && self.offset_gain > 0.0) {
            return Err(Error::Argument("CPG gains must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpgState {
    pub phase: Vec<f64>,
    pub amp: Vec<f64>,
    pub amp_rate: Vec<f64>,
    pub offset: Vec<f64>,
    pub offset_rate: Vec<f64>,
}

impl CpgState {
    /// Zero phase, amplitude and offset with zero rates.
    pub fn at_rest(n: usize) -> Self {
        CpgState {
            phase: vec![0.0; n],
            amp: vec![0.0; n],
            amp_rate: vec![0.0; n],
            offset: vec![0.0; n],
            offset_rate: vec![0.0; n],
        }
    }

    /// Amplitude and offset already at their set points.
    pub fn settled(params: &CpgParams) -> Self {
        let n = params.n_osc();
        CpgState {
            amp: params.amplitude.clone(),
            offset: params.offset.clone(),
            ..Self::at_rest(n)
        }
    }

    pub fn n_osc(&self) -> usize {
        self.phase.len()
    }

    pub fn wrapped_phase(&self) -> Vec<f64> {
        self.phase.iter().map(|&p| wrap_angle(p)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.flat().iter().all(|v| v.is_finite())
    }

    fn flat(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(5 * self.n_osc());
        for v in [&self.phase, &self.amp, &self.amp_rate, &self.offset, &self.offset_rate] {
            y.extend_from_slice(v);
        }
        y
    }

    fn from_flat(y: &[f64], n: usize) -> Self {
        CpgState {
            phase: y[..n].to_vec(),
            amp: y[n..2 * n].to_vec(),
            amp_rate: y[2 * n..3 * n].to_vec(),
            offset: y[3 * n..4 * n].to_vec(),
            offset_rate: y[4 * n..].to_vec(),
        }
    }
}

/// Per-leg phases in `[-pi, pi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaitAction {
    pub phases: Vec<f64>,
}

impl GaitAction {
    pub fn new(phases: Vec<f64>) -> Result<Self> {
        if phases.iter().any(|p| !(p.abs() <= PI)) {
            return Err(Error::Argument(format!("gait phases must lie in [-pi, pi]: {phases:?}")));
        }
        Ok(GaitAction { phases })
    }

    /// Named four-leg gaits. Leg order: left front, right front, left rear,
    /// right rear.
    pub fn preset(name: &str) -> Result<Self> {
        let phases = match name {
            "pronk" => vec![0.0, 0.0, 0.0, 0.0],
            "trot" => vec![0.0, PI, PI, 0.0],
            "pace" => vec![0.0, PI, 0.0, PI],
            "bound" => vec![0.0, 0.0, PI, PI],
            "walk" => vec![0.0, PI, -PI / 2.0, PI / 2.0],
            other => return Err(Error::Argument(format!("unknown gait preset '{other}'"))),
        };
        Self::new(phases)
    }
}

/// `M[i][j] = p_j - p_i`; skew-symmetric by construction.
pub fn phase_bias_from_action(action: &GaitAction) -> Vec<Vec<f64>> {
    let p = &action.phases;
    p.iter()
        .map(|pi| p.iter().map(|pj| pj - pi).collect())
        .collect()
}

pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

/// Time derivative of the oscillator state.
pub fn cpg_derivative(state: &CpgState, params: &CpgParams) -> CpgState {
    let n = state.n_osc();
    let mut y = state.flat();
    let mut dy = vec![0.0; y.len()];
    derivative_flat(&y, params, n, &mut dy);
    y.copy_from_slice(&dy);
    CpgState::from_flat(&y, n)
}

fn derivative_flat(y: &[f64], params: &CpgParams, n: usize, dy: &mut [f64]) {
    let (phase, rest) = y.split_at(n);
    let (amp, rest) = rest.split_at(n);
    let (amp_rate, rest) = rest.split_at(n);
    let (offset, offset_rate) = rest.split_at(n);
    let ar = params.amplitude_gain;
    let ax = params.offset_gain;
    for i in 0..n {
        let mut coupling = 0.0;
        for j in 0..n {
            let mu = params.coupling[i][j];
            if mu != 0.0 {
                let err = phase[j] - phase[i] - params.phase_bias[i][j];
                let err = if params.wrapped_coupling {
                    wrap_angle(err)
                } else {
                    err
                };
                coupling += mu * err;
            }
        }
        dy[i] = TAU * params.frequency[i] + coupling;
        dy[n + i] = amp_rate[i];
        dy[2 * n + i] = ar * ar * (params.amplitude[i] - amp[i]) - 2.0 * ar * amp_rate[i];
        dy[3 * n + i] = offset_rate[i];
        dy[4 * n + i] = ax * ax * (params.offset[i] - offset[i]) - 2.0 * ax * offset_rate[i];
    }
}

/// Classical fourth-order Runge-Kutta step over a flat state vector.
pub fn rk4_step<F>(y: &mut [f64], dt: f64, mut f: F)
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    f(y, &mut k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * dt * k1[i];
    }
    f(&tmp, &mut k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * dt * k2[i];
    }
    f(&tmp, &mut k3);
    for i in 0..n {
        tmp[i] = y[i] + dt * k3[i];
    }
    f(&tmp, &mut k4);
    for i in 0..n {
        y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// One RK4 step of the coupled oscillator system.
pub fn cpg_step(state: &CpgState, params: &CpgParams, dt: f64) -> Result<CpgState> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(Error::Argument(format!("CPG step must lie in (0, {MAX_DT}], got {dt}")));
    }
    let n = params.n_osc();
    ensure_len("CPG state", n, state.n_osc())?;
    if !state.is_finite() {
        return Err(Error::Numeric("non-finite CPG state".into()));
    }
    let mut y = state.flat();
    rk4_step(&mut y, dt, |y, dy| derivative_flat(y, params, n, dy));
    let next = CpgState::from_flat(&y, n);
    if !next.is_finite() {
        return Err(Error::Numeric("CPG integration diverged".into()));
    }
    Ok(next)
}

/// Joint position commands `x_i + r_i cos(phi_i)`.
pub fn cpg_output(state: &CpgState) -> Vec<f64> {
    (0..state.n_osc())
        .map(|i| state.offset[i] + state.amp[i] * state.phase[i].cos())
        .collect()
}

/// Joint angular velocities implied by the state and its derivative.
pub fn cpg_output_rate(state: &CpgState, derivative: &CpgState) -> Vec<f64> {
    (0..state.n_osc())
        .map(|i| {
            let (s, c) = state.phase[i].sin_cos();
            state.offset_rate[i] + state.amp_rate[i] * c - state.amp[i] * s * derivative.phase[i]
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaitSample {
    pub t: f64,
    pub commands: Vec<f64>,
    pub wrapped_phase: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GaitTrajectory {
    pub samples: Vec<GaitSample>,
    pub final_state: Option<CpgState>,
}

impl GaitTrajectory {
    /// `t,theta_1..theta_n,phi_1..phi_n` with wrapped phases.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.samples.first().map_or(0, |s| s.commands.len());
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("theta_{i}")));
        header.extend((1..=n).map(|i| format!("phi_{i}")));
        writeln!(w, "{}", header.join(","))?;
        for s in &self.samples {
            let mut row = vec![s.t.to_string()];
            row.extend(s.commands.iter().map(f64::to_string));
            row.extend(s.wrapped_phase.iter().map(f64::to_string));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Integrates from rest under a fixed gait and records every
/// `record_every`-th step (including `t = 0`).
pub fn simulate_gait(
    params: &CpgParams,
    action: &GaitAction,
    duration: f64,
    dt: f64,
    record_every: usize,
) -> Result<GaitTrajectory> {
    let params = params.clone().with_gait(action)?;
    params.validate()?;
    simulate_from(&params, CpgState::at_rest(params.n_osc()), duration, dt, record_every)
}

pub fn simulate_from(
    params: &CpgParams,
    mut state: CpgState,
    duration: f64,
    dt: f64,
    record_every: usize,
) -> Result<GaitTrajectory> {
    if !(duration >= 0.0) || record_every == 0 {
        return Err(Error::Argument("invalid simulation duration or stride".into()));
    }
    let steps = (duration / dt).round() as usize;
    let mut samples = Vec::with_capacity(steps / record_every + 1);
    let record = |t: f64, s: &CpgState| GaitSample {
        t,
        commands: cpg_output(s),
        wrapped_phase: s.wrapped_phase(),
    };
    samples.push(record(0.0, &state));
    for k in 1..=steps {
        state = cpg_step(&state, params, dt)?;
        if k % record_every == 0 {
            samples.push(record(k as f64 * dt, &state));
        }
    }
    Ok(GaitTrajectory {
        samples,
        final_state: Some(state),
    })
}

/// Largest wrapped deviation of `phi_j - phi_i` from the commanded bias.
pub fn phase_locking_error(state: &CpgState, bias: &[Vec<f64>]) -> f64 {
    let n = state.n_osc();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let e = wrap_angle(state.phase[j] - state.phase[i] - bias[i][j]);
            worst = worst.max(e.abs());
        }
    }
    worst
}

/// First time after which the locking error stays below `tol`.
pub fn settling_time(params: &CpgParams, action: &GaitAction, tol: f64, horizon: f64, dt: f64) -> Result<Option<f64>> {
    let params = params.clone().with_gait(action)?;
    params.validate()?;
    let mut state = CpgState::at_rest(params.n_osc());
    let steps = (horizon / dt).round() as usize;
    let mut settled_at = None;
    for k in 1..=steps {
        state = cpg_step(&state, &params, dt)?;
        if phase_locking_error(&state, &params.phase_bias) < tol {
            settled_at.get_or_insert(k as f64 * dt);
        } else {
            settled_at = None;
        }
    }
    Ok(settled_at)
}
