//! Itô SDE models `dX = V(X) dt + σ B(X) dW` and their Euler–Maruyama integration.
//!
//! Paths are integrated on the fixed grid `t_k = k·dt`. Gaussian increments come
//! from a [`NoiseStream`] keyed by `(seed, path index)`, so a path is a pure
//! function of `(model, x0, config, index)`. Exit from the basin is detected on
//! the grid; `exit_time` is the first grid time whose state lies outside, optionally
//! refined once by a Brownian-bridge midpoint.
//!
//! Long runs should not store every state. [`integrate`] feeds each accepted state
//! to a [`PathObserver`]; [`Recorder`] is the observer behind [`simulate_path`],
//! and the phase trackers and occupation histograms elsewhere in the crate are
//! observers too.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use core::ops::ControlFlow;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use thiserror::Error;

pub use crate::basin::Basin;
use crate::math::{all_finite, norm};
use crate::rng::NoiseStream;

/// Drift `V` and diffusion `B` of an SDE, evaluated in place.
pub trait VectorField: Send + Sync {
    /// State dimension `d`.
    fn dim(&self) -> usize;
    /// Number of independent Brownian motions (columns of `B`).
    fn noise_dim(&self) -> usize;
    fn drift(&self, x: &[f64], out: &mut [f64]);
    /// Row-major `d × noise_dim` matrix.
    fn diffusion(&self, x: &[f64], out: &mut [f64]);
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("numerical blow-up at t = {time}: state {state:?}")]
    NumericalBlowup {
        time: f64,
        state: Vec<f64>,
        /// Record up to the last finite in-bound state, when one was being kept.
        partial: Option<Box<TrajectoryRecord>>,
    },
    #[error("initial state {0:?} is outside the basin")]
    InvalidStart(Vec<f64>),
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Non-fatal configuration findings.
#[derive(Clone, Debug, PartialEq)]
pub enum ConfigWarning {
    /// `dt > σ²`: the step is coarse relative to the noise scale.
    StepAboveNoiseScale { dt: f64, sigma_squared: f64 },
}

impl fmt::Display for ConfigWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigWarning::StepAboveNoiseScale { dt, sigma_squared } => {
                write!(f, "time step dt = {dt} exceeds sigma^2 = {sigma_squared}; Euler-Maruyama bias may be visible")
            }
        }
    }
}

/// An SDE model together with its basin of attraction.
#[derive(Clone)]
pub struct SdeModel {
    field: Arc<dyn VectorField>,
    basin: Arc<dyn Basin>,
    sigma: f64,
    blowup_bound: f64,
}

impl fmt::Debug for SdeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeModel")
            .field("dim", &self.dim())
            .field("noise_dim", &self.noise_dim())
            .field("sigma", &self.sigma)
            .field("basin", &self.basin.description())
            .finish()
    }
}

pub const DEFAULT_BLOWUP_BOUND: f64 = 1e6;

impl SdeModel {
    pub fn new(field: Arc<dyn VectorField>, basin: Arc<dyn Basin>, sigma: f64) -> Self {
        assert!(sigma >= 0.0 && sigma.is_finite(), "sigma must be finite and >= 0");
        Self { field, basin, sigma, blowup_bound: DEFAULT_BLOWUP_BOUND }
    }

    pub fn with_sigma(&self, sigma: f64) -> Self {
        assert!(sigma >= 0.0 && sigma.is_finite(), "sigma must be finite and >= 0");
        Self { sigma, ..self.clone() }
    }

    pub fn with_basin(&self, basin: Arc<dyn Basin>) -> Self {
        Self { basin, ..self.clone() }
    }

    pub fn with_blowup_bound(&self, bound: f64) -> Self {
        Self { blowup_bound: bound, ..self.clone() }
    }

    /// The `σ = 0` view used for deterministic flows.
    pub fn deterministic(&self) -> Self {
        self.with_sigma(0.0)
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }
    pub fn noise_dim(&self) -> usize {
        self.field.noise_dim()
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn blowup_bound(&self) -> f64 {
        self.blowup_bound
    }
    pub fn field(&self) -> &Arc<dyn VectorField> {
        &self.field
    }
    pub fn basin(&self) -> &Arc<dyn Basin> {
        &self.basin
    }

    pub fn drift_at(&self, x: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.dim()];
        self.field.drift(x, &mut out);
        out
    }

    /// Row-major `d × noise_dim` diffusion matrix `B(x)` (without `σ`).
    pub fn diffusion_at(&self, x: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.dim() * self.noise_dim()];
        self.field.diffusion(x, &mut out);
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    /// Keep every `record_stride`-th grid state.
    pub record_stride: usize,
    pub stop_on_exit: bool,
    /// Refine the exit time once with a Brownian-bridge midpoint.
    pub refine_exit: bool,
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_end: f64, seed: u64) -> Self {
        Self { dt, t_end, seed, record_stride: 1, stop_on_exit: true, refine_exit: false }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn with_stop_on_exit(mut self, stop: bool) -> Self {
        self.stop_on_exit = stop;
        self
    }

    /// Number of grid steps covering `[0, t_end]`.
    pub fn n_steps(&self) -> u64 {
        (self.t_end / self.dt * (1.0 + 1e-12)).floor() as u64
    }

    /// Checks the hard constraints and returns soft warnings for `sigma`.
    pub fn validate(&self, sigma: f64) -> Result<Vec<ConfigWarning>, SimError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::InvalidConfig("dt must be positive and finite"));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(SimError::InvalidConfig("t_end must be positive and finite"));
        }
        if self.dt > self.t_end {
            return Err(SimError::InvalidConfig("dt must not exceed t_end"));
        }
        if self.record_stride == 0 {
            return Err(SimError::InvalidConfig("record_stride must be positive"));
        }
        if self.record_stride as f64 * self.dt > self.t_end * (1.0 + 1e-12) {
            return Err(SimError::InvalidConfig("record_stride * dt must not exceed t_end"));
        }
        let mut warnings = Vec::new();
        if sigma > 0.0 && self.dt > sigma * sigma {
            warnings.push(ConfigWarning::StepAboveNoiseScale { dt: self.dt, sigma_squared: sigma * sigma });
        }
        Ok(warnings)
    }
}

/// A stored path on (a subsample of) the integration grid.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrajectoryRecord {
    pub dim: usize,
    pub times: Vec<f64>,
    /// Flattened states, `dim` values per time.
    pub states: Vec<f64>,
    pub exited: bool,
    pub exit_time: Option<f64>,
    pub seed_used: u64,
    pub stream: u64,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// Number of leading samples recorded strictly before the exit time.
    pub fn valid_len(&self) -> usize {
        match self.exit_time {
            Some(te) => self.times.iter().take_while(|&&t| t < te).count(),
            None => self.len(),
        }
    }
}

/// Receives every accepted grid state of a path.
pub trait PathObserver {
    /// Called for the initial state (`step = 0`) and after every step.
    fn observe(&mut self, step: u64, t: f64, x: &[f64]) -> ControlFlow<()>;

    /// Called once when the path first leaves the basin. `last_inside` is the last
    /// grid state inside the basin.
    fn on_exit(&mut self, _exit_time: f64, _last_step: u64, _last_t: f64, _last_inside: &[f64]) {}
}

impl PathObserver for () {
    fn observe(&mut self, _step: u64, _t: f64, _x: &[f64]) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }
}

impl<A: PathObserver, B: PathObserver> PathObserver for (A, B) {
    fn observe(&mut self, step: u64, t: f64, x: &[f64]) -> ControlFlow<()> {
        let a = self.0.observe(step, t, x);
        let b = self.1.observe(step, t, x);
        if a.is_break() || b.is_break() {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    }
    fn on_exit(&mut self, exit_time: f64, last_step: u64, last_t: f64, last_inside: &[f64]) {
        self.0.on_exit(exit_time, last_step, last_t, last_inside);
        self.1.on_exit(exit_time, last_step, last_t, last_inside);
    }
}

/// Summary of an integrated path.
#[derive(Clone, Debug, PartialEq)]
pub struct PathOutcome {
    pub steps: u64,
    pub final_time: f64,
    pub final_state: Vec<f64>,
    pub exited: bool,
    pub exit_time: Option<f64>,
    pub stopped_by_observer: bool,
}

/// Scratch buffers for allocation-free Euler–Maruyama steps.
pub struct Stepper {
    drift: Vec<f64>,
    diffusion: Vec<f64>,
    noise: Vec<f64>,
}

impl Stepper {
    pub fn new(model: &SdeModel) -> Self {
        Self {
            drift: alloc::vec![0.0; model.dim()],
            diffusion: alloc::vec![0.0; model.dim() * model.noise_dim()],
            noise: alloc::vec![0.0; model.noise_dim()],
        }
    }

    /// `x ← x + V(x) dt + σ B(x) dw`.
    pub fn step(&mut self, model: &SdeModel, x: &mut [f64], dt: f64, dw: &[f64]) {
        let field = model.field();
        field.drift(x, &mut self.drift);
        let sigma = model.sigma();
        if sigma == 0.0 {
            for (xi, vi) in x.iter_mut().zip(&self.drift) {
                *xi += vi * dt;
            }
            return;
        }
        field.diffusion(x, &mut self.diffusion);
        let m = model.noise_dim();
        for (i, xi) in x.iter_mut().enumerate() {
            let row = &self.diffusion[i * m..(i + 1) * m];
            let noise: f64 = row.iter().zip(dw).map(|(b, w)| b * w).sum();
            *xi += self.drift[i] * dt + sigma * noise;
        }
    }

    /// Draws `dw ~ N(0, dt I)` from `stream` and steps.
    pub fn step_random(&mut self, model: &SdeModel, x: &mut [f64], dt: f64, stream: &mut NoiseStream) {
        if model.sigma() == 0.0 {
            self.step(model, x, dt, &[]);
            return;
        }
        let mut noise = core::mem::take(&mut self.noise);
        stream.fill_gaussian(&mut noise, dt.sqrt());
        self.step(model, x, dt, &noise);
        self.noise = noise;
    }

    /// Increments used by the last [`Stepper::step_random`] call.
    pub fn last_increment(&self) -> &[f64] {
        &self.noise
    }
}

/// One Euler–Maruyama step `x + V(x)·dt + σ·B(x)·dw`.
pub fn euler_maruyama_step(model: &SdeModel, x: &[f64], dt: f64, dw: &[f64]) -> Result<Vec<f64>, SimError> {
    if x.len() != model.dim() {
        return Err(SimError::DimensionMismatch { expected: model.dim(), got: x.len() });
    }
    if dw.len() != model.noise_dim() {
        return Err(SimError::DimensionMismatch { expected: model.noise_dim(), got: dw.len() });
    }
    let mut out = x.to_vec();
    Stepper::new(model).step(model, &mut out, dt, dw);
    if !all_finite(&out) {
        return Err(SimError::NumericalBlowup { time: dt, state: out, partial: None });
    }
    Ok(out)
}

fn bridge_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}

/// Integrates one path with noise stream `(cfg.seed, stream_index)`, feeding each
/// accepted state to `observer`.
pub fn integrate<O: PathObserver + ?Sized>(
    model: &SdeModel,
    x0: &[f64],
    cfg: &IntegratorConfig,
    stream_index: u64,
    observer: &mut O,
) -> Result<PathOutcome, SimError> {
    cfg.validate(model.sigma())?;
    if x0.len() != model.dim() {
        return Err(SimError::DimensionMismatch { expected: model.dim(), got: x0.len() });
    }
    let basin = model.basin().clone();
    if !basin.contains(x0) {
        return Err(SimError::InvalidStart(x0.to_vec()));
    }
    let dt = cfg.dt;
    let n_steps = cfg.n_steps();
    let mut stream = NoiseStream::new(cfg.seed, stream_index);
    let mut stepper = Stepper::new(model);
    let mut x = x0.to_vec();
    let mut prev = x0.to_vec();
    let mut exited = false;
    let mut exit_time = None;
    let bound = model.blowup_bound();

    let mut stopped = observer.observe(0, 0.0, &x).is_break();
    let mut step = 0u64;
    while !stopped && step < n_steps {
        prev.copy_from_slice(&x);
        stepper.step_random(model, &mut x, dt, &mut stream);
        step += 1;
        let t = step as f64 * dt;
        if !all_finite(&x) || norm(&x) > bound {
            return Err(SimError::NumericalBlowup { time: t, state: x, partial: None });
        }
        if !exited && !basin.contains(&x) {
            exited = true;
            let te = if cfg.refine_exit && model.sigma() > 0.0 {
                refine_exit_time(model, &prev, dt, stepper.last_increment(), cfg.seed, stream_index, t)
            } else {
                t
            };
            exit_time = Some(te);
            observer.on_exit(te, step - 1, t - dt, &prev);
            if cfg.stop_on_exit {
                return Ok(PathOutcome {
                    steps: step - 1,
                    final_time: t - dt,
                    final_state: prev,
                    exited,
                    exit_time,
                    stopped_by_observer: false,
                });
            }
        }
        stopped = observer.observe(step, t, &x).is_break();
    }
    Ok(PathOutcome {
        steps: step,
        final_time: step as f64 * dt,
        final_state: x,
        exited,
        exit_time,
        stopped_by_observer: stopped,
    })
}

/// Midpoint of the straddling step drawn from the Brownian bridge with the same
/// increment: `W(dt/2) = dw/2 + (√dt/2)·Z`.
fn refine_exit_time(
    model: &SdeModel,
    prev: &[f64],
    dt: f64,
    dw: &[f64],
    seed: u64,
    stream_index: u64,
    t_out: f64,
) -> f64 {
    let mut bridge = NoiseStream::new(bridge_seed(seed), stream_index);
    let mut half = alloc::vec![0.0; dw.len()];
    bridge.fill_gaussian(&mut half, 0.5 * dt.sqrt());
    for (h, w) in half.iter_mut().zip(dw) {
        *h += 0.5 * w;
    }
    let mut mid = prev.to_vec();
    Stepper::new(model).step(model, &mut mid, 0.5 * dt, &half);
    if model.basin().contains(&mid) {
        t_out
    } else {
        t_out - 0.5 * dt
    }
}

/// Observer that stores every `stride`-th state, plus the last in-basin state
/// before an exit.
pub struct Recorder {
    stride: u64,
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    last_step: Option<u64>,
}

impl Recorder {
    pub fn new(dim: usize, stride: usize) -> Self {
        Self { stride: stride.max(1) as u64, dim, times: Vec::new(), states: Vec::new(), last_step: None }
    }

    fn push(&mut self, step: u64, t: f64, x: &[f64]) {
        self.times.push(t);
        self.states.extend_from_slice(x);
        self.last_step = Some(step);
    }

    pub fn finish(self, outcome_exit: Option<f64>, seed: u64, stream: u64) -> TrajectoryRecord {
        TrajectoryRecord {
            dim: self.dim,
            times: self.times,
            states: self.states,
            exited: outcome_exit.is_some(),
            exit_time: outcome_exit,
            seed_used: seed,
            stream,
        }
    }
}

impl PathObserver for Recorder {
    fn observe(&mut self, step: u64, t: f64, x: &[f64]) -> ControlFlow<()> {
        if step % self.stride == 0 {
            self.push(step, t, x);
        }
        ControlFlow::Continue(())
    }

    fn on_exit(&mut self, _exit_time: f64, last_step: u64, last_t: f64, last_inside: &[f64]) {
        if self.last_step != Some(last_step) {
            self.push(last_step, last_t, last_inside);
        }
    }
}

fn record_path(model: &SdeModel, x0: &[f64], cfg: &IntegratorConfig, index: u64) -> Result<TrajectoryRecord, SimError> {
    let mut rec = Recorder::new(model.dim(), cfg.record_stride);
    match integrate(model, x0, cfg, index, &mut rec) {
        Ok(outcome) => Ok(rec.finish(outcome.exit_time, cfg.seed, index)),
        Err(SimError::NumericalBlowup { time, state, .. }) => {
            Err(SimError::NumericalBlowup { time, state, partial: Some(Box::new(rec.finish(None, cfg.seed, index))) })
        }
        Err(e) => Err(e),
    }
}

/// Simulates and records one path using noise stream `(cfg.seed, 0)`.
pub fn simulate_path(model: &SdeModel, x0: &[f64], cfg: &IntegratorConfig) -> Result<TrajectoryRecord, SimError> {
    record_path(model, x0, cfg, 0)
}

/// Simulates path `i` from `x0s[i]` with stream `(cfg.seed, i)`. Failures are
/// reported per path. The output does not depend on `workers`.
pub fn simulate_ensemble(
    model: &SdeModel,
    x0s: &[Vec<f64>],
    cfg: &IntegratorConfig,
    workers: usize,
) -> Vec<Result<TrajectoryRecord, SimError>> {
    map_paths(x0s.len(), workers, |i| record_path(model, &x0s[i], cfg, i as u64))
}

/// Runs one observer per path; `make(i)` builds the observer of path `i`.
pub fn run_ensemble<O, F>(
    model: &SdeModel,
    x0s: &[Vec<f64>],
    cfg: &IntegratorConfig,
    workers: usize,
    make: F,
) -> Vec<(Result<PathOutcome, SimError>, O)>
where
    O: PathObserver + Send,
    F: Fn(usize) -> O + Sync,
{
    map_paths(x0s.len(), workers, |i| {
        let mut obs = make(i);
        let r = integrate(model, &x0s[i], cfg, i as u64, &mut obs);
        (r, obs)
    })
}

/// Maps `f` over `0..n` on up to `workers` threads, preserving order.
pub fn map_paths<T, F>(n: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    #[cfg(feature = "parallel")]
    {
        if workers > 1 && n > 1 {
            use rayon::prelude::*;
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
                return pool.install(|| (0..n).into_par_iter().map(&f).collect());
            }
        }
    }
    let _ = workers;
    (0..n).map(f).collect()
}
