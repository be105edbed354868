//! Lifting phases to the real line, winding numbers, pathwise frequencies and the
//! Itô split of the phase into a drift integral `I_t` and a martingale `II_t`.
//!
//! Lifting picks, at every sample, the branch of `π(x_k) + nT` nearest to the
//! previous lifted value. Raw increments whose circular size reaches the branch
//! threshold are rejected with [`TrackError::BranchAmbiguity`], unless the step
//! passes within [`BranchRule::singularity_radius`] of a phase singularity; such
//! steps keep the nearest branch and are counted.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::ops::ControlFlow;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use thiserror::Error;

use crate::math::{circular_diff, distance, dot, trace_quadratic};
use crate::phase_map::{PhaseError, PhaseMap};
use crate::sde::{PathObserver, SdeModel, TrajectoryRecord};

/// Default branch threshold as a fraction of the period.
pub const DEFAULT_BRANCH_FRACTION: f64 = 0.45;

/// When a raw phase increment counts as ambiguous.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BranchRule {
    /// Threshold on `|Δπ|` as a fraction of the period.
    pub fraction: f64,
    /// Steps whose segment passes within this distance of a singularity of the
    /// phase map are lifted to the nearest branch instead of failing. Zero disables.
    pub singularity_radius: f64,
}

impl Default for BranchRule {
    fn default() -> Self {
        Self::new(DEFAULT_BRANCH_FRACTION)
    }
}

impl BranchRule {
    pub fn new(fraction: f64) -> Self {
        Self { fraction, singularity_radius: 0.0 }
    }

    pub fn with_singularity_radius(mut self, radius: f64) -> Self {
        self.singularity_radius = radius;
        self
    }
}

/// Branch threshold plus the singular points it is relaxed around.
struct BranchGuard {
    threshold: f64,
    radius: f64,
    singular: Vec<Vec<f64>>,
}

impl BranchGuard {
    fn new(pm: &dyn PhaseMap, rule: BranchRule) -> Self {
        let singular = if rule.singularity_radius > 0.0 { pm.singularities() } else { Vec::new() };
        Self { threshold: rule.fraction * pm.period(), radius: rule.singularity_radius, singular }
    }

    /// `Ok(true)` when the step was tolerated near a singularity.
    fn check(&self, inc: f64, a: &[f64], b: &[f64]) -> Result<bool, ()> {
        if inc.abs() < self.threshold {
            return Ok(false);
        }
        if self.singular.iter().any(|p| segment_distance(a, b, p) <= self.radius) {
            Ok(true)
        } else {
            Err(())
        }
    }
}

fn segment_distance(a: &[f64], b: &[f64], p: &[f64]) -> f64 {
    let mut ab2 = 0.0;
    let mut ap_ab = 0.0;
    for k in 0..a.len() {
        let ab = b[k] - a[k];
        ab2 += ab * ab;
        ap_ab += (p[k] - a[k]) * ab;
    }
    let s = if ab2 > 0.0 { (ap_ab / ab2).clamp(0.0, 1.0) } else { 0.0 };
    let closest: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect();
    distance(&closest, p)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackError {
    #[error(
        "phase increment {increment} at t = {time} reaches the branch threshold; \
         reduce dt or keep the path away from the phase singularity"
    )]
    BranchAmbiguity { index: usize, time: f64, increment: f64 },
    #[error("phase undefined at t = {0}: beyond the last in-basin sample")]
    PhaseUndefined(f64),
    #[error(transparent)]
    Phase(#[from] PhaseError),
}

/// A lifted (real-valued) phase along a trajectory.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LiftedPhase {
    pub period: f64,
    pub times: Vec<f64>,
    pub phi: Vec<f64>,
    pub winding: Vec<i64>,
    /// Index of the last in-basin sample.
    pub valid_until: usize,
    /// Steps past the branch threshold that were tolerated near a singularity.
    #[cfg_attr(feature = "serde", serde(default))]
    pub ambiguous_steps: usize,
}

impl LiftedPhase {
    fn index_at(&self, t: f64) -> Result<usize, TrackError> {
        let last = self.times[self.valid_until];
        if t > last * (1.0 + 1e-12) + 1e-12 || t < 0.0 {
            return Err(TrackError::PhaseUndefined(t));
        }
        // last sample at or before t
        let i = self.times[..=self.valid_until].partition_point(|&s| s <= t * (1.0 + 1e-12) + 1e-15);
        Ok(i.saturating_sub(1))
    }

    /// Lifted phase at the last sample not after `t`.
    pub fn phi_at(&self, t: f64) -> Result<f64, TrackError> {
        Ok(self.phi[self.index_at(t)?])
    }

    /// Signed full rotations since the start.
    pub fn winding_number(&self, t: f64) -> Result<i64, TrackError> {
        Ok(self.winding[self.index_at(t)?])
    }

    /// `φ(t)/(T t)` in rotations per unit time.
    pub fn time_average_frequency(&self, t: f64) -> Result<f64, TrackError> {
        if !(t > 0.0) {
            return Err(TrackError::PhaseUndefined(t));
        }
        let i = self.index_at(t)?;
        Ok(self.phi[i] / (self.period * self.times[i]))
    }

    /// `(φ(t) − φ(0))/(T t)`, the same rate with the starting phase removed.
    pub fn increment_frequency(&self, t: f64) -> Result<f64, TrackError> {
        let i = self.index_at(t)?;
        Ok((self.phi[i] - self.phi[0]) / (self.period * self.times[i]))
    }

    pub fn valid_time(&self) -> f64 {
        self.times[self.valid_until]
    }
}

fn winding_of(phi: f64, phi0: f64, period: f64) -> i64 {
    (phi / period).floor() as i64 - (phi0 / period).floor() as i64
}

/// Lifts the phase of a recorded trajectory, truncated at its exit.
pub fn lift_phase(traj: &TrajectoryRecord, pm: &dyn PhaseMap, rule: BranchRule) -> Result<LiftedPhase, TrackError> {
    let n = traj.valid_len();
    if n == 0 {
        return Err(TrackError::PhaseUndefined(0.0));
    }
    let period = pm.period();
    let guard = BranchGuard::new(pm, rule);
    let mut ambiguous_steps = 0;
    let mut times = Vec::with_capacity(n);
    let mut phi = Vec::with_capacity(n);
    let mut winding = Vec::with_capacity(n);
    let mut last_raw = pm.eval(traj.state(0))?;
    let phi0 = last_raw;
    let mut current = phi0;
    for i in 0..n {
        if i > 0 {
            let raw = pm.eval(traj.state(i))?;
            let inc = circular_diff(last_raw, raw, period);
            match guard.check(inc, traj.state(i - 1), traj.state(i)) {
                Ok(tolerated) => ambiguous_steps += usize::from(tolerated),
                Err(()) => return Err(TrackError::BranchAmbiguity { index: i, time: traj.times[i], increment: inc }),
            }
            current += inc;
            last_raw = raw;
        }
        times.push(traj.times[i]);
        phi.push(current);
        winding.push(winding_of(current, phi0, period));
    }
    Ok(LiftedPhase { period, times, phi, winding, valid_until: n - 1, ambiguous_steps })
}

/// Which grid steps a streaming tracker keeps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RecordPlan {
    /// Keep every `stride`-th step (`0` keeps none).
    pub stride: u64,
    /// Additional steps to keep, ascending.
    pub steps: Vec<u64>,
}

impl RecordPlan {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn every(stride: u64) -> Self {
        Self { stride, steps: Vec::new() }
    }

    /// Keeps the grid steps closest to `times`.
    pub fn at_times(times: &[f64], dt: f64) -> Self {
        let mut steps: Vec<u64> = times.iter().map(|t| (t / dt).round() as u64).collect();
        steps.sort_unstable();
        steps.dedup();
        Self { stride: 0, steps }
    }

    fn wants(&self, step: u64, cursor: &mut usize) -> bool {
        let mut hit = self.stride > 0 && step % self.stride == 0;
        while *cursor < self.steps.len() && self.steps[*cursor] <= step {
            if self.steps[*cursor] == step {
                hit = true;
            }
            *cursor += 1;
        }
        hit
    }
}

/// Streaming phase lift for use as a [`PathObserver`].
pub struct PhaseTracker {
    pm: Arc<dyn PhaseMap>,
    period: f64,
    guard: BranchGuard,
    plan: RecordPlan,
    cursor: usize,
    started: bool,
    phi0: f64,
    phi: f64,
    last_raw: f64,
    last_x: Vec<f64>,
    last_t: f64,
    pub times: Vec<f64>,
    pub phis: Vec<f64>,
    pub ambiguous_steps: usize,
    pub error: Option<TrackError>,
}

impl PhaseTracker {
    pub fn new(pm: Arc<dyn PhaseMap>, rule: BranchRule, plan: RecordPlan) -> Self {
        let period = pm.period();
        let guard = BranchGuard::new(pm.as_ref(), rule);
        Self {
            pm,
            period,
            guard,
            plan,
            cursor: 0,
            started: false,
            phi0: 0.0,
            phi: 0.0,
            last_raw: 0.0,
            last_x: Vec::new(),
            last_t: 0.0,
            times: Vec::new(),
            phis: Vec::new(),
            ambiguous_steps: 0,
            error: None,
        }
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn phi0(&self) -> f64 {
        self.phi0
    }

    /// Lifted phase at the last accepted sample.
    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn last_time(&self) -> f64 {
        self.last_t
    }

    /// `φ(t)/(T t)` at the last accepted sample.
    pub fn frequency(&self) -> f64 {
        self.phi / (self.period * self.last_t)
    }

    pub fn winding(&self) -> i64 {
        winding_of(self.phi, self.phi0, self.period)
    }

    fn advance(&mut self, step: u64, t: f64, x: &[f64]) -> Result<(), TrackError> {
        let raw = self.pm.eval(x)?;
        if !self.started {
            self.started = true;
            self.phi0 = raw;
            self.phi = raw;
        } else {
            let inc = circular_diff(self.last_raw, raw, self.period);
            match self.guard.check(inc, &self.last_x, x) {
                Ok(tolerated) => self.ambiguous_steps += usize::from(tolerated),
                Err(()) => return Err(TrackError::BranchAmbiguity { index: step as usize, time: t, increment: inc }),
            }
            self.phi += inc;
        }
        self.last_raw = raw;
        self.last_x.clear();
        self.last_x.extend_from_slice(x);
        self.last_t = t;
        if self.plan.wants(step, &mut self.cursor) {
            self.times.push(t);
            self.phis.push(self.phi);
        }
        Ok(())
    }
}

impl PathObserver for PhaseTracker {
    fn observe(&mut self, step: u64, t: f64, x: &[f64]) -> ControlFlow<()> {
        match self.advance(step, t, x) {
            Ok(()) => ControlFlow::Continue(()),
            Err(e) => {
                self.error = Some(e);
                ControlFlow::Break(())
            }
        }
    }
}

/// Evaluates `π′V`, `Tr π″[B·,B·]` and `π′` at a state with reusable buffers.
pub struct Generator {
    pm: Arc<dyn PhaseMap>,
    model: SdeModel,
    pub grad: Vec<f64>,
    pub hessian: Vec<f64>,
    pub drift: Vec<f64>,
    pub diffusion: Vec<f64>,
}

impl Generator {
    pub fn new(pm: Arc<dyn PhaseMap>, model: &SdeModel) -> Self {
        let d = model.dim();
        let m = model.noise_dim();
        Self {
            pm,
            model: model.clone(),
            grad: alloc::vec![0.0; d],
            hessian: alloc::vec![0.0; d * d],
            drift: alloc::vec![0.0; d],
            diffusion: alloc::vec![0.0; d * m],
        }
    }

    pub fn model(&self) -> &SdeModel {
        &self.model
    }

    /// Returns `(π′V, Tr π″[B·,B·])` at `x` (unnormalized phase units, without `σ`).
    pub fn terms(&mut self, x: &[f64]) -> Result<(f64, f64), PhaseError> {
        self.pm.derivatives_into(x, &mut self.grad, &mut self.hessian)?;
        let field = self.model.field();
        field.drift(x, &mut self.drift);
        field.diffusion(x, &mut self.diffusion);
        let first = dot(&self.grad, &self.drift);
        let second = trace_quadratic(&self.hessian, &self.diffusion, self.model.dim(), self.model.noise_dim());
        Ok((first, second))
    }

    /// `Lπ = π′V + (σ²/2) Tr π″[B·,B·]`.
    pub fn generator(&mut self, x: &[f64]) -> Result<f64, PhaseError> {
        let (a, b) = self.terms(x)?;
        let s = self.model.sigma();
        Ok(a + 0.5 * s * s * b)
    }
}

/// Time series of the Itô split `φ(t) − φ(0) = I_t + II_t`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ItoDecomposition {
    pub times: Vec<f64>,
    /// `φ(t) − φ(0)`.
    pub phase_increment: Vec<f64>,
    /// Left-point quadrature of `Lπ`.
    pub drift_integral: Vec<f64>,
    /// `φ(t) − φ(0) − I_t`.
    pub martingale: Vec<f64>,
    /// Direct quadrature `Σ π′(x_k)(Δx_k − V(x_k)Δt)`, a diagnostic.
    pub martingale_direct: Vec<f64>,
}

/// Itô split along a recorded path. The quadrature uses the record spacing, so the
/// record should keep every step.
pub fn ito_decomposition(
    traj: &TrajectoryRecord,
    pm: Arc<dyn PhaseMap>,
    model: &SdeModel,
    rule: BranchRule,
) -> Result<ItoDecomposition, TrackError> {
    let lifted = lift_phase(traj, pm.as_ref(), rule)?;
    let mut gen = Generator::new(pm, model);
    let n = lifted.times.len();
    let mut out = ItoDecomposition {
        times: lifted.times.clone(),
        phase_increment: Vec::with_capacity(n),
        drift_integral: Vec::with_capacity(n),
        martingale: Vec::with_capacity(n),
        martingale_direct: Vec::with_capacity(n),
    };
    let mut integral = 0.0;
    let mut direct = 0.0;
    for i in 0..n {
        if i > 0 {
            let dt = lifted.times[i] - lifted.times[i - 1];
            let prev = traj.state(i - 1);
            integral += gen.generator(prev)? * dt;
            let x = traj.state(i);
            let mut noise_part = 0.0;
            for k in 0..x.len() {
                noise_part += gen.grad[k] * (x[k] - prev[k] - gen.drift[k] * dt);
            }
            direct += noise_part;
        }
        let inc = lifted.phi[i] - lifted.phi[0];
        out.phase_increment.push(inc);
        out.drift_integral.push(integral);
        out.martingale.push(inc - integral);
        out.martingale_direct.push(direct);
    }
    Ok(out)
}

/// Streaming version of [`ito_decomposition`], recording at planned steps.
pub struct ItoTracker {
    lift: PhaseTracker,
    gen: Generator,
    dt: f64,
    prev: Vec<f64>,
    prev_generator: f64,
    have_prev: bool,
    integral: f64,
    direct: f64,
    plan: RecordPlan,
    cursor: usize,
    pub times: Vec<f64>,
    pub drift_integral: Vec<f64>,
    pub martingale: Vec<f64>,
    pub martingale_direct: Vec<f64>,
    pub error: Option<TrackError>,
}

impl ItoTracker {
    pub fn new(pm: Arc<dyn PhaseMap>, model: &SdeModel, dt: f64, rule: BranchRule, plan: RecordPlan) -> Self {
        Self {
            lift: PhaseTracker::new(pm.clone(), rule, RecordPlan::none()),
            gen: Generator::new(pm, model),
            dt,
            prev: alloc::vec![0.0; model.dim()],
            prev_generator: 0.0,
            have_prev: false,
            integral: 0.0,
            direct: 0.0,
            plan,
            cursor: 0,
            times: Vec::new(),
            drift_integral: Vec::new(),
            martingale: Vec::new(),
            martingale_direct: Vec::new(),
            error: None,
        }
    }

    pub fn phase(&self) -> &PhaseTracker {
        &self.lift
    }

    fn advance(&mut self, step: u64, t: f64, x: &[f64]) -> Result<(), TrackError> {
        self.lift.advance(step, t, x)?;
        if self.have_prev {
            self.integral += self.prev_generator * self.dt;
            let mut part = 0.0;
            for k in 0..x.len() {
                part += self.gen.grad[k] * (x[k] - self.prev[k] - self.gen.drift[k] * self.dt);
            }
            self.direct += part;
        }
        // generator, gradient and drift at x serve as the left point of the next step
        self.prev_generator = self.gen.generator(x)?;
        self.prev.copy_from_slice(x);
        self.have_prev = true;
        if self.plan.wants(step, &mut self.cursor) {
            let inc = self.lift.phi - self.lift.phi0;
            self.times.push(t);
            self.drift_integral.push(self.integral);
            self.martingale.push(inc - self.integral);
            self.martingale_direct.push(self.direct);
        }
        Ok(())
    }
}

impl PathObserver for ItoTracker {
    fn observe(&mut self, step: u64, t: f64, x: &[f64]) -> ControlFlow<()> {
        match self.advance(step, t, x) {
            Ok(()) => ControlFlow::Continue(()),
            Err(e) => {
                self.error = Some(e);
                ControlFlow::Break(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_map::RayPhaseMap;
    use crate::sde::{simulate_path, IntegratorConfig};
    use crate::zoo::{build_model, ModelSpec};
    use core::f64::consts::TAU;

    fn record(times: Vec<f64>, states: Vec<[f64; 2]>) -> TrajectoryRecord {
        TrajectoryRecord {
            dim: 2,
            times,
            states: states.into_iter().flatten().collect(),
            exited: false,
            exit_time: None,
            seed_used: 0,
            stream: 0,
        }
    }

    #[test]
    fn frozen_path_has_constant_phase() {
        let pm = RayPhaseMap::isochron([0.0, 0.0], TAU);
        let p = [0.3f64.cos(), 0.3f64.sin()];
        let lp =
            lift_phase(&record(alloc::vec![0.0, 1.0, 2.0], alloc::vec![p; 3]), &pm, BranchRule::default()).unwrap();
        assert!(lp.phi.iter().all(|v| (v - 0.3).abs() < 1e-15));
        assert_eq!(lp.winding_number(2.0).unwrap(), 0);
    }

    #[test]
    fn lifting_crosses_the_seam() {
        let pm = RayPhaseMap::isochron([0.0, 0.0], TAU);
        let angles = [6.0, 6.2, 0.1, 0.3];
        let states = angles.iter().map(|a: &f64| [a.cos(), a.sin()]).collect();
        let lp = lift_phase(&record(alloc::vec![0.0, 1.0, 2.0, 3.0], states), &pm, BranchRule::default()).unwrap();
        assert!((lp.phi[3] - (TAU + 0.3)).abs() < 1e-12);
        assert_eq!(lp.winding, alloc::vec![0, 0, 1, 1]);
    }

    #[test]
    fn large_jump_is_a_branch_ambiguity() {
        let pm = RayPhaseMap::isochron([0.0, 0.0], TAU);
        let states = alloc::vec![[1.0, 0.0], [-1.0, 0.01]];
        let err = lift_phase(&record(alloc::vec![0.0, 1.0], states), &pm, BranchRule::default()).unwrap_err();
        assert!(matches!(err, TrackError::BranchAmbiguity { index: 1, .. }));
    }

    #[test]
    fn jumps_past_the_singularity_are_tolerated_inside_the_ball() {
        let pm = RayPhaseMap::isochron([0.0, 0.0], TAU);
        // the first jump passes 0.001 from the origin, the last one 0.025
        let states = alloc::vec![[0.01, 0.001], [-0.01, 0.001], [-1.0, 0.1], [1.0, -0.05]];
        let rule = BranchRule::default().with_singularity_radius(0.01);
        let err = lift_phase(&record(alloc::vec![0.0, 1.0, 2.0, 3.0], states.clone()), &pm, rule).unwrap_err();
        assert!(matches!(err, TrackError::BranchAmbiguity { index: 3, .. }));
        let lp = lift_phase(&record(alloc::vec![0.0, 1.0], states[..2].to_vec()), &pm, rule).unwrap();
        assert_eq!(lp.ambiguous_steps, 1);
        let raw = pm.eval(&states[1]).unwrap() - pm.eval(&states[0]).unwrap();
        assert!((lp.phi[1] - lp.phi[0] - raw).abs() < 1e-12);
    }

    #[test]
    fn deterministic_hopf_winds_once_per_period() {
        let model = build_model(&ModelSpec::hopf_bounded(0.0)).unwrap();
        let pm = RayPhaseMap::isochron([0.0, 0.0], TAU);
        let cfg = IntegratorConfig::new(1e-3, 2.0 * TAU, 0);
        let traj = simulate_path(&model, &[1.0, 0.0], &cfg).unwrap();
        let lp = lift_phase(&traj, &pm, BranchRule::default()).unwrap();
        let i = lp.times.partition_point(|&t| t <= TAU + 1e-9) - 1;
        assert!((lp.phi[i] - TAU).abs() < 1e-3);
        // the grid point nearest 2π may sit just before a full turn
        let after = lp.winding_number(TAU + 0.01).unwrap();
        assert_eq!(after, 1);
        assert_eq!(lp.winding_number(2.0 * TAU - 0.01).unwrap(), 1);
        assert_eq!(lp.winding_number(0.0).unwrap(), 0);
        assert!(lp.winding_number(3.0 * TAU).is_err());
    }

    #[test]
    fn reversed_rotation_winds_negatively() {
        let pm = RayPhaseMap::isochron([0.0, 0.0], TAU);
        let n = 200;
        let times: Vec<f64> = (0..=n).map(|k| k as f64 * TAU / n as f64).collect();
        let states = times.iter().map(|t| [t.cos(), -t.sin()]).collect();
        let lp = lift_phase(&record(times, states), &pm, BranchRule::default()).unwrap();
        assert_eq!(lp.winding_number(TAU).unwrap(), -1);
    }

    #[test]
    fn zero_noise_split_has_no_martingale() {
        let model = build_model(&ModelSpec::hopf_bounded(0.0)).unwrap();
        let pm: Arc<dyn PhaseMap> = Arc::new(RayPhaseMap::isochron([0.0, 0.0], TAU));
        let cfg = IntegratorConfig::new(1e-3, 10.0, 0);
        let traj = simulate_path(&model, &[0.5, 0.2], &cfg).unwrap();
        let dec = ito_decomposition(&traj, pm, &model, BranchRule::default()).unwrap();
        let last = dec.times.len() - 1;
        assert!((dec.drift_integral[last] - dec.times[last]).abs() < 1e-9);
        assert!(dec.martingale_direct[last].abs() < 1e-12);
        // Euler error only
        assert!(dec.martingale[last].abs() < 5e-3);
    }

    #[test]
    fn streaming_tracker_matches_record() {
        let model = build_model(&ModelSpec::hopf_asym(0.3)).unwrap();
        let pm: Arc<dyn PhaseMap> = Arc::new(RayPhaseMap::isochron([0.0, 0.0], TAU));
        let cfg = IntegratorConfig::new(1e-3, 5.0, 4);
        let traj = simulate_path(&model, &[1.0, 0.0], &cfg).unwrap();
        let dec = ito_decomposition(&traj, pm.clone(), &model, BranchRule::default()).unwrap();
        let mut tracker = ItoTracker::new(pm, &model, cfg.dt, BranchRule::default(), RecordPlan::every(1000));
        crate::sde::integrate(&model, &[1.0, 0.0], &cfg, 0, &mut tracker).unwrap();
        for (k, t) in tracker.times.iter().enumerate() {
            let i = (t / cfg.dt).round() as usize;
            assert!((dec.times[i] - t).abs() < 1e-12);
            assert!((dec.martingale[i] - tracker.martingale[k]).abs() < 1e-10);
            assert!((dec.martingale_direct[i] - tracker.martingale_direct[k]).abs() < 1e-10);
        }
    }
}
