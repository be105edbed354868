//! Phase maps `π : B(Γ) → [0, T)` with first and second derivatives.
//!
//! Analytic maps provide closed-form derivatives. [`NumericPhaseMap`] evaluates the
//! asymptotic phase by flowing to the cycle and differentiates it by central
//! differences, taking every phase difference circularly.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::TAU;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use thiserror::Error;

use crate::cycle::LimitCycle;
use crate::math::{angle, circular_diff, norm, wrap_period};
use crate::ode::Rk4;
use crate::sde::SdeModel;
use crate::spline::PeriodicSpline;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhaseError {
    #[error("no analytic phase map for {0}")]
    Unsupported(String),
    #[error("phase undefined at singular state {0:?}")]
    Singular(Vec<f64>),
    #[error("state {0:?} is outside the basin")]
    OutsideBasin(Vec<f64>),
    #[error("finite-difference stencil around {0:?} leaves the basin")]
    StencilOutOfBasin(Vec<f64>),
    #[error("flow did not reach the cycle (residual distance {residual})")]
    NotConverged { residual: f64 },
    #[error("angle is not monotone along the cycle")]
    NonMonotone,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Backend {
    Analytic,
    Numeric,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PhaseMapKind {
    /// Invariant under the time-`T` flow; satisfies `π′V ≡ 1`.
    Isochron,
    Other,
}

/// Gradient (`d`) and row-major Hessian (`d × d`).
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseDerivatives {
    pub grad: Vec<f64>,
    pub hessian: Vec<f64>,
}

pub trait PhaseMap: Send + Sync {
    fn period(&self) -> f64;
    fn dim(&self) -> usize;
    /// Phase in `[0, T)`.
    fn eval(&self, x: &[f64]) -> Result<f64, PhaseError>;
    /// Writes `π′(x)` into `grad` and `π″(x)` into `hessian`.
    fn derivatives_into(&self, x: &[f64], grad: &mut [f64], hessian: &mut [f64]) -> Result<(), PhaseError>;
    /// Points where derivatives blow up.
    fn singularities(&self) -> Vec<Vec<f64>>;
    fn backend(&self) -> Backend;
    fn kind(&self) -> PhaseMapKind;

    fn derivatives(&self, x: &[f64]) -> Result<PhaseDerivatives, PhaseError> {
        let d = self.dim();
        let mut grad = alloc::vec![0.0; d];
        let mut hessian = alloc::vec![0.0; d * d];
        self.derivatives_into(x, &mut grad, &mut hessian)?;
        Ok(PhaseDerivatives { grad, hessian })
    }

    /// `π₁ = π / T`.
    fn eval_normalized(&self, x: &[f64]) -> Result<f64, PhaseError> {
        Ok(self.eval(x)? / self.period())
    }
}

fn centered_polar(x: &[f64], center: &[f64; 2]) -> Result<(f64, f64, f64), PhaseError> {
    let dx = x[0] - center[0];
    let dy = x[1] - center[1];
    let r2 = dx * dx + dy * dy;
    if !(r2 > 0.0) || !r2.is_finite() {
        return Err(PhaseError::Singular(x.to_vec()));
    }
    Ok((dx, dy, r2))
}

/// Gradient and Hessian of `atan2(y − c_y, x − c_x)`.
fn angle_derivatives(dx: f64, dy: f64, r2: f64, grad: &mut [f64], hessian: &mut [f64]) {
    let r4 = r2 * r2;
    grad[0] = -dy / r2;
    grad[1] = dx / r2;
    hessian[0] = 2.0 * dx * dy / r4;
    hessian[1] = (dy * dy - dx * dx) / r4;
    hessian[2] = hessian[1];
    hessian[3] = -2.0 * dx * dy / r4;
}

/// `π(x) = T·angle(x − c)/2π` on the plane: the isochron map of any system whose
/// angular speed does not depend on the radius, e.g. the Hopf normal form.
#[derive(Clone, Debug)]
pub struct RayPhaseMap {
    pub center: [f64; 2],
    pub period: f64,
    /// Angle of the cycle point with phase zero.
    pub offset: f64,
    pub kind: PhaseMapKind,
}

impl RayPhaseMap {
    pub fn isochron(center: [f64; 2], period: f64) -> Self {
        Self { center, period, offset: 0.0, kind: PhaseMapKind::Isochron }
    }
}

impl PhaseMap for RayPhaseMap {
    fn period(&self) -> f64 {
        self.period
    }
    fn dim(&self) -> usize {
        2
    }
    fn eval(&self, x: &[f64]) -> Result<f64, PhaseError> {
        let (dx, dy, _) = centered_polar(x, &self.center)?;
        Ok(wrap_period(self.period * wrap_period(angle(dx, dy) - self.offset, TAU) / TAU, self.period))
    }
    fn derivatives_into(&self, x: &[f64], grad: &mut [f64], hessian: &mut [f64]) -> Result<(), PhaseError> {
        let (dx, dy, r2) = centered_polar(x, &self.center)?;
        angle_derivatives(dx, dy, r2, grad, hessian);
        let scale = self.period / TAU;
        grad.iter_mut().for_each(|g| *g *= scale);
        hessian.iter_mut().for_each(|h| *h *= scale);
        Ok(())
    }
    fn singularities(&self) -> Vec<Vec<f64>> {
        alloc::vec![self.center.to_vec()]
    }
    fn backend(&self) -> Backend {
        Backend::Analytic
    }
    fn kind(&self) -> PhaseMapKind {
        self.kind
    }
}

/// `π(x) = (scale · x[axis]) mod T`, for charts in which one coordinate is an angle.
#[derive(Clone, Debug)]
pub struct AxisPhaseMap {
    pub dim: usize,
    pub axis: usize,
    pub scale: f64,
    pub period: f64,
    pub kind: PhaseMapKind,
}

impl PhaseMap for AxisPhaseMap {
    fn period(&self) -> f64 {
        self.period
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> Result<f64, PhaseError> {
        Ok(wrap_period(self.scale * x[self.axis], self.period))
    }
    fn derivatives_into(&self, _x: &[f64], grad: &mut [f64], hessian: &mut [f64]) -> Result<(), PhaseError> {
        grad.fill(0.0);
        grad[self.axis] = self.scale;
        hessian.fill(0.0);
        Ok(())
    }
    fn singularities(&self) -> Vec<Vec<f64>> {
        Vec::new()
    }
    fn backend(&self) -> Backend {
        Backend::Analytic
    }
    fn kind(&self) -> PhaseMapKind {
        self.kind
    }
}

/// Angle about `center`, re-timed along the cycle so that `π(γ_s) = s`.
///
/// The angle `ψ` is measured from the phase-zero point of the cycle in the direction
/// of rotation; `π = S(ψ)` where `S(ψ) = Tψ/2π + g(ψ)` and `g` is a periodic spline
/// fitted to the cycle's angle-versus-time table. The map is constant along rays from
/// the center.
#[derive(Clone, Debug)]
pub struct CalibratedAnglePhaseMap {
    center: [f64; 2],
    period: f64,
    /// +1 for counterclockwise cycles, −1 otherwise.
    orientation: f64,
    offset: f64,
    correction: PeriodicSpline,
}

impl CalibratedAnglePhaseMap {
    /// Requires the angle about `center` to be strictly monotone along `cycle`.
    pub fn new(cycle: &LimitCycle, center: [f64; 2]) -> Result<Self, PhaseError> {
        let period = cycle.period();
        let n = cycle.n_samples();
        let raw = |i: usize| {
            let p = cycle.sample(i % n);
            angle(p[0] - center[0], p[1] - center[1])
        };
        let orientation = if cycle.signed_area() >= 0.0 { 1.0 } else { -1.0 };
        let offset = raw(0);
        let mut psi = Vec::with_capacity(n);
        let mut acc = 0.0;
        psi.push(0.0);
        for i in 1..n {
            let step = orientation * circular_diff(raw(i - 1), raw(i), TAU);
            if !(step > 0.0) {
                return Err(PhaseError::NonMonotone);
            }
            acc += step;
            psi.push(acc);
        }
        let closing = orientation * circular_diff(raw(n - 1), raw(n), TAU);
        if !(closing > 0.0) || (acc + closing - TAU).abs() > 1e-6 {
            return Err(PhaseError::NonMonotone);
        }
        let values: Vec<f64> = psi.iter().enumerate().map(|(i, p)| cycle.sample_time(i) - period * p / TAU).collect();
        let correction = PeriodicSpline::new(psi, values, TAU).ok_or(PhaseError::NonMonotone)?;
        let map = Self { center, period, orientation, offset, correction };
        // S must stay increasing between the knots as well
        for k in 0..8 * n {
            let p = k as f64 * TAU / (8 * n) as f64;
            if !(map.slope(p) > 0.0) {
                return Err(PhaseError::NonMonotone);
            }
        }
        Ok(map)
    }

    fn psi(&self, dx: f64, dy: f64) -> f64 {
        wrap_period(self.orientation * (angle(dx, dy) - self.offset), TAU)
    }

    fn slope(&self, psi: f64) -> f64 {
        self.period / TAU + self.correction.eval_all(psi).1
    }

    pub fn orientation(&self) -> f64 {
        self.orientation
    }
}

impl PhaseMap for CalibratedAnglePhaseMap {
    fn period(&self) -> f64 {
        self.period
    }
    fn dim(&self) -> usize {
        2
    }
    fn eval(&self, x: &[f64]) -> Result<f64, PhaseError> {
        let (dx, dy, _) = centered_polar(x, &self.center)?;
        let psi = self.psi(dx, dy);
        Ok(wrap_period(self.period * psi / TAU + self.correction.eval(psi), self.period))
    }
    fn derivatives_into(&self, x: &[f64], grad: &mut [f64], hessian: &mut [f64]) -> Result<(), PhaseError> {
        let (dx, dy, r2) = centered_polar(x, &self.center)?;
        let psi = self.psi(dx, dy);
        let (_, g1, g2) = self.correction.eval_all(psi);
        let s1 = self.period / TAU + g1;
        let mut ag = [0.0; 2];
        let mut ah = [0.0; 4];
        angle_derivatives(dx, dy, r2, &mut ag, &mut ah);
        let o = self.orientation;
        for i in 0..2 {
            grad[i] = s1 * o * ag[i];
            for j in 0..2 {
                // ∇ψ∇ψᵀ is insensitive to the orientation sign
                hessian[i * 2 + j] = g2 * ag[i] * ag[j] + s1 * o * ah[i * 2 + j];
            }
        }
        Ok(())
    }
    fn singularities(&self) -> Vec<Vec<f64>> {
        alloc::vec![self.center.to_vec()]
    }
    fn backend(&self) -> Backend {
        Backend::Analytic
    }
    fn kind(&self) -> PhaseMapKind {
        PhaseMapKind::Other
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AsymptoticPhaseOptions {
    /// Upper bound on the number of periods flowed.
    pub max_periods: usize,
    /// Stop once the endpoint is this close to the cycle.
    pub tol: f64,
    /// Accept a result whose endpoint is within this distance after `max_periods`.
    pub accept: f64,
    /// RK4 sub-steps per period.
    pub steps_per_period: usize,
}

impl Default for AsymptoticPhaseOptions {
    fn default() -> Self {
        Self { max_periods: 20, tol: 1e-8, accept: 1e-5, steps_per_period: 4096 }
    }
}

/// Asymptotic phase: the `s` with `‖X⁰_t(x) − γ_{t+s}‖ → 0`, found by flowing `x`
/// for whole periods and projecting the endpoint onto the cycle.
pub fn asymptotic_phase(
    cycle: &LimitCycle,
    model: &SdeModel,
    x: &[f64],
    opts: &AsymptoticPhaseOptions,
) -> Result<f64, PhaseError> {
    if !model.basin().contains(x) {
        return Err(PhaseError::OutsideBasin(x.to_vec()));
    }
    let field = model.field().as_ref();
    let period = cycle.period();
    let h = period / opts.steps_per_period as f64;
    let mut rk = Rk4::new(x.len());
    let mut y = x.to_vec();
    let (mut s, mut dist) = cycle.nearest(&y);
    let mut periods = 0;
    while dist > opts.tol && periods < opts.max_periods {
        for _ in 0..opts.steps_per_period {
            rk.step(field, &mut y, h);
        }
        if !y.iter().all(|v| v.is_finite()) || !model.basin().contains(&y) {
            return Err(PhaseError::NotConverged { residual: f64::INFINITY });
        }
        periods += 1;
        let r = cycle.nearest(&y);
        s = r.0;
        dist = r.1;
    }
    if dist > opts.accept {
        return Err(PhaseError::NotConverged { residual: dist });
    }
    Ok(wrap_period(s, period))
}

/// Phase map evaluated by [`asymptotic_phase`] with finite-difference derivatives.
#[derive(Clone)]
pub struct NumericPhaseMap {
    cycle: Arc<LimitCycle>,
    model: SdeModel,
    pub options: AsymptoticPhaseOptions,
    /// Relative gradient step: `h = rel_step·(1 + ‖x‖)`.
    pub rel_step: f64,
    /// Relative step for second differences.
    pub rel_step_hessian: f64,
    pub singularities: Vec<Vec<f64>>,
}

impl NumericPhaseMap {
    pub fn new(cycle: Arc<LimitCycle>, model: &SdeModel) -> Self {
        Self {
            cycle,
            model: model.deterministic(),
            options: AsymptoticPhaseOptions::default(),
            rel_step: 1e-4,
            rel_step_hessian: 1e-3,
            singularities: Vec::new(),
        }
    }

    pub fn cycle(&self) -> &LimitCycle {
        &self.cycle
    }

    fn shifted(&self, x: &[f64], moves: &[(usize, f64)]) -> Result<f64, PhaseError> {
        let mut y = x.to_vec();
        for &(k, h) in moves {
            y[k] += h;
        }
        if !self.model.basin().contains(&y) {
            return Err(PhaseError::StencilOutOfBasin(x.to_vec()));
        }
        self.eval(&y)
    }

    fn check_stencil(&self, x: &[f64], h: f64) -> Result<(), PhaseError> {
        if self.model.basin().boundary_distance(x) <= 2.0 * h * (x.len() as f64).sqrt() {
            return Err(PhaseError::StencilOutOfBasin(x.to_vec()));
        }
        Ok(())
    }
}

impl PhaseMap for NumericPhaseMap {
    fn period(&self) -> f64 {
        self.cycle.period()
    }
    fn dim(&self) -> usize {
        self.cycle.dim()
    }
    fn eval(&self, x: &[f64]) -> Result<f64, PhaseError> {
        asymptotic_phase(&self.cycle, &self.model, x, &self.options)
    }
    fn derivatives_into(&self, x: &[f64], grad: &mut [f64], hessian: &mut [f64]) -> Result<(), PhaseError> {
        let d = x.len();
        let t = self.period();
        let scale = 1.0 + norm(x);
        let h = self.rel_step * scale;
        let k = self.rel_step_hessian * scale;
        self.check_stencil(x, h.max(k))?;
        let p0 = self.eval(x)?;
        // every difference is taken relative to p0 on the circle
        let rel = |v: f64| circular_diff(p0, v, t);
        for i in 0..d {
            let plus = rel(self.shifted(x, &[(i, h)])?);
            let minus = rel(self.shifted(x, &[(i, -h)])?);
            grad[i] = (plus - minus) / (2.0 * h);
        }
        for i in 0..d {
            let plus = rel(self.shifted(x, &[(i, k)])?);
            let minus = rel(self.shifted(x, &[(i, -k)])?);
            hessian[i * d + i] = (plus + minus) / (k * k);
            for j in i + 1..d {
                let pp = rel(self.shifted(x, &[(i, k), (j, k)])?);
                let pm = rel(self.shifted(x, &[(i, k), (j, -k)])?);
                let mp = rel(self.shifted(x, &[(i, -k), (j, k)])?);
                let mm = rel(self.shifted(x, &[(i, -k), (j, -k)])?);
                let v = (pp - pm - mp + mm) / (4.0 * k * k);
                hessian[i * d + j] = v;
                hessian[j * d + i] = v;
            }
        }
        Ok(())
    }
    fn singularities(&self) -> Vec<Vec<f64>> {
        self.singularities.clone()
    }
    fn backend(&self) -> Backend {
        Backend::Numeric
    }
    fn kind(&self) -> PhaseMapKind {
        PhaseMapKind::Isochron
    }
}

/// Circular discrepancy `|π(x) − π(X⁰_T(x))|` per point, and its maximum.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InvarianceReport {
    pub discrepancies: Vec<f64>,
    pub max: f64,
}

pub fn check_isochron_invariance(
    pm: &dyn PhaseMap,
    model: &SdeModel,
    points: &[Vec<f64>],
    max_step: f64,
) -> Result<InvarianceReport, PhaseError> {
    let t = pm.period();
    let field = model.field().as_ref();
    let mut discrepancies = Vec::with_capacity(points.len());
    for x in points {
        let before = pm.eval(x)?;
        let y = crate::ode::flow(field, x, t, max_step);
        let after = pm.eval(&y)?;
        discrepancies.push(circular_diff(before, after, t).abs());
    }
    let max = discrepancies.iter().copied().fold(0.0, f64::max);
    Ok(InvarianceReport { discrepancies, max })
}
