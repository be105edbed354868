//! The concrete oscillators: three Hopf normal-form variants, a radial system with
//! three cycles, and a Holling type III predator–prey model.

use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::TAU;
use core::fmt;
use core::str::FromStr;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use thiserror::Error;

use crate::basin::{Annulus, Basin, CoordinateBand, PositiveOrthant, PuncturedSpace, WholeSpace};
use crate::cycle::LimitCycle;
use crate::phase_map::{AxisPhaseMap, CalibratedAnglePhaseMap, PhaseError, PhaseMap, PhaseMapKind, RayPhaseMap};
use crate::sde::{SdeModel, VectorField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("{model} requires {constraint}")]
    InvalidParameter { model: &'static str, constraint: &'static str },
    #[error("unknown model id `{0}`")]
    UnknownModel(String),
    #[error("unknown noise variant `{0}`")]
    UnknownNoise(String),
    #[error("unknown chart `{0}`")]
    UnknownChart(String),
    #[error("unsupported for {model}: {what}")]
    Unsupported { model: &'static str, what: &'static str },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ModelKind {
    HopfBounded,
    HopfLinear,
    HopfAsym,
    ThreeCycles,
    PredatorPrey,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::HopfBounded,
        ModelKind::HopfLinear,
        ModelKind::HopfAsym,
        ModelKind::ThreeCycles,
        ModelKind::PredatorPrey,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::HopfBounded => "hopf_bounded",
            ModelKind::HopfLinear => "hopf_linear",
            ModelKind::HopfAsym => "hopf_asym",
            ModelKind::ThreeCycles => "three_cycles",
            ModelKind::PredatorPrey => "predator_prey",
        }
    }

    pub fn is_hopf(self) -> bool {
        matches!(self, ModelKind::HopfBounded | ModelKind::HopfLinear | ModelKind::HopfAsym)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = SpecError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| SpecError::UnknownModel(s.to_string()))
    }
}

/// Diffusion coefficient of the predator equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum NoiseVariant {
    /// `B(v) = 1`.
    #[default]
    B0,
    /// `B(v) = v − v*`.
    B1,
}

impl FromStr for NoiseVariant {
    type Err = SpecError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "B0" | "b0" => Ok(NoiseVariant::B0),
            "B1" | "b1" => Ok(NoiseVariant::B1),
            _ => Err(SpecError::UnknownNoise(s.to_string())),
        }
    }
}

/// Coordinates used to integrate the three-cycle system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Chart {
    /// State `(r, θ)` with `θ` unwrapped.
    #[default]
    Polar,
    /// State `(x, y)`.
    Cartesian,
}

impl FromStr for Chart {
    type Err = SpecError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "polar" => Ok(Chart::Polar),
            "cartesian" => Ok(Chart::Cartesian),
            _ => Err(SpecError::UnknownChart(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// `a, b, c, d`; unused entries are ignored.
    pub params: [f64; 4],
    pub noise: NoiseVariant,
    pub chart: Chart,
    pub sigma: f64,
}

pub const THREE_CYCLES_DEFAULT: [f64; 3] = [1.0, 2.0, 3.0];
pub const PREDATOR_PREY_DEFAULT: [f64; 4] = [6.8, 1.25, 0.8, 0.5];

impl ModelSpec {
    pub fn new(kind: ModelKind, sigma: f64) -> Self {
        let params = match kind {
            ModelKind::ThreeCycles => [THREE_CYCLES_DEFAULT[0], THREE_CYCLES_DEFAULT[1], THREE_CYCLES_DEFAULT[2], 0.0],
            ModelKind::PredatorPrey => PREDATOR_PREY_DEFAULT,
            _ => [0.0; 4],
        };
        Self { kind, params, noise: NoiseVariant::B0, chart: Chart::Polar, sigma }
    }

    pub fn hopf_bounded(sigma: f64) -> Self {
        Self::new(ModelKind::HopfBounded, sigma)
    }
    pub fn hopf_linear(sigma: f64) -> Self {
        Self::new(ModelKind::HopfLinear, sigma)
    }
    pub fn hopf_asym(sigma: f64) -> Self {
        Self::new(ModelKind::HopfAsym, sigma)
    }
    pub fn three_cycles(a: f64, b: f64, c: f64, sigma: f64) -> Self {
        Self { params: [a, b, c, 0.0], ..Self::new(ModelKind::ThreeCycles, sigma) }
    }
    pub fn predator_prey(noise: NoiseVariant, sigma: f64) -> Self {
        Self { noise, ..Self::new(ModelKind::PredatorPrey, sigma) }
    }

    pub fn with_sigma(&self, sigma: f64) -> Self {
        Self { sigma, ..self.clone() }
    }

    pub fn with_chart(&self, chart: Chart) -> Self {
        Self { chart, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(SpecError::InvalidParameter { model: self.kind.as_str(), constraint: "finite sigma >= 0" });
        }
        let [a, b, c, d] = self.params;
        match self.kind {
            ModelKind::ThreeCycles => {
                if !(0.0 < a && a < b && b < c && c.is_finite()) {
                    return Err(SpecError::InvalidParameter { model: "three_cycles", constraint: "0 < a < b < c" });
                }
            }
            ModelKind::PredatorPrey => {
                if !(a > 0.0 && b > 0.0 && c > 0.0 && d > 0.0) || self.params.iter().any(|p| !p.is_finite()) {
                    return Err(SpecError::InvalidParameter {
                        model: "predator_prey",
                        constraint: "positive finite a, b, c, d",
                    });
                }
                if !(c > d) {
                    return Err(SpecError::InvalidParameter { model: "predator_prey", constraint: "c > d" });
                }
                if !(predator_prey_equilibrium(&self.params)[0] < a) {
                    return Err(SpecError::InvalidParameter {
                        model: "predator_prey",
                        constraint: "u* < a so that v* > 0",
                    });
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// State dimension of the built model.
    pub fn dim(&self) -> usize {
        2
    }

    /// The interior equilibrium that is the phase singularity, in model coordinates.
    pub fn equilibrium(&self) -> Option<Vec<f64>> {
        match self.kind {
            ModelKind::HopfBounded | ModelKind::HopfLinear | ModelKind::HopfAsym => Some(alloc::vec![0.0, 0.0]),
            ModelKind::PredatorPrey => Some(predator_prey_equilibrium(&self.params).to_vec()),
            ModelKind::ThreeCycles => None,
        }
    }

    /// Closed-form period of the stable cycle, when known.
    pub fn analytic_period(&self) -> Option<f64> {
        match self.kind {
            k if k.is_hopf() => Some(TAU),
            ModelKind::ThreeCycles => Some(TAU * self.params[1] * self.params[1]),
            _ => None,
        }
    }

    /// A start point on (or next to) the stable cycle.
    pub fn default_start(&self) -> Vec<f64> {
        match self.kind {
            ModelKind::ThreeCycles => match self.chart {
                Chart::Polar => alloc::vec![self.params[1], 0.0],
                Chart::Cartesian => alloc::vec![self.params[1], 0.0],
            },
            ModelKind::PredatorPrey => {
                let e = predator_prey_equilibrium(&self.params);
                alloc::vec![e[0] + 0.5, e[1]]
            }
            _ => alloc::vec![1.0, 0.0],
        }
    }
}

/// `(u*, v*)` with `u*² = d/(c − d)` and `v* = c(a − u*)/(b u*(c − d))`.
pub fn predator_prey_equilibrium(params: &[f64; 4]) -> [f64; 2] {
    let [a, b, c, d] = *params;
    let u = (d * (c - d)).sqrt() / (c - d);
    let v = c * (a - u) / (b * u * (c - d));
    [u, v]
}

#[derive(Clone, Copy, Debug)]
enum HopfNoise {
    /// `B = (x, y)·(2 − r²)`.
    Bounded,
    /// `B = (x, y)`.
    Linear,
    /// `B = (1, 1)·(2 − r²)`.
    Asym,
}

#[derive(Clone, Debug)]
struct Hopf {
    noise: HopfNoise,
}

impl VectorField for Hopf {
    fn dim(&self) -> usize {
        2
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let (px, py) = (x[0], x[1]);
        let r2 = px * px + py * py;
        out[0] = px - py - px * r2;
        out[1] = px + py - py * r2;
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        let (px, py) = (x[0], x[1]);
        let r2 = px * px + py * py;
        match self.noise {
            HopfNoise::Bounded => {
                out[0] = px * (2.0 - r2);
                out[1] = py * (2.0 - r2);
            }
            HopfNoise::Linear => {
                out[0] = px;
                out[1] = py;
            }
            HopfNoise::Asym => {
                out[0] = 2.0 - r2;
                out[1] = 2.0 - r2;
            }
        }
    }
}

#[derive(Clone, Debug)]
struct ThreeCyclesPolar {
    a: f64,
    b: f64,
    c: f64,
}

impl VectorField for ThreeCyclesPolar {
    fn dim(&self) -> usize {
        2
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let r = x[0];
        out[0] = r * (r - self.a) * (r - self.b) * (r - self.c);
        out[1] = 1.0 / (r * r);
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[0];
        out[1] = 0.0;
    }
}

/// Cartesian pushforward of the polar system. With `x = r cos θ`, `y = r sin θ`,
/// `x` and `y` are linear in `r` and `θ` carries no noise, so Itô's formula adds no
/// correction term.
#[derive(Clone, Debug)]
struct ThreeCyclesCartesian {
    a: f64,
    b: f64,
    c: f64,
}

impl VectorField for ThreeCyclesCartesian {
    fn dim(&self) -> usize {
        2
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let r2 = x[0] * x[0] + x[1] * x[1];
        let r = r2.sqrt();
        let radial = (r - self.a) * (r - self.b) * (r - self.c);
        out[0] = x[0] * radial - x[1] / r2;
        out[1] = x[1] * radial + x[0] / r2;
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[0];
        out[1] = x[1];
    }
}

#[derive(Clone, Debug)]
struct PredatorPrey {
    params: [f64; 4],
    noise: NoiseVariant,
    v_star: f64,
}

impl VectorField for PredatorPrey {
    fn dim(&self) -> usize {
        2
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let [a, b, c, d] = self.params;
        let (u, v) = (x[0], x[1]);
        let holling = u * u / (1.0 + u * u);
        out[0] = u * (a - u) - b * holling * v;
        out[1] = c * holling * v - d * v;
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
        out[1] = match self.noise {
            NoiseVariant::B0 => 1.0,
            NoiseVariant::B1 => x[1] - self.v_star,
        };
    }
}

/// Builds the SDE model described by `spec`.
pub fn build_model(spec: &ModelSpec) -> Result<SdeModel, SpecError> {
    spec.validate()?;
    let [a, b, c, _] = spec.params;
    let (field, basin): (Arc<dyn VectorField>, Arc<dyn Basin>) = match spec.kind {
        ModelKind::HopfBounded => (Arc::new(Hopf { noise: HopfNoise::Bounded }), Arc::new(WholeSpace)),
        ModelKind::HopfLinear => {
            (Arc::new(Hopf { noise: HopfNoise::Linear }), Arc::new(PuncturedSpace { center: alloc::vec![0.0, 0.0] }))
        }
        ModelKind::HopfAsym => (Arc::new(Hopf { noise: HopfNoise::Asym }), Arc::new(WholeSpace)),
        ModelKind::ThreeCycles => match spec.chart {
            Chart::Polar => {
                (Arc::new(ThreeCyclesPolar { a, b, c }), Arc::new(CoordinateBand { axis: 0, lo: a, hi: c }))
            }
            Chart::Cartesian => (
                Arc::new(ThreeCyclesCartesian { a, b, c }),
                Arc::new(Annulus { center: [0.0, 0.0], inner: a, outer: c }),
            ),
        },
        ModelKind::PredatorPrey => (
            Arc::new(PredatorPrey {
                params: spec.params,
                noise: spec.noise,
                v_star: predator_prey_equilibrium(&spec.params)[1],
            }),
            Arc::new(PositiveOrthant),
        ),
    };
    Ok(SdeModel::new(field, basin, spec.sigma))
}

/// Row-major drift Jacobian in closed form.
pub fn drift_jacobian(spec: &ModelSpec, x: &[f64]) -> [f64; 4] {
    match spec.kind {
        k if k.is_hopf() => {
            let (px, py) = (x[0], x[1]);
            let r2 = px * px + py * py;
            [1.0 - r2 - 2.0 * px * px, -1.0 - 2.0 * px * py, 1.0 - 2.0 * px * py, 1.0 - r2 - 2.0 * py * py]
        }
        ModelKind::ThreeCycles => {
            let [a, b, c, _] = spec.params;
            match spec.chart {
                Chart::Polar => {
                    let r = x[0];
                    let df =
                        (r - a) * (r - b) * (r - c) + r * ((r - b) * (r - c) + (r - a) * (r - c) + (r - a) * (r - b));
                    [df, 0.0, -2.0 / (r * r * r), 0.0]
                }
                Chart::Cartesian => {
                    let (px, py) = (x[0], x[1]);
                    let r2 = px * px + py * py;
                    let r = r2.sqrt();
                    let g = (r - a) * (r - b) * (r - c);
                    let dg = (r - b) * (r - c) + (r - a) * (r - c) + (r - a) * (r - b);
                    let (drx, dry) = (px / r, py / r);
                    let r4 = r2 * r2;
                    [
                        g + px * dg * drx + 2.0 * px * py / r4,
                        px * dg * dry - 1.0 / r2 + 2.0 * py * py / r4,
                        py * dg * drx + 1.0 / r2 - 2.0 * px * px / r4,
                        g + py * dg * dry - 2.0 * px * py / r4,
                    ]
                }
            }
        }
        _ => {
            let [a, b, c, d] = spec.params;
            let (u, v) = (x[0], x[1]);
            let q = 1.0 + u * u;
            let holling = u * u / q;
            let dholling = 2.0 * u / (q * q);
            [a - 2.0 * u - b * dholling * v, -b * holling, c * dholling * v, c * holling - d]
        }
    }
}

/// `σ* = Tr V′(x₀)/(2d)` at the interior equilibrium.
pub fn sigma_star(spec: &ModelSpec) -> Result<f64, SpecError> {
    spec.validate()?;
    let x0 = spec
        .equilibrium()
        .ok_or(SpecError::Unsupported { model: spec.kind.as_str(), what: "no interior equilibrium" })?;
    let j = drift_jacobian(spec, &x0);
    Ok((j[0] + j[3]) / (2.0 * spec.dim() as f64))
}

/// The stable cycle in closed form (Hopf variants and the three-cycle system).
pub fn analytic_cycle(spec: &ModelSpec, n_samples: usize) -> Result<Option<LimitCycle>, SpecError> {
    let model = build_model(spec)?;
    let field = model.field().as_ref();
    Ok(match spec.kind {
        k if k.is_hopf() => Some(LimitCycle::from_fn(field, TAU, n_samples, |s| alloc::vec![s.cos(), s.sin()])),
        ModelKind::ThreeCycles => {
            let b = spec.params[1];
            let period = TAU * b * b;
            Some(match spec.chart {
                Chart::Polar => LimitCycle::from_fn(field, period, n_samples, |s| alloc::vec![b, s / (b * b)]),
                Chart::Cartesian => LimitCycle::from_fn(field, period, n_samples, |s| {
                    let th = s / (b * b);
                    alloc::vec![b * th.cos(), b * th.sin()]
                }),
            })
        }
        _ => None,
    })
}

/// The closed-form phase map of each model. The predator–prey map needs its cycle
/// (from [`crate::find_limit_cycle`]) to calibrate the angle.
pub fn analytic_phase_map(spec: &ModelSpec, cycle: Option<&LimitCycle>) -> Result<Arc<dyn PhaseMap>, PhaseError> {
    Ok(match spec.kind {
        // the σ = 0 flow is shared by all Hopf variants, hence so are the isochrons
        k if k.is_hopf() => Arc::new(RayPhaseMap::isochron([0.0, 0.0], TAU)),
        ModelKind::ThreeCycles => {
            let b = spec.params[1];
            let period = TAU * b * b;
            match spec.chart {
                Chart::Polar => {
                    Arc::new(AxisPhaseMap { dim: 2, axis: 1, scale: b * b, period, kind: PhaseMapKind::Other })
                }
                Chart::Cartesian => {
                    Arc::new(RayPhaseMap { center: [0.0, 0.0], period, offset: 0.0, kind: PhaseMapKind::Other })
                }
            }
        }
        ModelKind::PredatorPrey => {
            let cycle =
                cycle.ok_or_else(|| PhaseError::Unsupported("predator_prey without a computed cycle".into()))?;
            let e = predator_prey_equilibrium(&spec.params);
            Arc::new(CalibratedAnglePhaseMap::new(cycle, e)?)
        }
        _ => unreachable!(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hopf_bounded_values_at_unit_point() {
        let m = build_model(&ModelSpec::hopf_bounded(1.0)).unwrap();
        assert_eq!(m.drift_at(&[1.0, 0.0]), alloc::vec![0.0, 1.0]);
        assert_eq!(m.diffusion_at(&[1.0, 0.0]), alloc::vec![1.0, 0.0]);
    }

    #[test]
    fn predator_prey_equilibrium_values() {
        let [u, v] = predator_prey_equilibrium(&PREDATOR_PREY_DEFAULT);
        assert!((u - 1.29).abs() < 0.005 && (v - 9.10).abs() < 0.005);
        let m = build_model(&ModelSpec::predator_prey(NoiseVariant::B0, 0.0)).unwrap();
        let f = m.drift_at(&[u, v]);
        assert!(f[0].abs() < 1e-12 && f[1].abs() < 1e-12);
    }

    #[test]
    fn three_cycles_radial_drift_vanishes_at_b() {
        let m = build_model(&ModelSpec::three_cycles(1.0, 2.0, 3.0, 0.1)).unwrap();
        let f = m.drift_at(&[2.0, 0.7]);
        assert_eq!(f[0], 0.0);
        assert!((f[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn three_cycles_ordering_is_enforced() {
        let err = build_model(&ModelSpec::three_cycles(3.0, 2.0, 4.0, 0.0)).unwrap_err();
        assert!(err.to_string().contains("a < b < c"));
    }

    #[test]
    fn predator_prey_requires_c_above_d() {
        let mut spec = ModelSpec::predator_prey(NoiseVariant::B0, 0.1);
        spec.params[2] = 0.4;
        assert!(build_model(&spec).is_err());
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let specs = [
            ModelSpec::hopf_bounded(0.0),
            ModelSpec::three_cycles(1.0, 2.0, 3.0, 0.0),
            ModelSpec::three_cycles(1.0, 2.0, 3.0, 0.0).with_chart(Chart::Cartesian),
            ModelSpec::predator_prey(NoiseVariant::B0, 0.0),
        ];
        let points = [[0.3, -0.7], [1.6, 0.9], [2.2, -1.1], [1.1, 8.7]];
        for spec in &specs {
            let m = build_model(spec).unwrap();
            for p in &points {
                let j = drift_jacobian(spec, p);
                let h = 1e-6;
                for col in 0..2 {
                    let mut xp = p.to_vec();
                    let mut xm = p.to_vec();
                    xp[col] += h;
                    xm[col] -= h;
                    let (fp, fm) = (m.drift_at(&xp), m.drift_at(&xm));
                    for row in 0..2 {
                        let fd = (fp[row] - fm[row]) / (2.0 * h);
                        assert!((fd - j[row * 2 + col]).abs() < 1e-6 * (1.0 + fd.abs()), "{:?}", spec.kind);
                    }
                }
            }
        }
    }

    #[test]
    fn sigma_star_values() {
        assert_eq!(sigma_star(&ModelSpec::hopf_bounded(0.0)).unwrap(), 0.5);
        assert_eq!(sigma_star(&ModelSpec::hopf_linear(0.0)).unwrap(), 0.5);
        assert!(sigma_star(&ModelSpec::three_cycles(1.0, 2.0, 3.0, 0.0)).is_err());
    }

    #[test]
    fn kind_round_trips_through_strings() {
        for k in ModelKind::ALL {
            assert_eq!(k.as_str().parse::<ModelKind>().unwrap(), k);
        }
        assert!("hopf".parse::<ModelKind>().is_err());
    }
}
