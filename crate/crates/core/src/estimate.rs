//! Ergodic and quasi-ergodic measures, frequency estimators, the small-noise
//! decomposition and σ-sweeps.
//!
//! Frequencies are reported in rotations per unit time (normalized phase
//! `π₁ = π/T`). Sweep slopes are additionally reported in angular units
//! (radians per unit time), i.e. multiplied by `2π`.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::TAU;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use thiserror::Error;

use crate::cycle::LimitCycle;
use crate::histogram::{EstimatorKind, GridSpec, MeasureHistogram, MeasureKind, Occupation};
use crate::math::distance;
use crate::phase_map::{PhaseError, PhaseMap, PhaseMapKind};
use crate::rng::NoiseStream;
use crate::sde::{run_ensemble, IntegratorConfig, SdeModel, SimError, Stepper};
use crate::stats::{inverse_variance_weights, linear_fit, weighted_fit_through_origin, Welford};
use crate::tracking::{BranchRule, Generator, LiftedPhase, PhaseTracker, RecordPlan, TrackError};

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("no surviving paths (survivor curve: {curve:?})")]
    NoSurvivors { curve: SurvivorCurve },
    #[error("excluded mass {excluded_mass} near phase singularities exceeds the threshold")]
    SingularityDominated { excluded_mass: f64, estimate: Box<FrequencyEstimate> },
    #[error("all histogram mass lies where the phase map is singular or undefined")]
    NoSmoothMass,
    #[error("grid too coarse: the cycle meets only {bins_hit} bins (need 32)")]
    GridTooCoarse { bins_hit: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Phase(#[from] PhaseError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Method {
    PathAverage,
    FormulaQuadrature,
    FpOracle,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrequencyEstimate {
    /// Rotations per unit time.
    pub value: f64,
    pub method: Method,
    pub std_error: Option<f64>,
    pub t_used: f64,
    pub n_paths: usize,
    pub survivor_fraction: f64,
    /// Mass left out of a formula quadrature near singularities.
    pub excluded_mass: Option<f64>,
}

/// Number of paths still inside the basin at a set of times.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SurvivorCurve {
    pub n_paths: usize,
    pub times: Vec<f64>,
    pub survivors: Vec<usize>,
}

impl SurvivorCurve {
    pub fn from_exit_times(exit_times: &[Option<f64>], t_end: f64, points: usize) -> Self {
        let points = points.max(2);
        let times: Vec<f64> = (0..points).map(|k| t_end * k as f64 / (points - 1) as f64).collect();
        let survivors =
            times.iter().map(|&t| exit_times.iter().filter(|e| e.map_or(true, |te| te > t)).count()).collect();
        Self { n_paths: exit_times.len(), times, survivors }
    }

    pub fn final_fraction(&self) -> f64 {
        match self.survivors.last() {
            Some(&s) if self.n_paths > 0 => s as f64 / self.n_paths as f64,
            _ => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasureOptions {
    pub grid: GridSpec,
    pub estimator: EstimatorKind,
    /// Fraction of `t_end` discarded before occupation is recorded.
    pub burn_in_fraction: f64,
    pub workers: usize,
    pub survivor_points: usize,
}

impl MeasureOptions {
    pub fn new(grid: GridSpec, estimator: EstimatorKind) -> Self {
        Self { grid, estimator, burn_in_fraction: 0.1, workers: 1, survivor_points: 21 }
    }
}

#[derive(Clone, Debug)]
pub struct MeasureOutcome {
    pub histogram: MeasureHistogram,
    pub survivors: SurvivorCurve,
}

/// Occupation-measure estimate from an ensemble started at `x0s`.
///
/// * `LongPath`: time occupation of every path after burn-in (ergodic measure).
/// * `DiscardOnExit`: occupation of the paths that never exit, each path weighted
///   equally (empirical conditioning on survival).
/// * `FlemingViot`: particles in lockstep; an exiting particle restarts from the
///   state of a uniformly chosen survivor.
pub fn estimate_measure(
    model: &SdeModel,
    x0s: &[Vec<f64>],
    cfg: &IntegratorConfig,
    opts: &MeasureOptions,
) -> Result<MeasureOutcome, EstimateError> {
    if !opts.grid.is_valid() || opts.grid.dim() != model.dim() {
        return Err(EstimateError::InvalidInput("grid does not match the model".into()));
    }
    if x0s.is_empty() {
        return Err(EstimateError::InvalidInput("no start points".into()));
    }
    cfg.validate(model.sigma())?;
    let burn_in_step = (opts.burn_in_fraction.clamp(0.0, 1.0) * cfg.n_steps() as f64).floor() as u64;
    let burn_in = burn_in_step as f64 * cfg.dt;
    let (kind, mut hist, curve) = match opts.estimator {
        EstimatorKind::LongPath | EstimatorKind::DiscardOnExit => {
            let discard = opts.estimator == EstimatorKind::DiscardOnExit;
            let mut run_cfg = cfg.clone();
            if discard {
                run_cfg.stop_on_exit = true;
            }
            let results =
                run_ensemble(model, x0s, &run_cfg, opts.workers, |_| Occupation::new(opts.grid.clone(), burn_in_step));
            let mut exit_times = Vec::with_capacity(results.len());
            let mut hist = MeasureHistogram::empty(
                opts.grid.clone(),
                if discard { MeasureKind::QuasiErgodic } else { MeasureKind::Ergodic },
                opts.estimator,
            );
            let mut outside = 0u64;
            let mut samples = 0u64;
            for (outcome, occ) in results {
                let outcome = outcome?;
                exit_times.push(outcome.exit_time);
                if discard {
                    if outcome.exited || occ.samples() == 0 {
                        continue;
                    }
                    let n = occ.samples() as f64;
                    for (w, c) in hist.weights.iter_mut().zip(&occ.counts) {
                        *w += *c as f64 / n;
                    }
                } else {
                    for (w, c) in hist.weights.iter_mut().zip(&occ.counts) {
                        *w += *c as f64;
                    }
                }
                outside += occ.outside;
                samples += occ.samples();
            }
            let curve = SurvivorCurve::from_exit_times(&exit_times, cfg.t_end, opts.survivor_points);
            hist.total_samples = samples;
            hist.clipped_fraction = if samples > 0 { outside as f64 / samples as f64 } else { 0.0 };
            (hist.kind, hist, curve)
        }
        EstimatorKind::FlemingViot => {
            let (hist, curve) = fleming_viot(model, x0s, cfg, &opts.grid, burn_in_step, opts.survivor_points)?;
            (MeasureKind::QuasiErgodic, hist, curve)
        }
        _ => return Err(EstimateError::InvalidInput("estimator is not a Monte Carlo method".into())),
    };
    if !hist.normalize() {
        return Err(EstimateError::NoSurvivors { curve });
    }
    hist.kind = kind;
    hist.burn_in = burn_in;
    Ok(MeasureOutcome { histogram: hist, survivors: curve })
}

fn fleming_viot(
    model: &SdeModel,
    x0s: &[Vec<f64>],
    cfg: &IntegratorConfig,
    grid: &GridSpec,
    burn_in_step: u64,
    survivor_points: usize,
) -> Result<(MeasureHistogram, SurvivorCurve), EstimateError> {
    let n = x0s.len();
    let basin = model.basin().clone();
    for x in x0s {
        if !basin.contains(x) {
            return Err(SimError::InvalidStart(x.clone()).into());
        }
    }
    let mut states: Vec<Vec<f64>> = x0s.to_vec();
    let mut streams: Vec<NoiseStream> = (0..n).map(|i| NoiseStream::new(cfg.seed, i as u64)).collect();
    let mut chooser = NoiseStream::auxiliary(cfg.seed, 0);
    let mut stepper = Stepper::new(model);
    let mut occ = Occupation::new(grid.clone(), 0);
    let mut first_kill: Vec<Option<f64>> = alloc::vec![None; n];
    let mut alive = alloc::vec![true; n];
    let bound = model.blowup_bound();
    let steps = cfg.n_steps();
    for step in 1..=steps {
        let t = step as f64 * cfg.dt;
        for i in 0..n {
            stepper.step_random(model, &mut states[i], cfg.dt, &mut streams[i]);
            let x = &states[i];
            if !x.iter().all(|v| v.is_finite()) || crate::math::norm(x) > bound {
                return Err(SimError::NumericalBlowup { time: t, state: x.clone(), partial: None }.into());
            }
            alive[i] = basin.contains(x);
        }
        let survivors: Vec<usize> = (0..n).filter(|&i| alive[i]).collect();
        if survivors.is_empty() {
            let curve = SurvivorCurve::from_exit_times(&first_kill, cfg.t_end, survivor_points);
            return Err(EstimateError::NoSurvivors { curve });
        }
        for i in 0..n {
            if !alive[i] {
                if first_kill[i].is_none() {
                    first_kill[i] = Some(t);
                }
                let j = survivors[chooser.below(survivors.len())];
                let copy = states[j].clone();
                states[i] = copy;
            }
        }
        if step >= burn_in_step {
            for x in &states {
                occ.record(x);
            }
        }
    }
    let mut hist = MeasureHistogram::empty(grid.clone(), MeasureKind::QuasiErgodic, EstimatorKind::FlemingViot);
    for (w, c) in hist.weights.iter_mut().zip(&occ.counts) {
        *w = *c as f64;
    }
    hist.total_samples = occ.samples();
    hist.clipped_fraction = if occ.samples() > 0 { occ.outside as f64 / occ.samples() as f64 } else { 0.0 };
    let curve = SurvivorCurve::from_exit_times(&first_kill, cfg.t_end, survivor_points);
    Ok((hist, curve))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FormulaOptions {
    /// Radius of the exclusion ball around singularities; default two bin diagonals.
    pub exclusion_radius: Option<f64>,
    /// Excluded mass above which the estimate is flagged.
    pub max_excluded_mass: f64,
}

impl Default for FormulaOptions {
    fn default() -> Self {
        Self { exclusion_radius: None, max_excluded_mass: 0.05 }
    }
}

/// Per-bin integrand sums shared by the formula and the decomposition.
#[derive(Clone, Debug, PartialEq)]
struct Quadrature {
    /// `Σ w·π₁′V` over included bins.
    first: f64,
    /// `Σ w·Tr π₁″[B·,B·]` over included bins.
    second: f64,
    included: f64,
    excluded: f64,
}

impl Quadrature {
    fn mean_first(&self) -> f64 {
        self.first / self.included
    }
    fn mean_second(&self) -> f64 {
        self.second / self.included
    }
}

fn quadrature(
    hist: &MeasureHistogram,
    pm: &Arc<dyn PhaseMap>,
    model: &SdeModel,
    opts: &FormulaOptions,
) -> Result<Quadrature, EstimateError> {
    let radius = opts.exclusion_radius.unwrap_or(2.0 * hist.grid.bin_diagonal());
    let singular = pm.singularities();
    let period = pm.period();
    let mut gen = Generator::new(pm.clone(), model);
    let mut q = Quadrature { first: 0.0, second: 0.0, included: 0.0, excluded: 0.0 };
    for (flat, &w) in hist.weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let c = hist.grid.center(flat);
        let near = singular.iter().any(|s| distance(s, &c) < radius);
        if near || !model.basin().contains(&c) {
            q.excluded += w;
            continue;
        }
        match gen.terms(&c) {
            Ok((a, b)) => {
                q.first += w * a / period;
                q.second += w * b / period;
                q.included += w;
            }
            Err(_) => q.excluded += w,
        }
    }
    if !(q.included > 0.0) {
        return Err(EstimateError::NoSmoothMass);
    }
    Ok(q)
}

/// `Σ w·[π₁′V + (σ²/2) Tr π₁″[B·,B·]]` at bin centers, renormalized over the bins
/// kept outside the singularity exclusion balls.
pub fn frequency_from_formula(
    hist: &MeasureHistogram,
    pm: &Arc<dyn PhaseMap>,
    model: &SdeModel,
    opts: &FormulaOptions,
) -> Result<FrequencyEstimate, EstimateError> {
    let q = quadrature(hist, pm, model, opts)?;
    let s2 = model.sigma() * model.sigma();
    let estimate = FrequencyEstimate {
        value: q.mean_first() + 0.5 * s2 * q.mean_second(),
        method: Method::FormulaQuadrature,
        std_error: None,
        t_used: 0.0,
        n_paths: 0,
        survivor_fraction: 1.0,
        excluded_mass: Some(q.excluded),
    };
    if q.excluded > opts.max_excluded_mass {
        return Err(EstimateError::SingularityDominated { excluded_mass: q.excluded, estimate: Box::new(estimate) });
    }
    Ok(estimate)
}

/// Difference between the formula on `hist` and on its 2× coarsening, a proxy for
/// the bin-center quadrature error.
pub fn formula_quadrature_error(
    hist: &MeasureHistogram,
    pm: &Arc<dyn PhaseMap>,
    model: &SdeModel,
    opts: &FormulaOptions,
) -> Result<Option<f64>, EstimateError> {
    let coarse = match hist.coarsen(2) {
        Some(c) => c,
        None => return Ok(None),
    };
    let fine_opts = FormulaOptions {
        exclusion_radius: Some(opts.exclusion_radius.unwrap_or(2.0 * hist.grid.bin_diagonal())),
        ..opts.clone()
    };
    let coarse_opts = FormulaOptions {
        exclusion_radius: Some(opts.exclusion_radius.unwrap_or(2.0 * coarse.grid.bin_diagonal())),
        ..opts.clone()
    };
    let value = |h: &MeasureHistogram, o: &FormulaOptions| -> Result<f64, EstimateError> {
        match frequency_from_formula(h, pm, model, o) {
            Ok(e) => Ok(e.value),
            Err(EstimateError::SingularityDominated { estimate, .. }) => Ok(estimate.value),
            Err(e) => Err(e),
        }
    };
    Ok(Some((value(hist, &fine_opts)? - value(&coarse, &coarse_opts)?).abs()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Conditioning {
    None,
    SurvivorsOnly,
}

/// Mean and standard error of `φ(t)/(T t)` over an ensemble of lifted phases.
pub fn frequency_from_paths(
    paths: &[LiftedPhase],
    t_eval: f64,
    conditioning: Conditioning,
) -> Result<FrequencyEstimate, EstimateError> {
    let mut acc = Welford::new();
    for lp in paths {
        match lp.time_average_frequency(t_eval) {
            Ok(v) if lp.valid_time() >= t_eval * (1.0 - 1e-12) => acc.push(v),
            Ok(_) | Err(TrackError::PhaseUndefined(_)) if conditioning == Conditioning::SurvivorsOnly => {}
            Ok(_) => return Err(TrackError::PhaseUndefined(t_eval).into()),
            Err(e) => return Err(e.into()),
        }
    }
    if acc.n == 0 {
        let exits: Vec<Option<f64>> = paths.iter().map(|lp| Some(lp.valid_time())).collect();
        return Err(EstimateError::NoSurvivors { curve: SurvivorCurve::from_exit_times(&exits, t_eval, 21) });
    }
    Ok(FrequencyEstimate {
        value: acc.mean(),
        method: Method::PathAverage,
        std_error: Some(acc.std_error()),
        t_used: t_eval,
        n_paths: paths.len(),
        survivor_fraction: acc.n as f64 / paths.len() as f64,
        excluded_mass: None,
    })
}

/// Per-path result of [`ensemble_frequency`].
#[derive(Clone, Debug, PartialEq)]
pub struct PathFrequency {
    pub frequency: f64,
    pub phi0: f64,
    pub phi: f64,
    pub valid_time: f64,
    pub exit_time: Option<f64>,
    /// Branch-threshold steps tolerated near a phase singularity.
    pub ambiguous_steps: usize,
}

#[derive(Clone, Debug)]
pub struct EnsembleFrequency {
    pub estimate: FrequencyEstimate,
    pub paths: Vec<PathFrequency>,
    pub survivors: SurvivorCurve,
}

/// Integrates an ensemble while lifting phases on the fly and averages
/// `φ(t_end)/(T t_end)` over the (conditioned) paths.
pub fn ensemble_frequency(
    model: &SdeModel,
    pm: &Arc<dyn PhaseMap>,
    x0s: &[Vec<f64>],
    cfg: &IntegratorConfig,
    workers: usize,
    conditioning: Conditioning,
    branch: BranchRule,
) -> Result<EnsembleFrequency, EstimateError> {
    if x0s.is_empty() {
        return Err(EstimateError::InvalidInput("no start points".into()));
    }
    let mut run_cfg = cfg.clone();
    run_cfg.stop_on_exit = true;
    let results =
        run_ensemble(model, x0s, &run_cfg, workers, |_| PhaseTracker::new(pm.clone(), branch, RecordPlan::none()));
    let t_end = cfg.n_steps() as f64 * cfg.dt;
    let mut acc = Welford::new();
    let mut paths = Vec::with_capacity(results.len());
    let mut exits = Vec::with_capacity(results.len());
    for (outcome, tracker) in results {
        let outcome = outcome?;
        if let Some(e) = tracker.error {
            return Err(e.into());
        }
        exits.push(outcome.exit_time);
        let survived = !outcome.exited;
        if survived {
            acc.push(tracker.frequency());
        } else if conditioning == Conditioning::None {
            return Err(TrackError::PhaseUndefined(t_end).into());
        }
        paths.push(PathFrequency {
            frequency: tracker.frequency(),
            phi0: tracker.phi0(),
            phi: tracker.phi(),
            valid_time: tracker.last_time(),
            exit_time: outcome.exit_time,
            ambiguous_steps: tracker.ambiguous_steps,
        });
    }
    let survivors = SurvivorCurve::from_exit_times(&exits, cfg.t_end, 21);
    if acc.n == 0 {
        return Err(EstimateError::NoSurvivors { curve: survivors });
    }
    Ok(EnsembleFrequency {
        estimate: FrequencyEstimate {
            value: acc.mean(),
            method: Method::PathAverage,
            std_error: Some(acc.std_error()),
            t_used: t_end,
            n_paths: paths.len(),
            survivor_fraction: acc.n as f64 / paths.len() as f64,
            excluded_mass: None,
        },
        paths,
        survivors,
    })
}

/// `c_σ = c₀ + a_σ + σ²(b₀ + b_σ)` with `μ_σ = μ₀ + ν_σ`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecompositionReport {
    pub sigma: f64,
    pub c0: f64,
    pub a_sigma: f64,
    pub b0: f64,
    pub b_sigma: f64,
    /// `c₀ + a_σ + σ²(b₀ + b_σ)`.
    pub total: f64,
    /// The formula quadrature on the same histogram.
    pub formula_value: f64,
    pub phase_map_kind: PhaseMapKind,
    pub excluded_mass: f64,
    /// Total variation of `ν_σ` with `μ₀` binned onto the histogram grid.
    pub nu_total_variation: f64,
    pub cycle_bins: usize,
}

/// `(c₀, b₀)`: cycle averages of `π₁′V` and `½ Tr π₁″[B·,B·]`.
pub fn cycle_coefficients(
    cycle: &LimitCycle,
    pm: &Arc<dyn PhaseMap>,
    model: &SdeModel,
) -> Result<(f64, f64), EstimateError> {
    let mut gen = Generator::new(pm.clone(), model);
    let period = pm.period();
    let n = cycle.n_samples();
    let (mut c0, mut b0) = (0.0, 0.0);
    for i in 0..n {
        let (a, b) = gen.terms(cycle.sample(i))?;
        c0 += a / period;
        b0 += 0.5 * b / period;
    }
    Ok((c0 / n as f64, b0 / n as f64))
}

/// Splits the formula frequency of `hist` into the cycle part (`c₀`, `b₀`) and the
/// deformation part (`a_σ`, `b_σ`). `μ₀` enters through its cycle samples, so the
/// regrouping reproduces the formula value up to rounding.
pub fn decompose_frequency(
    hist: &MeasureHistogram,
    cycle: &LimitCycle,
    pm: &Arc<dyn PhaseMap>,
    model: &SdeModel,
    opts: &FormulaOptions,
) -> Result<DecompositionReport, EstimateError> {
    let mut bins_hit: Vec<usize> = (0..cycle.n_samples()).filter_map(|i| hist.grid.index(cycle.sample(i))).collect();
    bins_hit.sort_unstable();
    bins_hit.dedup();
    if bins_hit.len() < 32 {
        return Err(EstimateError::GridTooCoarse { bins_hit: bins_hit.len() });
    }
    let (c0, b0) = cycle_coefficients(cycle, pm, model)?;
    let q = quadrature(hist, pm, model, opts)?;
    let s2 = model.sigma() * model.sigma();
    let first = q.mean_first();
    let second = q.mean_second();
    let a_sigma = first - c0;
    let b_sigma = 0.5 * second - b0;
    let mut nu = hist.weights.clone();
    let n = cycle.n_samples();
    for i in 0..n {
        if let Some(k) = hist.grid.index(cycle.sample(i)) {
            nu[k] -= 1.0 / n as f64;
        }
    }
    Ok(DecompositionReport {
        sigma: model.sigma(),
        c0,
        a_sigma,
        b0,
        b_sigma,
        total: c0 + a_sigma + s2 * (b0 + b_sigma),
        formula_value: first + 0.5 * s2 * second,
        phase_map_kind: pm.kind(),
        excluded_mass: q.excluded,
        nu_total_variation: 0.5 * nu.iter().map(|v| v.abs()).sum::<f64>(),
        cycle_bins: bins_hit.len(),
    })
}

/// Binned `μ₀`: the cycle's uniform-in-time measure deposited on `grid`.
pub fn cycle_measure(cycle: &LimitCycle, grid: &GridSpec) -> MeasureHistogram {
    let mut h = MeasureHistogram::empty(grid.clone(), MeasureKind::Ergodic, EstimatorKind::CycleLine);
    let n = cycle.n_samples();
    for i in 0..n {
        if let Some(k) = grid.index(cycle.sample(i)) {
            h.weights[k] += 1.0 / n as f64;
        }
    }
    h.total_samples = n as u64;
    h
}

/// Small-noise prediction `c₀ + σ² b₀`.
pub fn gps_prediction(
    cycle: &LimitCycle,
    pm: &Arc<dyn PhaseMap>,
    model: &SdeModel,
    sigma: f64,
) -> Result<f64, EstimateError> {
    let (c0, b0) = cycle_coefficients(cycle, pm, model)?;
    Ok(c0 + sigma * sigma * b0)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepPoint {
    pub sigma: f64,
    pub c_sigma: f64,
    pub std_error: f64,
    pub n_survivors: usize,
    pub n_paths: usize,
    /// Set when the point produced no survivors and was left out of the fit.
    pub dropped: bool,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepFit {
    /// Slope of `c_σ − c₀` against `σ²` in radians per unit time.
    pub m: f64,
    /// The same slope in rotations per unit time.
    pub m_normalized: f64,
    pub m_std_error: f64,
    /// Exponent of a free power-law fit `|c_σ − c₀| = k σ^p`, when it can be formed.
    pub p_free: Option<f64>,
    pub p_free_std_error: Option<f64>,
    /// `c_σ − c₀ − m_normalized·σ²` per fitted point.
    pub residuals: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepResult {
    pub c0: f64,
    pub points: Vec<SweepPoint>,
    pub fit: Option<SweepFit>,
}

/// Fits `c_σ − c₀ = m σ²` (weighted by `1/se²`, through the origin) and a free
/// exponent on the points with `σ > 0` that were not dropped.
pub fn fit_sweep(c0: f64, points: &[SweepPoint]) -> Option<SweepFit> {
    let used: Vec<&SweepPoint> = points.iter().filter(|p| !p.dropped && p.sigma > 0.0).collect();
    if used.is_empty() {
        return None;
    }
    let x: Vec<f64> = used.iter().map(|p| p.sigma * p.sigma).collect();
    let y: Vec<f64> = used.iter().map(|p| p.c_sigma - c0).collect();
    let se: Vec<f64> = used.iter().map(|p| p.std_error).collect();
    let w = inverse_variance_weights(&se);
    let fit = weighted_fit_through_origin(&x, &y, &w)?;
    let m_std_error = {
        // scale the formal error by the reduced chi-square when it exceeds one
        let chi2: f64 = fit.residuals.iter().zip(&w).map(|(r, wi)| r * r * wi).sum();
        let dof = (used.len() as f64 - 1.0).max(1.0);
        fit.m_std_error * (chi2 / dof).max(1.0).sqrt()
    };
    let (p_free, p_free_std_error) = {
        let logs: Vec<(f64, f64)> =
            used.iter().zip(&y).filter(|(_, dy)| dy.abs() > 0.0).map(|(p, dy)| (p.sigma.ln(), dy.abs().ln())).collect();
        let (lx, ly): (Vec<f64>, Vec<f64>) = logs.into_iter().unzip();
        match linear_fit(&lx, &ly) {
            Some(f) if lx.len() > 2 => (Some(f.slope), Some(f.slope_std_error)),
            Some(f) => (Some(f.slope), None),
            None => (None, None),
        }
    };
    Some(SweepFit {
        m: TAU * fit.m,
        m_normalized: fit.m,
        m_std_error: TAU * m_std_error,
        p_free,
        p_free_std_error,
        residuals: fit.residuals,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOptions {
    pub workers: usize,
    pub conditioning: Conditioning,
    pub branch: BranchRule,
}

/// Estimates `c_σ` on a σ grid. `c₀` comes from a deterministic run with the same
/// step size, so the Euler bias of the rotation rate cancels in `c_σ − c₀`.
pub fn sweep_sigma(
    model: &SdeModel,
    pm: &Arc<dyn PhaseMap>,
    sigmas: &[f64],
    x0s: &[Vec<f64>],
    cfg: &IntegratorConfig,
    opts: &SweepOptions,
) -> Result<SweepResult, EstimateError> {
    if sigmas.windows(2).any(|w| !(w[1] > w[0])) || sigmas.iter().any(|s| !(*s >= 0.0)) {
        return Err(EstimateError::InvalidInput("sigma grid must be nonnegative and ascending".into()));
    }
    let deterministic = model.deterministic();
    let c0_run = ensemble_frequency(&deterministic, pm, &x0s[..1], cfg, 1, Conditioning::None, opts.branch)?;
    let c0 = c0_run.estimate.value;
    let mut points = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        let point = if sigma == 0.0 {
            SweepPoint {
                sigma,
                c_sigma: c0,
                std_error: 0.0,
                n_survivors: x0s.len(),
                n_paths: x0s.len(),
                dropped: false,
            }
        } else {
            let m = model.with_sigma(sigma);
            match ensemble_frequency(&m, pm, x0s, cfg, opts.workers, opts.conditioning, opts.branch) {
                Ok(run) => SweepPoint {
                    sigma,
                    c_sigma: run.estimate.value,
                    std_error: run.estimate.std_error.unwrap_or(0.0),
                    n_survivors: (run.estimate.survivor_fraction * x0s.len() as f64).round() as usize,
                    n_paths: x0s.len(),
                    dropped: false,
                },
                Err(EstimateError::NoSurvivors { .. }) => SweepPoint {
                    sigma,
                    c_sigma: f64::NAN,
                    std_error: f64::NAN,
                    n_survivors: 0,
                    n_paths: x0s.len(),
                    dropped: true,
                },
                Err(e) => return Err(e),
            }
        };
        points.push(point);
    }
    let fit = fit_sweep(c0, &points);
    Ok(SweepResult { c0, points, fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_map::RayPhaseMap;
    use crate::zoo::{analytic_cycle, build_model, ModelSpec};

    fn hopf_map() -> Arc<dyn PhaseMap> {
        Arc::new(RayPhaseMap::isochron([0.0, 0.0], TAU))
    }

    #[test]
    fn cycle_measure_gives_inverse_period() {
        let spec = ModelSpec::hopf_bounded(0.0);
        let model = build_model(&spec).unwrap();
        let cycle = analytic_cycle(&spec, 2048).unwrap().unwrap();
        let hist = cycle_measure(&cycle, &GridSpec::square(1.5, 64));
        let est = frequency_from_formula(&hist, &hopf_map(), &model, &FormulaOptions::default()).unwrap();
        assert!((est.value - 1.0 / TAU).abs() < 1e-12);
    }

    #[test]
    fn sweep_with_only_zero_has_no_fit() {
        let model = build_model(&ModelSpec::hopf_bounded(0.0)).unwrap();
        let cfg = IntegratorConfig::new(0.01, 10.0, 1);
        let opts = SweepOptions { workers: 1, conditioning: Conditioning::None, branch: BranchRule::default() };
        let r = sweep_sigma(&model, &hopf_map(), &[0.0], &[alloc::vec![1.0, 0.0]], &cfg, &opts).unwrap();
        assert!(r.fit.is_none());
        assert_eq!(r.points.len(), 1);
        assert_eq!(r.points[0].c_sigma, r.c0);
    }

    #[test]
    fn fit_recovers_exact_quadratic() {
        let pts: Vec<SweepPoint> = [0.1, 0.2, 0.3]
            .iter()
            .map(|&s| SweepPoint {
                sigma: s,
                c_sigma: 1.0 + 0.05 * s * s,
                std_error: 1e-4,
                n_survivors: 4,
                n_paths: 4,
                dropped: false,
            })
            .collect();
        let f = fit_sweep(1.0, &pts).unwrap();
        assert!((f.m_normalized - 0.05).abs() < 1e-9);
        assert!((f.m - 0.05 * TAU).abs() < 1e-9);
        assert!((f.p_free.unwrap() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn survivor_curve_counts_exits() {
        let c = SurvivorCurve::from_exit_times(&[None, Some(0.5), Some(2.0)], 2.0, 3);
        assert_eq!(c.survivors, alloc::vec![3, 2, 1]);
        assert!((c.final_fraction() - 1.0 / 3.0).abs() < 1e-15);
    }
}
