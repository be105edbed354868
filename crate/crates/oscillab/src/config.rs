//! Experiment configuration files (TOML).
//!
//! Every table rejects unknown keys. [`ExperimentConfig::resolve`] fills the
//! model-dependent defaults so the manifest can echo the exact settings used.

use std::fmt;
use std::str::FromStr;

use oscillab_core::estimate::Conditioning;
use oscillab_core::fokker_planck::Boundary;
use oscillab_core::histogram::{EstimatorKind, GridSpec};
use oscillab_core::tracking::BranchRule;
use oscillab_core::zoo::{Chart, ModelKind, ModelSpec, NoiseVariant};
use oscillab_core::{CycleOptions, IntegratorConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    FindCycle,
    PhaseLift,
    EstimateMeasure,
    Frequency,
    Sweep,
    Decompose,
    CheckConditions,
    FpOracle,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Simulate,
        Command::FindCycle,
        Command::PhaseLift,
        Command::EstimateMeasure,
        Command::Frequency,
        Command::Sweep,
        Command::Decompose,
        Command::CheckConditions,
        Command::FpOracle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::FindCycle => "find-cycle",
            Command::PhaseLift => "phase-lift",
            Command::EstimateMeasure => "estimate-measure",
            Command::Frequency => "frequency",
            Command::Sweep => "sweep",
            Command::Decompose => "decompose",
            Command::CheckConditions => "check-conditions",
            Command::FpOracle => "fp-oracle",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Command::ALL.into_iter().find(|c| c.as_str() == s).ok_or_else(|| format!("unknown command `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    #[serde(default)]
    pub sigma: f64,
    /// `[a, b, c]` for three_cycles, `[a, b, c, d]` for predator_prey.
    #[serde(default)]
    pub params: Option<Vec<f64>>,
    #[serde(default)]
    pub noise: Option<NoiseVariant>,
    #[serde(default)]
    pub chart: Option<Chart>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "one")]
    pub record_stride: usize,
    #[serde(default = "yes")]
    pub stop_on_exit: bool,
    #[serde(default)]
    pub refine_exit: bool,
}

fn one() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn default_paths() -> usize {
    16
}
fn default_burn_in() -> f64 {
    0.1
}
fn default_branch() -> f64 {
    oscillab_core::tracking::DEFAULT_BRANCH_FRACTION
}
fn default_excluded() -> f64 {
    0.05
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMapChoice {
    /// Closed-form map of the model (angle-calibrated for predator_prey).
    #[default]
    Analytic,
    /// Isochron map from asymptotic-phase integration (slow).
    Numeric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// Optional; must name the command being run when present.
    #[serde(default)]
    pub kind: Option<Command>,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default)]
    pub start: Option<Vec<f64>>,
    #[serde(default)]
    pub sigmas: Option<Vec<f64>>,
    #[serde(default)]
    pub estimator: Option<EstimatorKind>,
    #[serde(default)]
    pub conditioning: Option<Conditioning>,
    #[serde(default = "default_burn_in")]
    pub burn_in_fraction: f64,
    #[serde(default = "default_branch")]
    pub branch_fraction: f64,
    /// Radius of the ball around phase singularities inside which branch-threshold
    /// steps are tolerated (0 makes every such step an error).
    #[serde(default)]
    pub singularity_radius: f64,
    #[serde(default)]
    pub phase_map: PhaseMapChoice,
    /// `frequency` only: also evaluate the formula on an estimated measure.
    #[serde(default)]
    pub formula: bool,
    #[serde(default = "default_excluded")]
    pub max_excluded_mass: f64,
    #[serde(default)]
    pub exclusion_radius: Option<f64>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        toml::from_str("").expect("all experiment keys have defaults")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub bins: Vec<usize>,
    #[serde(default)]
    pub periodic: Option<Vec<bool>>,
}

impl GridSection {
    pub fn to_grid(&self) -> GridSpec {
        let mut g = GridSpec::new(self.lo.clone(), self.hi.clone(), self.bins.clone());
        if let Some(p) = &self.periodic {
            g.periodic = p.clone();
        }
        g
    }

    fn from_grid(g: &GridSpec) -> Self {
        Self { lo: g.lo.clone(), hi: g.hi.clone(), bins: g.bins.clone(), periodic: Some(g.periodic.clone()) }
    }
}

fn default_boundary() -> Boundary {
    Boundary::ReflectingAtWindow
}
fn default_epsilon() -> f64 {
    1e-6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FpSection {
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "one")]
    pub refine: usize,
    /// When positive, also estimate the measure from this many long paths and
    /// report the total-variation distance.
    #[serde(default)]
    pub compare_paths: usize,
}

impl Default for FpSection {
    fn default() -> Self {
        toml::from_str("").expect("all fp keys have defaults")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleSection {
    pub transient: f64,
    pub max_return_time: f64,
    pub tol: f64,
    pub n_samples: usize,
}

impl Default for CycleSection {
    fn default() -> Self {
        let o = CycleOptions::default();
        Self { transient: o.transient, max_return_time: o.max_return_time, tol: o.tol, n_samples: o.n_samples }
    }
}

impl CycleSection {
    pub fn options(&self) -> CycleOptions {
        CycleOptions {
            transient: self.transient,
            max_return_time: self.max_return_time,
            tol: self.tol,
            n_samples: self.n_samples,
            ..CycleOptions::default()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub fp: FpSection,
    #[serde(default)]
    pub cycle: CycleSection,
    #[serde(default)]
    pub output: OutputSection,
}

pub const DEFAULT_SEED: u64 = 0;

/// Parses a configuration; errors carry the line and column of the offending key.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn model_spec(&self) -> Result<ModelSpec, CliError> {
        let mut spec = ModelSpec::new(self.model.kind, self.model.sigma);
        if let Some(p) = &self.model.params {
            let want = match self.model.kind {
                ModelKind::ThreeCycles => 3,
                ModelKind::PredatorPrey => 4,
                _ => 0,
            };
            if p.len() != want {
                return Err(CliError::Config(format!(
                    "model.params for {} takes {} values, got {}",
                    self.model.kind,
                    want,
                    p.len()
                )));
            }
            spec.params[..want].copy_from_slice(p);
        }
        if let Some(n) = self.model.noise {
            spec.noise = n;
        }
        if let Some(c) = self.model.chart {
            spec.chart = c;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig {
            dt: self.integrator.dt,
            t_end: self.integrator.t_end,
            seed: self.integrator.seed.unwrap_or(DEFAULT_SEED),
            record_stride: self.integrator.record_stride,
            stop_on_exit: self.integrator.stop_on_exit,
            refine_exit: self.integrator.refine_exit,
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid.as_ref().expect("resolved config has a grid").to_grid()
    }

    pub fn branch_rule(&self) -> BranchRule {
        BranchRule::new(self.experiment.branch_fraction).with_singularity_radius(self.experiment.singularity_radius)
    }

    pub fn start(&self) -> Vec<f64> {
        self.experiment.start.clone().expect("resolved config has a start")
    }

    /// Checks constraints against `command` and fills every defaulted field.
    pub fn resolve(&mut self, command: Command, seed_override: Option<u64>) -> Result<(), CliError> {
        if let Some(k) = self.experiment.kind {
            if k != command {
                return Err(CliError::Config(format!("experiment.kind is `{k}` but the command is `{command}`")));
            }
        }
        self.experiment.kind = Some(command);
        let spec = self.model_spec()?;
        self.model.params = match spec.kind {
            ModelKind::ThreeCycles => Some(spec.params[..3].to_vec()),
            ModelKind::PredatorPrey => Some(spec.params.to_vec()),
            _ => None,
        };
        if spec.kind == ModelKind::PredatorPrey {
            self.model.noise = Some(spec.noise);
        }
        if spec.kind == ModelKind::ThreeCycles {
            self.model.chart = Some(spec.chart);
        }
        if let Some(s) = seed_override {
            self.integrator.seed = Some(s);
        }
        self.integrator.seed.get_or_insert(DEFAULT_SEED);
        let ic = self.integrator();
        ic.validate(spec.sigma)?;
        let e = &mut self.experiment;
        if e.n_paths == 0 {
            return Err(CliError::Config("experiment.n_paths must be positive".into()));
        }
        if !(0.0..1.0).contains(&e.burn_in_fraction) {
            return Err(CliError::Config("experiment.burn_in_fraction must lie in [0, 1)".into()));
        }
        if !(e.branch_fraction > 0.0 && e.branch_fraction <= 0.5) {
            return Err(CliError::Config("experiment.branch_fraction must lie in (0, 0.5]".into()));
        }
        if !(e.singularity_radius >= 0.0 && e.singularity_radius.is_finite()) {
            return Err(CliError::Config("experiment.singularity_radius must be finite and nonnegative".into()));
        }
        let start = e.start.get_or_insert_with(|| spec.default_start());
        if start.len() != spec.dim() {
            return Err(CliError::Config(format!("experiment.start needs {} coordinates", spec.dim())));
        }
        e.estimator.get_or_insert(EstimatorKind::DiscardOnExit);
        if matches!(e.estimator, Some(EstimatorKind::CycleLine | EstimatorKind::FokkerPlanck)) {
            return Err(CliError::Config(
                "experiment.estimator must be long_path, discard_on_exit or fleming_viot".into(),
            ));
        }
        e.conditioning.get_or_insert(Conditioning::SurvivorsOnly);
        if command == Command::Sweep {
            let s = e.sigmas.as_ref().ok_or_else(|| CliError::Config("sweep needs experiment.sigmas".into()))?;
            if s.is_empty() || s.windows(2).any(|w| !(w[1] > w[0])) || s.iter().any(|v| !(*v >= 0.0)) {
                return Err(CliError::Config("experiment.sigmas must be nonempty, nonnegative and ascending".into()));
            }
        }
        let grid = match &self.grid {
            Some(g) => g.to_grid(),
            None => default_grid(&spec),
        };
        if !grid.is_valid() || grid.dim() != spec.dim() {
            return Err(CliError::Config("grid must have lo < hi, positive bins and the model dimension".into()));
        }
        self.grid = Some(GridSection::from_grid(&grid));
        if self.fp.refine == 0 {
            return Err(CliError::Config("fp.refine must be positive".into()));
        }
        Ok(())
    }
}

/// Histogram window used when the config has no `[grid]` table.
pub fn default_grid(spec: &ModelSpec) -> GridSpec {
    match spec.kind {
        ModelKind::ThreeCycles => {
            let [a, _, c, _] = spec.params;
            match spec.chart {
                Chart::Polar => {
                    GridSpec::new(vec![a, 0.0], vec![c, std::f64::consts::TAU], vec![64, 64]).with_periodic(1)
                }
                Chart::Cartesian => GridSpec::square(c, 64),
            }
        }
        ModelKind::PredatorPrey => GridSpec::new(vec![0.0, 0.0], vec![4.0, 20.0], vec![128, 128]),
        _ => GridSpec::square(2.0, 64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [model]
        kind = "hopf_bounded"
        sigma = 0.2

        [integrator]
        dt = 0.0025
        t_end = 100.0

        [experiment]
        sigmas = [0.1, 0.2]
    "#;

    #[test]
    fn minimal_sweep_resolves_defaults() {
        let mut cfg = parse_config(MINIMAL).unwrap();
        cfg.resolve(Command::Sweep, None).unwrap();
        assert_eq!(cfg.integrator.seed, Some(DEFAULT_SEED));
        assert_eq!(cfg.experiment.n_paths, 16);
        assert_eq!(cfg.experiment.start, Some(vec![1.0, 0.0]));
        assert_eq!(cfg.grid().bins, vec![64, 64]);
        assert_eq!(cfg.experiment.kind, Some(Command::Sweep));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("t_end = 100.0", "t_end = 100.0\ntend = 3");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("tend"), "{err}");
    }

    #[test]
    fn three_cycles_ordering_error() {
        let text = r#"
            [model]
            kind = "three_cycles"
            params = [3.0, 2.0, 4.0]
            [integrator]
            dt = 0.002
            t_end = 10.0
        "#;
        let mut cfg = parse_config(text).unwrap();
        let err = cfg.resolve(Command::Frequency, None).unwrap_err();
        assert!(err.to_string().contains("a < b < c"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn kind_must_match_command() {
        let text = MINIMAL.replace("[experiment]", "[experiment]\nkind = \"frequency\"");
        let mut cfg = parse_config(&text).unwrap();
        assert!(cfg.resolve(Command::Sweep, None).is_err());
    }

    #[test]
    fn seed_override_wins() {
        let mut cfg = parse_config(MINIMAL).unwrap();
        cfg.resolve(Command::Sweep, Some(99)).unwrap();
        assert_eq!(cfg.integrator().seed, 99);
    }
}
