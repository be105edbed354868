//! Command dispatch: one experiment per invocation.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use log::{info, warn};
use oscillab_core::conditions::check_sufficient_conditions;
use oscillab_core::estimate::{
    cycle_coefficients, decompose_frequency, ensemble_frequency, estimate_measure, frequency_from_formula, sweep_sigma,
    EstimateError, FormulaOptions, FrequencyEstimate, MeasureOptions, MeasureOutcome, SweepOptions,
};
use oscillab_core::fokker_planck::{solve_stationary_fp_2d, FpOptions};
use oscillab_core::histogram::EstimatorKind;
use oscillab_core::phase_map::{CalibratedAnglePhaseMap, NumericPhaseMap, PhaseMap, PhaseMapKind};
use oscillab_core::sde::simulate_path;
use oscillab_core::tracking::{ito_decomposition, lift_phase};
use oscillab_core::zoo::{
    analytic_cycle, analytic_phase_map, build_model, predator_prey_equilibrium, Chart, ModelKind, ModelSpec,
};
use oscillab_core::{find_limit_cycle, LimitCycle, SdeModel, SimError};
use serde::Serialize;
use serde_json::json;

use crate::config::{Command, ExperimentConfig, PhaseMapChoice};
use crate::error::CliError;
use crate::output::{
    fmt_f64, write_cycle, write_histogram, write_measure, write_phase, write_survivors, write_sweep, write_trajectory,
    ArtifactDir,
};

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub threads: usize,
    pub seed: Option<u64>,
}

/// Result of [`run_experiment`]: the exit code and where the artifacts went.
#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub out_dir: Option<PathBuf>,
    pub error: Option<CliError>,
}

/// Parses, resolves and runs `command`, always writing `manifest.json` once the
/// output directory exists.
pub fn run_experiment(command: Command, config_text: &str, opts: &RunOptions) -> RunOutcome {
    let fail =
        |e: CliError, dir: Option<PathBuf>| RunOutcome { exit_code: e.exit_code(), out_dir: dir, error: Some(e) };
    let mut cfg = match crate::config::parse_config(config_text) {
        Ok(c) => c,
        Err(e) => return fail(e, None),
    };
    if let Err(e) = cfg.resolve(command, opts.seed) {
        return fail(e, None);
    }
    let root = opts
        .out_dir
        .clone()
        .or_else(|| cfg.output.dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(command.as_str()));
    cfg.output.dir = Some(root.display().to_string());
    let mut dir = match ArtifactDir::create(&root) {
        Ok(d) => d,
        Err(e) => return fail(e, None),
    };
    let mut ctx = Context { cfg: &cfg, workers: opts.threads.max(1), warnings: Vec::new() };
    let result = ctx.dispatch(command, &mut dir);
    if let Err(CliError::NoSurvivors { curve }) = &result {
        if let Err(e) = write_survivors(&mut dir, curve) {
            warn!("could not write the survivor curve: {e}");
        }
    }
    let (exit_code, status, message) = match &result {
        Ok(()) => (0, "ok", None),
        Err(e) => (e.exit_code(), "error", Some(e.to_string())),
    };
    let created = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let manifest = json!({
        "command": command.as_str(),
        "status": status,
        "exit_code": exit_code,
        "error": message,
        "warnings": ctx.warnings,
        "seed": cfg.integrator().seed,
        "threads": ctx.workers,
        "versions": { "oscillab": env!("CARGO_PKG_VERSION") },
        "created_unix_seconds": created,
        "artifacts": dir.written,
        "config": &cfg,
    });
    if let Err(e) = dir.json("manifest.json", &manifest) {
        return fail(e, Some(root));
    }
    RunOutcome { exit_code, out_dir: Some(root), error: result.err() }
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    workers: usize,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct FrequencyRow<'a> {
    method: &'a str,
    estimate: &'a FrequencyEstimate,
}

impl Context<'_> {
    fn dispatch(&mut self, command: Command, dir: &mut ArtifactDir) -> Result<(), CliError> {
        let spec = self.cfg.model_spec()?;
        let model = build_model(&spec)?;
        for w in self.cfg.integrator().validate(spec.sigma)? {
            self.warn(format!("{w:?}"));
        }
        info!("{} on {} (sigma = {})", command, spec.kind, spec.sigma);
        match command {
            Command::Simulate => self.simulate(&model, dir),
            Command::FindCycle => self.find_cycle(&spec, dir),
            Command::PhaseLift => self.phase_lift(&spec, &model, dir),
            Command::EstimateMeasure => {
                let m = self.measure(&model)?;
                write_measure(dir, &m.histogram, Some(&m.survivors))?;
                write_survivors(dir, &m.survivors)
            }
            Command::Frequency => self.frequency(&spec, &model, dir),
            Command::Sweep => self.sweep(&spec, &model, dir),
            Command::Decompose => self.decompose(&spec, &model, dir),
            Command::CheckConditions => {
                let report = check_sufficient_conditions(&spec)?;
                dir.json("conditions.json", &report)
            }
            Command::FpOracle => self.fp_oracle(&model, dir),
        }
    }

    fn warn(&mut self, msg: String) {
        warn!("{msg}");
        self.warnings.push(msg);
    }

    fn starts(&self) -> Vec<Vec<f64>> {
        vec![self.cfg.start(); self.cfg.experiment.n_paths]
    }

    fn measure(&self, model: &SdeModel) -> Result<MeasureOutcome, CliError> {
        let mut mo =
            MeasureOptions::new(self.cfg.grid(), self.cfg.experiment.estimator.unwrap_or(EstimatorKind::DiscardOnExit));
        mo.burn_in_fraction = self.cfg.experiment.burn_in_fraction;
        mo.workers = self.workers;
        Ok(estimate_measure(model, &self.starts(), &self.cfg.integrator(), &mo)?)
    }

    fn formula_options(&self) -> FormulaOptions {
        FormulaOptions {
            exclusion_radius: self.cfg.experiment.exclusion_radius,
            max_excluded_mass: self.cfg.experiment.max_excluded_mass,
        }
    }

    /// The cycle in the model's own chart: closed form when known, otherwise found numerically.
    fn cycle(&self, spec: &ModelSpec) -> Result<Arc<LimitCycle>, CliError> {
        if let Some(c) = analytic_cycle(spec, self.cfg.cycle.n_samples)? {
            return Ok(Arc::new(c));
        }
        let model = build_model(&spec.with_sigma(0.0))?;
        Ok(Arc::new(find_limit_cycle(&model, &spec.default_start(), &self.cfg.cycle.options())?))
    }

    fn phase_map(&self, spec: &ModelSpec, model: &SdeModel) -> Result<(Arc<dyn PhaseMap>, Arc<LimitCycle>), CliError> {
        let cycle = self.cycle(spec)?;
        let pm: Arc<dyn PhaseMap> = match self.cfg.experiment.phase_map {
            PhaseMapChoice::Analytic => match spec.kind {
                ModelKind::PredatorPrey => {
                    let e = predator_prey_equilibrium(&spec.params);
                    Arc::new(CalibratedAnglePhaseMap::new(&cycle, e)?)
                }
                _ => analytic_phase_map(spec, Some(&cycle))?,
            },
            PhaseMapChoice::Numeric => {
                if spec.kind == ModelKind::ThreeCycles && spec.chart == Chart::Polar {
                    return Err(CliError::Config(
                        "the numeric phase map needs a bounded state space; use chart = \"cartesian\"".into(),
                    ));
                }
                Arc::new(NumericPhaseMap::new(cycle.clone(), model))
            }
        };
        Ok((pm, cycle))
    }

    fn simulate(&mut self, model: &SdeModel, dir: &mut ArtifactDir) -> Result<(), CliError> {
        match simulate_path(model, &self.cfg.start(), &self.cfg.integrator()) {
            Ok(traj) => {
                write_trajectory(dir, &traj)?;
                dir.json(
                    "simulate.json",
                    &json!({
                        "samples": traj.len(),
                        "exited": traj.exited,
                        "exit_time": traj.exit_time,
                        "final_state": traj.last_state(),
                    }),
                )
            }
            Err(SimError::NumericalBlowup { time, partial, .. }) => {
                if let Some(p) = partial {
                    write_trajectory(dir, &p)?;
                }
                Err(CliError::Blowup { time })
            }
            Err(e) => Err(e.into()),
        }
    }

    fn find_cycle(&mut self, spec: &ModelSpec, dir: &mut ArtifactDir) -> Result<(), CliError> {
        // θ is unbounded in the polar chart, so the return map is built in (x, y)
        let search = if spec.kind == ModelKind::ThreeCycles {
            spec.with_chart(Chart::Cartesian).with_sigma(0.0)
        } else {
            spec.with_sigma(0.0)
        };
        let model = build_model(&search)?;
        let guess = if spec.kind == ModelKind::ThreeCycles || self.cfg.experiment.start.is_none() {
            search.default_start()
        } else {
            self.cfg.start()
        };
        let cycle = find_limit_cycle(&model, &guess, &self.cfg.cycle.options())?;
        write_cycle(dir, &cycle)?;
        let eq = search.equilibrium().unwrap_or_else(|| vec![0.0; search.dim()]);
        let (lo, hi) = cycle.bounds();
        dir.json(
            "cycle.json",
            &json!({
                "period": cycle.period(),
                "analytic_period": search.analytic_period(),
                "multiplier": cycle.multiplier(),
                "chart": search.chart,
                "n_samples": cycle.n_samples(),
                "centroid": cycle.centroid(),
                "bounds_lo": lo,
                "bounds_hi": hi,
                "interior_point": eq,
                "winding_around_interior_point": cycle.winding_around(&eq),
            }),
        )
    }

    fn phase_lift(&mut self, spec: &ModelSpec, model: &SdeModel, dir: &mut ArtifactDir) -> Result<(), CliError> {
        let (pm, _) = self.phase_map(spec, model)?;
        let traj = simulate_path(model, &self.cfg.start(), &self.cfg.integrator())?;
        write_trajectory(dir, &traj)?;
        let bf = self.cfg.branch_rule();
        let lp = lift_phase(&traj, pm.as_ref(), bf)?;
        write_phase(dir, &lp)?;
        let ito = ito_decomposition(&traj, pm.clone(), model, bf)?;
        let rows = (0..ito.times.len()).map(|i| {
            vec![
                fmt_f64(ito.times[i]),
                fmt_f64(ito.phase_increment[i]),
                fmt_f64(ito.drift_integral[i]),
                fmt_f64(ito.martingale[i]),
                fmt_f64(ito.martingale_direct[i]),
            ]
        });
        dir.csv("ito.csv", &["t", "phase_increment", "drift_integral", "martingale", "martingale_direct"], rows)?;
        let t = lp.valid_time();
        dir.json(
            "phase.json",
            &json!({
                "period": lp.period,
                "valid_time": t,
                "exited": traj.exited,
                "final_phi": lp.phi[lp.valid_until],
                "final_winding": lp.winding[lp.valid_until],
                "ambiguous_steps": lp.ambiguous_steps,
                "time_average_frequency": lp.time_average_frequency(t).ok(),
                "increment_frequency": lp.increment_frequency(t).ok(),
            }),
        )
    }

    fn frequency(&mut self, spec: &ModelSpec, model: &SdeModel, dir: &mut ArtifactDir) -> Result<(), CliError> {
        let (pm, _) = self.phase_map(spec, model)?;
        let e = &self.cfg.experiment;
        let run = ensemble_frequency(
            model,
            &pm,
            &self.starts(),
            &self.cfg.integrator(),
            self.workers,
            e.conditioning.unwrap_or(oscillab_core::estimate::Conditioning::SurvivorsOnly),
            self.cfg.branch_rule(),
        )?;
        write_survivors(dir, &run.survivors)?;
        let path_rows = run.paths.iter().enumerate().map(|(i, p)| {
            vec![
                i.to_string(),
                fmt_f64(p.frequency),
                fmt_f64(p.phi0),
                fmt_f64(p.phi),
                fmt_f64(p.valid_time),
                p.exit_time.map(fmt_f64).unwrap_or_default(),
                p.ambiguous_steps.to_string(),
            ]
        });
        dir.csv(
            "paths.csv",
            &["path", "frequency", "phi0", "phi", "valid_time", "exit_time", "ambiguous_steps"],
            path_rows,
        )?;
        let mut rows = vec![run.estimate.clone()];
        if e.formula {
            let m = self.measure(model)?;
            write_measure(dir, &m.histogram, Some(&m.survivors))?;
            let formula = match frequency_from_formula(&m.histogram, &pm, model, &self.formula_options()) {
                Ok(f) => Some(f),
                Err(EstimateError::SingularityDominated { excluded_mass, estimate }) => {
                    self.warn(format!("formula estimate dominated by the singularity (excluded mass {excluded_mass})"));
                    Some(*estimate)
                }
                Err(EstimateError::NoSmoothMass) => {
                    self.warn("no formula estimate: all mass lies in the singularity exclusion ball".into());
                    None
                }
                Err(err) => return Err(err.into()),
            };
            if let Some(mut f) = formula {
                f.t_used = self.cfg.integrator.t_end;
                f.n_paths = m.survivors.n_paths;
                f.survivor_fraction = m.survivors.final_fraction();
                rows.push(f);
            }
        }
        let sigma = spec.sigma;
        let csv_rows = rows.iter().map(|r| {
            vec![
                method_name(r),
                fmt_f64(sigma),
                fmt_f64(r.value),
                r.std_error.map(fmt_f64).unwrap_or_default(),
                fmt_f64(r.t_used),
                r.n_paths.to_string(),
                fmt_f64(r.survivor_fraction),
                r.excluded_mass.map(fmt_f64).unwrap_or_default(),
            ]
        });
        dir.csv(
            "frequency.csv",
            &["method", "sigma", "c_sigma", "std_error", "t_used", "n_paths", "survivor_fraction", "excluded_mass"],
            csv_rows,
        )?;
        let list: Vec<FrequencyRow> =
            rows.iter().map(|r| FrequencyRow { method: method_str(r), estimate: r }).collect();
        dir.json("frequency.json", &list)
    }

    fn sweep(&mut self, spec: &ModelSpec, model: &SdeModel, dir: &mut ArtifactDir) -> Result<(), CliError> {
        let (pm, cycle) = self.phase_map(spec, model)?;
        let e = &self.cfg.experiment;
        let sigmas = e.sigmas.clone().unwrap_or_default();
        let opts = SweepOptions {
            workers: self.workers,
            conditioning: e.conditioning.unwrap_or(oscillab_core::estimate::Conditioning::SurvivorsOnly),
            branch: self.cfg.branch_rule(),
        };
        let result = sweep_sigma(model, &pm, &sigmas, &self.starts(), &self.cfg.integrator(), &opts)?;
        write_sweep(dir, &result)?;
        for p in result.points.iter().filter(|p| p.dropped) {
            self.warn(format!("sigma = {} dropped: no surviving paths", p.sigma));
        }
        // small-noise prediction c₀ + σ²b₀ along the same cycle
        let prediction = if pm.kind() == PhaseMapKind::Isochron {
            cycle_coefficients(&cycle, &pm, model).ok().map(|(c0, b0)| {
                json!({
                    "c0": c0,
                    "b0": b0,
                    "slope_normalized": b0,
                    "slope": std::f64::consts::TAU * b0,
                    "measured_minus_predicted": result.fit.as_ref().map(|f| f.m - std::f64::consts::TAU * b0),
                })
            })
        } else {
            None
        };
        dir.json(
            "fit.json",
            &json!({
                "c0": result.c0,
                "units": { "m": "rad/time", "m_normalized": "rotations/time", "c_sigma": "rotations/time" },
                "m": result.fit.as_ref().map(|f| f.m),
                "m_normalized": result.fit.as_ref().map(|f| f.m_normalized),
                "m_std_error": result.fit.as_ref().map(|f| f.m_std_error),
                "p_free": result.fit.as_ref().and_then(|f| f.p_free),
                "p_free_std_error": result.fit.as_ref().and_then(|f| f.p_free_std_error),
                "residuals": result.fit.as_ref().map(|f| f.residuals.clone()).unwrap_or_default(),
                "gps_prediction": prediction,
            }),
        )
    }

    fn decompose(&mut self, spec: &ModelSpec, model: &SdeModel, dir: &mut ArtifactDir) -> Result<(), CliError> {
        let (pm, cycle) = self.phase_map(spec, model)?;
        let m = self.measure(model)?;
        write_measure(dir, &m.histogram, Some(&m.survivors))?;
        let report = decompose_frequency(&m.histogram, &cycle, &pm, model, &self.formula_options())?;
        let s2 = spec.sigma * spec.sigma;
        dir.json(
            "decomposition.json",
            &json!({
                "report": report,
                "gps_prediction": report.c0 + s2 * report.b0,
                "identity_gap": (report.total - report.formula_value).abs(),
            }),
        )
    }

    fn fp_oracle(&mut self, model: &SdeModel, dir: &mut ArtifactDir) -> Result<(), CliError> {
        let fp = &self.cfg.fp;
        let mut o = FpOptions::new(self.cfg.grid(), fp.boundary);
        o.epsilon = fp.epsilon;
        o.refine = fp.refine;
        let sol = solve_stationary_fp_2d(model, &o)?;
        write_histogram(dir, "fp_density.csv", &sol.histogram, true)?;
        let tv = if fp.compare_paths > 0 {
            let mut mo = MeasureOptions::new(self.cfg.grid(), EstimatorKind::LongPath);
            mo.burn_in_fraction = self.cfg.experiment.burn_in_fraction;
            mo.workers = self.workers;
            let starts = vec![self.cfg.start(); fp.compare_paths];
            let m = estimate_measure(model, &starts, &self.cfg.integrator(), &mo)?;
            write_measure(dir, &m.histogram, Some(&m.survivors))?;
            sol.histogram.total_variation(&m.histogram)
        } else {
            None
        };
        dir.json(
            "fp.json",
            &json!({
                "boundary": fp.boundary,
                "decay_rate": sol.decay_rate,
                "residual": sol.residual,
                "iterations": sol.iterations,
                "min_weight": sol.min_weight,
                "total_variation_vs_monte_carlo": tv,
            }),
        )
    }
}

fn method_str(r: &FrequencyEstimate) -> &'static str {
    use oscillab_core::estimate::Method;
    match r.method {
        Method::PathAverage => "path_average",
        Method::FormulaQuadrature => "formula_quadrature",
        Method::FpOracle => "fp_oracle",
    }
}

fn method_name(r: &FrequencyEstimate) -> String {
    method_str(r).to_string()
}
