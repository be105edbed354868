//! Acceptance run: one PASS/FAIL line per criterion with the measured values.
//!
//! Failures are reported but only turn into a nonzero exit status when
//! `ACCEPTANCE_STRICT=1`. Set `ACCEPTANCE_OUT` to keep the sweep artifacts.

use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use oscillab::{run_experiment, Command, RunOptions};
use oscillab_core::basin::WholeSpace;
use oscillab_core::conditions::{check_sufficient_conditions, Verdict};
use oscillab_core::estimate::{
    decompose_frequency, ensemble_frequency, estimate_measure, frequency_from_formula, Conditioning, FormulaOptions,
    MeasureOptions,
};
use oscillab_core::fokker_planck::{solve_stationary_fp_2d, Boundary, FpOptions};
use oscillab_core::histogram::EstimatorKind;
use oscillab_core::phase_map::{check_isochron_invariance, NumericPhaseMap};
use oscillab_core::rng::NoiseStream;
use oscillab_core::sde::run_ensemble;
use oscillab_core::stats::{linear_fit, Welford};
use oscillab_core::tracking::{BranchRule, ItoTracker, RecordPlan};
use oscillab_core::zoo::{
    analytic_cycle, analytic_phase_map, build_model, predator_prey_equilibrium, Chart, ModelSpec, NoiseVariant,
};
use oscillab_core::{find_limit_cycle, CycleOptions, GridSpec, IntegratorConfig, SdeModel, VectorField};
use serde_json::Value;

type Outcome = Result<(bool, String), String>;

struct Report {
    passed: usize,
    failed: usize,
}

impl Report {
    fn run(&mut self, name: &str, budget: Option<Duration>, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok((ok, detail)) => (ok, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = budget.map_or(true, |b| elapsed <= b);
        let budget_note = match budget {
            Some(b) if !in_time => format!(", over the {:.0} s budget", b.as_secs_f64()),
            _ => String::new(),
        };
        let pass = ok && in_time;
        if pass {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        println!(
            "{} {name}: {detail} [{:.1} s{budget_note}]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
}

fn workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn out_root() -> (PathBuf, Option<tempfile::TempDir>) {
    match std::env::var_os("ACCEPTANCE_OUT") {
        Some(dir) => (PathBuf::from(dir), None),
        None => {
            let tmp = tempfile::tempdir().expect("temporary directory");
            (tmp.path().to_path_buf(), Some(tmp))
        }
    }
}

fn run_preset(name: &str, out: &Path) -> Result<Value, String> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/presets/desk").join(format!("{name}.toml"));
    let text = std::fs::read_to_string(&path).map_err(err)?;
    let opts = RunOptions { out_dir: Some(out.join(name)), threads: workers(), seed: None };
    let outcome = run_experiment(Command::Sweep, &text, &opts);
    if outcome.exit_code != 0 {
        return Err(format!("exit {}: {:?}", outcome.exit_code, outcome.error));
    }
    let fit = std::fs::read_to_string(out.join(name).join("fit.json")).map_err(err)?;
    serde_json::from_str(&fit).map_err(err)
}

fn frequency_via_cli(config: &str, out: &Path) -> Result<f64, String> {
    let opts = RunOptions { out_dir: Some(out.to_path_buf()), threads: 1, seed: None };
    let outcome = run_experiment(Command::Frequency, config, &opts);
    if outcome.exit_code != 0 {
        return Err(format!("exit {}: {:?}", outcome.exit_code, outcome.error));
    }
    let mut rdr = csv::Reader::from_path(out.join("frequency.csv")).map_err(err)?;
    let headers = rdr.headers().map_err(err)?.clone();
    let col = headers.iter().position(|h| h == "c_sigma").ok_or("no c_sigma column")?;
    let row = rdr.records().next().ok_or("empty frequency.csv")?.map_err(err)?;
    row[col].parse().map_err(err)
}

fn baselines(out: &Path) -> Outcome {
    let hopf = frequency_via_cli(
        "[model]\nkind = \"hopf_bounded\"\n[integrator]\ndt = 0.001\nt_end = 400.0\n[experiment]\nn_paths = 1\n",
        &out.join("baseline-hopf"),
    )?;
    let three = frequency_via_cli(
        "[model]\nkind = \"three_cycles\"\nparams = [1.0, 2.0, 3.0]\n[integrator]\ndt = 0.001\nt_end = 400.0\n[experiment]\nn_paths = 1\n",
        &out.join("baseline-three"),
    )?;
    let (dh, dt) = ((hopf - 1.0 / TAU).abs(), (three - 1.0 / (8.0 * PI)).abs());
    Ok((
        dh < 1e-5 && dt < 1e-4,
        format!("hopf {hopf:.8} (|err| {dh:.1e}, tol 1e-5); three_cycles {three:.8} (|err| {dt:.1e}, tol 1e-4)"),
    ))
}

fn cycle_finder() -> Outcome {
    let opts = CycleOptions::default();
    let find = |spec: &ModelSpec| {
        find_limit_cycle(&build_model(spec).map_err(err)?, &spec.default_start(), &opts).map_err(err)
    };
    let hopf = find(&ModelSpec::hopf_bounded(0.0))?;
    let three = find(&ModelSpec::three_cycles(1.0, 2.0, 3.0, 0.0).with_chart(Chart::Cartesian))?;
    let pp_spec = ModelSpec::predator_prey(NoiseVariant::B0, 0.0);
    let pp = find(&pp_spec)?;
    let e = predator_prey_equilibrium(&pp_spec.params);
    let dh = (hopf.period() - TAU).abs();
    let dt = (three.period() - 8.0 * PI).abs();
    let encloses = pp.winding_around(&e).abs() == 1;
    let e_ok = (e[0] - 1.29).abs() <= 0.02 && (e[1] - 9.10).abs() <= 0.02;
    Ok((
        dh < 1e-6 && dt < 1e-4 && encloses && e_ok,
        format!(
            "hopf |T-2pi| {dh:.1e}; three_cycles |T-8pi| {dt:.1e}; predator_prey T {:.4} encloses ({:.4}, {:.4}): {encloses}",
            pp.period(),
            e[0],
            e[1]
        ),
    ))
}

fn fig3(out: &Path) -> Outcome {
    let fit = run_preset("fig3", out)?;
    let m = fit["m"].as_f64().ok_or("no fitted slope")?;
    Ok(((0.26..=0.48).contains(&m), format!("m = {m:.4} rad/time (band [0.26, 0.48])")))
}

fn fig1(out: &Path) -> Outcome {
    let fit = run_preset("fig1", out)?;
    let c0 = fit["c0"].as_f64().ok_or("no c0")?;
    let m = fit["m"].as_f64().ok_or("no fitted slope")?;
    let p = fit["p_free"].as_f64().ok_or("no free exponent")?;
    let mut rdr = csv::Reader::from_path(out.join("fig1").join("sweep.csv")).map_err(err)?;
    let headers = rdr.headers().map_err(err)?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or(format!("no {name} column"));
    let (cs, cc) = (col("sigma")?, col("c_sigma")?);
    let mut worst: f64 = 0.0;
    for row in rdr.records() {
        let row = row.map_err(err)?;
        let sigma: f64 = row[cs].parse().map_err(err)?;
        if sigma > 0.0 {
            let c: f64 = row[cc].parse().map_err(err)?;
            worst = worst.max((c - c0).abs() / c0);
        }
    }
    let target = 1.8e-3;
    let ok = worst < 0.01 && (1.3..=2.7).contains(&p) && m > 0.0 && m / target <= 3.0 && target / m <= 3.0;
    Ok((
        ok,
        format!(
            "max |c-c0|/c0 {worst:.2e} (< 0.01); p_free {p:.3} ([1.3, 2.7]); m {m:.3e} rad/time (within 3x of 1.8e-3)"
        ),
    ))
}

fn estimator_agreement() -> Outcome {
    let spec = ModelSpec::hopf_bounded(0.3);
    let model = build_model(&spec).map_err(err)?;
    let pm = analytic_phase_map(&spec, None).map_err(err)?;
    let x0s = vec![spec.default_start(); 32];
    let cfg = IntegratorConfig::new(0.005, 500.0, 5);
    let paths = ensemble_frequency(&model, &pm, &x0s, &cfg, workers(), Conditioning::None, BranchRule::default())
        .map_err(err)?;
    let mut mo = MeasureOptions::new(GridSpec::square(2.0, 64), EstimatorKind::LongPath);
    mo.workers = workers();
    let measure = estimate_measure(&model, &x0s, &cfg, &mo).map_err(err)?;
    let formula = frequency_from_formula(&measure.histogram, &pm, &model, &FormulaOptions::default()).map_err(err)?;
    let se = paths.estimate.std_error.unwrap_or(0.0);
    let gap = (paths.estimate.value - formula.value).abs();
    let tol = (0.02 * formula.value).max(3.0 * se);
    Ok((
        gap < tol,
        format!(
            "paths {:.7} (se {se:.1e}), formula {:.7}, gap {gap:.2e} < {tol:.2e}",
            paths.estimate.value, formula.value
        ),
    ))
}

fn annulus(center: [f64; 2], r_lo: f64, r_hi: f64, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = NoiseStream::new(seed, 0);
    (0..n)
        .map(|_| {
            let r = r_lo + (r_hi - r_lo) * rng.uniform();
            let a = TAU * rng.uniform();
            vec![center[0] + r * a.cos(), center[1] + r * a.sin()]
        })
        .collect()
}

fn isochrons() -> Outcome {
    let mut worst_lie: f64 = 0.0;
    for spec in [ModelSpec::hopf_bounded(0.0), ModelSpec::hopf_linear(0.0), ModelSpec::hopf_asym(0.0)] {
        let model = build_model(&spec).map_err(err)?;
        let pm = analytic_phase_map(&spec, None).map_err(err)?;
        for x in annulus([0.0, 0.0], 0.05, 3.0, 1000, 1) {
            let g = pm.derivatives(&x).map_err(err)?.grad;
            let v = model.drift_at(&x);
            worst_lie = worst_lie.max((g[0] * v[0] + g[1] * v[1] - 1.0).abs());
        }
    }
    let spec = ModelSpec::hopf_bounded(0.0);
    let model = build_model(&spec).map_err(err)?;
    let pm = analytic_phase_map(&spec, None).map_err(err)?;
    let analytic =
        check_isochron_invariance(pm.as_ref(), &model, &annulus([0.0, 0.0], 0.2, 2.5, 100, 2), 1e-3).map_err(err)?;
    let spec = ModelSpec::three_cycles(1.0, 2.0, 3.0, 0.0).with_chart(Chart::Cartesian);
    let model = build_model(&spec).map_err(err)?;
    let cycle = Arc::new(find_limit_cycle(&model, &spec.default_start(), &CycleOptions::default()).map_err(err)?);
    let numeric = NumericPhaseMap::new(cycle, &model);
    let numeric =
        check_isochron_invariance(&numeric, &model, &annulus([0.0, 0.0], 1.6, 2.4, 100, 3), 2e-3).map_err(err)?;
    Ok((
        worst_lie < 1e-6 && analytic.max < 1e-4 && numeric.max < 1e-4,
        format!(
            "max |grad.V - 1| {worst_lie:.1e} over 3x1000 points; invariance hopf {:.1e}, three_cycles numeric {:.1e} (tol 1e-4)",
            analytic.max, numeric.max
        ),
    ))
}

fn martingale() -> Outcome {
    let spec = ModelSpec::hopf_bounded(0.3);
    let model = build_model(&spec).map_err(err)?;
    let pm = analytic_phase_map(&spec, None).map_err(err)?;
    let dt = 0.005;
    let times: Vec<f64> = (0..8).map(|k| 50.0 * 10f64.powf(k as f64 / 7.0)).collect();
    let cfg = IntegratorConfig::new(dt, 500.0, 21);
    let x0s = vec![spec.default_start(); 200];
    let runs = run_ensemble(&model, &x0s, &cfg, workers(), |_| {
        ItoTracker::new(pm.clone(), &model, dt, BranchRule::default(), RecordPlan::at_times(&times, dt))
    });
    let mut stats = vec![Welford::new(); times.len()];
    for (outcome, tracker) in runs {
        outcome.map_err(err)?;
        if let Some(e) = tracker.error {
            return Err(e.to_string());
        }
        for (k, (t, m)) in tracker.times.iter().zip(&tracker.martingale).enumerate() {
            stats[k].push(m / t);
        }
    }
    let lx: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = stats.iter().map(|s| s.variance().ln()).collect();
    let slope = linear_fit(&lx, &ly).ok_or("degenerate fit")?.slope;
    Ok(((-1.3..=-0.7).contains(&slope), format!("log-log slope {slope:.3} (band [-1.3, -0.7])")))
}

struct Ou;

impl VectorField for Ou {
    fn dim(&self) -> usize {
        2
    }
    fn noise_dim(&self) -> usize {
        2
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = -x[0];
        out[1] = -x[1];
    }
    fn diffusion(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
    }
}

fn fokker_planck() -> Outcome {
    let sigma = 0.8;
    let model = SdeModel::new(Arc::new(Ou), Arc::new(WholeSpace), sigma);
    let var = sigma * sigma / 2.0;
    let grid = GridSpec::square(5.0 * var.sqrt(), 64);
    let mut opts = FpOptions::new(grid.clone(), Boundary::ReflectingAtWindow);
    opts.epsilon = 0.0;
    let sol = solve_stationary_fp_2d(&model, &opts).map_err(err)?;
    let mut worst: f64 = 0.0;
    for (i, rho) in sol.histogram.density().iter().enumerate() {
        let c = grid.center(i);
        let r2 = c[0] * c[0] + c[1] * c[1];
        if r2 <= 16.0 * var {
            let exact = (-r2 / (2.0 * var)).exp() / (TAU * var);
            worst = worst.max((rho - exact).abs() / exact);
        }
    }
    let model = build_model(&ModelSpec::hopf_bounded(0.4)).map_err(err)?;
    let grid = GridSpec::square(2.0, 64);
    let sol =
        solve_stationary_fp_2d(&model, &FpOptions::new(grid.clone(), Boundary::ReflectingAtWindow)).map_err(err)?;
    let mut mo = MeasureOptions::new(grid, EstimatorKind::LongPath);
    mo.workers = workers();
    let mc = estimate_measure(&model, &vec![vec![1.0, 0.0]; 8], &IntegratorConfig::new(0.005, 2500.0, 17), &mo)
        .map_err(err)?;
    let tv = sol.histogram.total_variation(&mc.histogram).ok_or("grid mismatch")?;
    Ok((
        worst < 0.02 && tv < 0.1,
        format!("OU max relative error {worst:.1e} (< 2%) within 4 sd; hopf TV oracle vs Monte Carlo {tv:.3} (< 0.1)"),
    ))
}

fn conditions() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for spec in [ModelSpec::hopf_bounded(0.0), ModelSpec::hopf_linear(0.0), ModelSpec::hopf_asym(0.0)] {
        let below = check_sufficient_conditions(&spec.with_sigma(0.49)).map_err(err)?;
        let above = check_sufficient_conditions(&spec.with_sigma(0.51)).map_err(err)?;
        let star_ok = below.sigma_star == Some(0.5);
        // hopf_asym stays inconclusive below the threshold (noise does not vanish at the singularity)
        let below_ok = below.trace_condition
            && (below.verdict == Verdict::Satisfied
                || (below.verdict == Verdict::Inconclusive && !below.coefficients_vanish_at_singularity));
        let above_ok = !above.trace_condition && above.verdict == Verdict::Violated;
        ok &= star_ok && below_ok && above_ok;
        parts.push(format!(
            "{}: sigma* {:?}, 0.49 {:?}, 0.51 {:?}",
            spec.kind.as_str(),
            below.sigma_star,
            below.verdict,
            above.verdict
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn decomposition() -> Outcome {
    let mut worst_gap: f64 = 0.0;
    let mut worst_a: f64 = 0.0;
    for spec in [ModelSpec::hopf_bounded(0.4), ModelSpec::hopf_linear(0.3), ModelSpec::hopf_asym(0.3)] {
        let model = build_model(&spec).map_err(err)?;
        let pm = analytic_phase_map(&spec, None).map_err(err)?;
        let cycle = analytic_cycle(&spec, 1024).map_err(err)?.ok_or("no analytic cycle")?;
        let fp = FpOptions::new(GridSpec::square(2.0, 96), Boundary::ReflectingAtWindow);
        let hist = solve_stationary_fp_2d(&model, &fp).map_err(err)?.histogram;
        let opts = FormulaOptions { max_excluded_mass: 1.0, ..FormulaOptions::default() };
        let r = decompose_frequency(&hist, &cycle, &pm, &model, &opts).map_err(err)?;
        worst_gap = worst_gap.max((r.total - r.formula_value).abs());
        worst_a = worst_a.max(r.a_sigma.abs());
    }
    Ok((
        worst_gap < 1e-10 && worst_a < 1e-10,
        format!("max |regrouped - formula| {worst_gap:.1e} (< 1e-10); max |a_sigma| {worst_a:.1e} on Fokker-Planck measures"),
    ))
}

fn main() {
    // `cargo test` passes harness flags such as `--nocapture`; only a listing request matters here
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let (out, _keep) = out_root();
    let mut report = Report { passed: 0, failed: 0 };
    let secs = Duration::from_secs;
    report.run("deterministic baselines", Some(secs(10)), || baselines(&out));
    report.run("cycle finder", Some(secs(30)), cycle_finder);
    report.run("three_cycles sweep (desk fig3)", Some(secs(660)), || fig3(&out));
    report.run("hopf_bounded small-noise regime (desk fig1)", Some(secs(660)), || fig1(&out));
    report.run("estimator agreement", None, estimator_agreement);
    report.run("isochron identities", None, isochrons);
    report.run("martingale decay", None, martingale);
    report.run("Fokker-Planck oracle", None, fokker_planck);
    report.run("condition checker", None, conditions);
    report.run("decomposition identity", None, decomposition);
    println!("acceptance: {} passed, {} failed", report.passed, report.failed);
    if report.failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
