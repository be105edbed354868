use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use oscillab_core::conditions::{check_sufficient_conditions, Verdict};
use oscillab_core::estimate::{
    cycle_measure, decompose_frequency, ensemble_frequency, estimate_measure, fit_sweep, frequency_from_formula,
    Conditioning, FormulaOptions, MeasureOptions, SweepPoint,
};
use oscillab_core::fokker_planck::{solve_stationary_fp_2d, Boundary, FpOptions};
use oscillab_core::histogram::{EstimatorKind, MeasureKind};
use oscillab_core::phase_map::NumericPhaseMap;
use oscillab_core::sde::simulate_path;
use oscillab_core::tracking::{lift_phase, BranchRule};
use oscillab_core::zoo::{
    analytic_cycle, analytic_phase_map, build_model, predator_prey_equilibrium, Chart, ModelSpec, NoiseVariant,
};
use oscillab_core::{find_limit_cycle, CycleOptions, GridSpec, IntegratorConfig, MeasureHistogram, PhaseMap};
use proptest::prelude::*;

fn workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn deterministic_frequency(spec: &ModelSpec) -> f64 {
    let model = build_model(spec).unwrap();
    let pm = analytic_phase_map(spec, None).unwrap();
    let cfg = IntegratorConfig::new(1e-3, 400.0, 0);
    let run =
        ensemble_frequency(&model, &pm, &[spec.default_start()], &cfg, 1, Conditioning::None, BranchRule::default())
            .unwrap();
    run.estimate.value
}

#[test]
fn deterministic_baselines() {
    let hopf = deterministic_frequency(&ModelSpec::hopf_bounded(0.0));
    assert!((hopf - 1.0 / TAU).abs() < 1e-5, "hopf {hopf}");
    let three = deterministic_frequency(&ModelSpec::three_cycles(1.0, 2.0, 3.0, 0.0));
    assert!((three - 1.0 / (8.0 * PI)).abs() < 1e-4, "three_cycles {three}");
}

#[test]
fn cycle_periods_and_predator_prey_loop() {
    let opts = CycleOptions::default();
    let spec = ModelSpec::hopf_bounded(0.0);
    let hopf = find_limit_cycle(&build_model(&spec).unwrap(), &spec.default_start(), &opts).unwrap();
    assert!((hopf.period() - TAU).abs() < 1e-6, "hopf T {}", hopf.period());

    let spec = ModelSpec::three_cycles(1.0, 2.0, 3.0, 0.0).with_chart(Chart::Cartesian);
    let three = find_limit_cycle(&build_model(&spec).unwrap(), &spec.default_start(), &opts).unwrap();
    assert!((three.period() - 8.0 * PI).abs() < 1e-4, "three_cycles T {}", three.period());

    let spec = ModelSpec::predator_prey(NoiseVariant::B0, 0.0);
    let pp = find_limit_cycle(&build_model(&spec).unwrap(), &spec.default_start(), &opts).unwrap();
    let e = predator_prey_equilibrium(&spec.params);
    assert!((e[0] - 1.29).abs() < 0.02 && (e[1] - 9.10).abs() < 0.02, "equilibrium {e:?}");
    assert_eq!(pp.winding_around(&e).abs(), 1);
}

#[test]
fn path_average_agrees_with_formula() {
    let spec = ModelSpec::hopf_bounded(0.3);
    let model = build_model(&spec).unwrap();
    let pm = analytic_phase_map(&spec, None).unwrap();
    let x0s = vec![spec.default_start(); 32];
    let cfg = IntegratorConfig::new(0.005, 500.0, 5);
    let paths =
        ensemble_frequency(&model, &pm, &x0s, &cfg, workers(), Conditioning::None, BranchRule::default()).unwrap();
    let mut mo = MeasureOptions::new(GridSpec::square(2.0, 64), EstimatorKind::LongPath);
    mo.workers = workers();
    let measure = estimate_measure(&model, &x0s, &cfg, &mo).unwrap();
    let formula = frequency_from_formula(&measure.histogram, &pm, &model, &FormulaOptions::default()).unwrap();
    let gap = (paths.estimate.value - formula.value).abs();
    let tol = (0.02 * formula.value).max(3.0 * paths.estimate.std_error.unwrap());
    assert!(gap < tol, "path {} formula {} tol {tol}", paths.estimate.value, formula.value);
}

fn fp_histogram(model: &oscillab_core::SdeModel, half_width: f64) -> MeasureHistogram {
    let opts = FpOptions::new(GridSpec::square(half_width, 96), Boundary::ReflectingAtWindow);
    solve_stationary_fp_2d(model, &opts).unwrap().histogram
}

#[test]
fn decomposition_regroups_the_formula_exactly() {
    for spec in [ModelSpec::hopf_bounded(0.4), ModelSpec::hopf_linear(0.3), ModelSpec::hopf_asym(0.3)] {
        let model = build_model(&spec).unwrap();
        let pm = analytic_phase_map(&spec, None).unwrap();
        let cycle = analytic_cycle(&spec, 1024).unwrap().unwrap();
        let hist = fp_histogram(&model, 2.0);
        let opts = FormulaOptions { max_excluded_mass: 1.0, ..FormulaOptions::default() };
        let r = decompose_frequency(&hist, &cycle, &pm, &model, &opts).unwrap();
        assert!((r.total - r.formula_value).abs() < 1e-10, "{:?}: {} vs {}", spec.kind, r.total, r.formula_value);
        // π′V = 1 everywhere for an isochron map, so the first-order deformation vanishes
        assert!(r.a_sigma.abs() < 1e-12, "{:?}: a_sigma {}", spec.kind, r.a_sigma);
    }
}

#[test]
fn decomposition_of_the_cycle_measure_is_pure_cycle() {
    let spec = ModelSpec::hopf_bounded(0.2);
    let model = build_model(&spec).unwrap();
    let pm = analytic_phase_map(&spec, None).unwrap();
    let cycle = analytic_cycle(&spec, 1024).unwrap().unwrap();
    let hist = cycle_measure(&cycle, &GridSpec::square(1.5, 128));
    let r = decompose_frequency(&hist, &cycle, &pm, &model, &FormulaOptions::default()).unwrap();
    assert!((r.total - r.formula_value).abs() < 1e-10);
    assert!(r.a_sigma.abs() < 1e-12);
    assert!(r.nu_total_variation < 1e-12);
}

#[test]
fn numeric_isochron_map_has_small_first_order_deformation() {
    let spec = ModelSpec::three_cycles(1.0, 2.0, 3.0, 0.05).with_chart(Chart::Cartesian);
    let model = build_model(&spec).unwrap();
    let cycle = Arc::new(find_limit_cycle(&model, &spec.default_start(), &CycleOptions::default()).unwrap());
    let pm: Arc<dyn PhaseMap> = Arc::new(NumericPhaseMap::new(cycle.clone(), &model));
    // synthetic annular measure around r = 2
    let grid = GridSpec::square(2.6, 128);
    let mut hist = MeasureHistogram::empty(grid.clone(), MeasureKind::Ergodic, EstimatorKind::LongPath);
    for (k, w) in hist.weights.iter_mut().enumerate() {
        let c = grid.center(k);
        let r = (c[0] * c[0] + c[1] * c[1]).sqrt();
        *w = (-((r - 2.0) / 0.1).powi(2)).exp();
    }
    let total = hist.total();
    hist.weights.iter_mut().for_each(|w| *w /= total);
    let r = decompose_frequency(&hist, &cycle, &pm, &model, &FormulaOptions::default()).unwrap();
    assert!((r.total - r.formula_value).abs() < 1e-10);
    assert!(r.a_sigma.abs() < 1e-4 * r.c0, "a_sigma {} c0 {}", r.a_sigma, r.c0);
}

#[test]
fn condition_verdict_flips_at_one_half() {
    for spec in [ModelSpec::hopf_bounded(0.0), ModelSpec::hopf_linear(0.0), ModelSpec::hopf_asym(0.0)] {
        let below = check_sufficient_conditions(&spec.with_sigma(0.49)).unwrap();
        let above = check_sufficient_conditions(&spec.with_sigma(0.51)).unwrap();
        assert_eq!(below.sigma_star, Some(0.5));
        assert!(below.trace_condition && !above.trace_condition);
        assert_eq!(above.verdict, Verdict::Violated);
        if spec.kind != ModelSpec::hopf_asym(0.0).kind {
            assert_eq!(below.verdict, Verdict::Satisfied);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn lifted_phase_reduces_to_the_phase_map(seed in 0u64..1000, sigma in 0.05..0.4f64) {
        let spec = ModelSpec::hopf_bounded(sigma);
        let model = build_model(&spec).unwrap();
        let pm = analytic_phase_map(&spec, None).unwrap();
        let traj = simulate_path(&model, &[1.0, 0.0], &IntegratorConfig::new(0.01, 20.0, seed)).unwrap();
        let lp = lift_phase(&traj, pm.as_ref(), BranchRule::default()).unwrap();
        for i in (0..traj.valid_len()).step_by(97) {
            let raw = pm.eval(traj.state(i)).unwrap();
            let d = (lp.phi[i] - raw).rem_euclid(TAU);
            prop_assert!(d.min(TAU - d) < 1e-9);
        }
    }

    #[test]
    fn ensemble_frequency_ignores_worker_count(seed in 0u64..1000, workers in 2usize..5) {
        let spec = ModelSpec::hopf_bounded(0.3);
        let model = build_model(&spec).unwrap();
        let pm = analytic_phase_map(&spec, None).unwrap();
        let cfg = IntegratorConfig::new(0.01, 10.0, seed);
        let x0s = vec![spec.default_start(); 6];
        let run = |w| ensemble_frequency(&model, &pm, &x0s, &cfg, w, Conditioning::None, BranchRule::default()).unwrap();
        let (a, b) = (run(1), run(workers));
        prop_assert_eq!(a.paths, b.paths);
        prop_assert_eq!(a.estimate, b.estimate);
    }

    #[test]
    fn sweep_fit_recovers_an_exact_quadratic(m in -0.01..0.01f64, c0 in 0.05..0.5f64) {
        prop_assume!(m.abs() > 1e-6);
        let points: Vec<SweepPoint> = [0.1, 0.2, 0.3, 0.4]
            .iter()
            .map(|&sigma| SweepPoint {
                sigma,
                c_sigma: c0 + m * sigma * sigma,
                std_error: 1e-4,
                n_survivors: 8,
                n_paths: 8,
                dropped: false,
            })
            .collect();
        let fit = fit_sweep(c0, &points).unwrap();
        prop_assert!((fit.m_normalized - m).abs() < 1e-9 * m.abs().max(1.0));
        prop_assert!((fit.m - TAU * m).abs() < 1e-8);
        prop_assert!((fit.p_free.unwrap() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn grid_center_maps_back_to_its_bin(lo in -5.0..0.0f64, w in 0.5..5.0f64, nx in 1usize..40, ny in 1usize..40) {
        let grid = GridSpec::new(vec![lo, lo], vec![lo + w, lo + 2.0 * w], vec![nx, ny]);
        for k in 0..grid.n_bins() {
            prop_assert_eq!(grid.index(&grid.center(k)), Some(k));
        }
    }
}
