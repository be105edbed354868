use std::f64::consts::TAU;
use std::sync::Arc;

use oscillab_core::phase_map::{check_isochron_invariance, NumericPhaseMap};
use oscillab_core::rng::NoiseStream;
use oscillab_core::zoo::{
    analytic_cycle, analytic_phase_map, build_model, predator_prey_equilibrium, Chart, ModelSpec, NoiseVariant,
};
use oscillab_core::{find_limit_cycle, CycleOptions};

/// Points uniformly spread over the annulus `r_lo < |x − c| < r_hi`.
fn annulus_points(center: [f64; 2], r_lo: f64, r_hi: f64, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = NoiseStream::new(seed, 0);
    (0..n)
        .map(|_| {
            let r = r_lo + (r_hi - r_lo) * rng.uniform();
            let a = TAU * rng.uniform();
            vec![center[0] + r * a.cos(), center[1] + r * a.sin()]
        })
        .collect()
}

#[test]
fn hopf_gradient_along_the_flow_is_one() {
    for spec in [ModelSpec::hopf_bounded(0.0), ModelSpec::hopf_linear(0.0), ModelSpec::hopf_asym(0.0)] {
        let model = build_model(&spec).unwrap();
        let pm = analytic_phase_map(&spec, None).unwrap();
        for x in annulus_points([0.0, 0.0], 0.05, 3.0, 1000, 1) {
            let g = pm.derivatives(&x).unwrap().grad;
            let v = model.drift_at(&x);
            let lie = g[0] * v[0] + g[1] * v[1];
            assert!((lie - 1.0).abs() < 1e-6, "{:?} at {x:?}: {lie}", spec.kind);
        }
    }
}

#[test]
fn three_cycles_phase_advances_at_unit_rate_on_the_cycle() {
    // θ̇ = r⁻², so π = b²θ only satisfies π′V = 1 on r = b
    for chart in [Chart::Polar, Chart::Cartesian] {
        let spec = ModelSpec::three_cycles(1.0, 2.0, 3.0, 0.0).with_chart(chart);
        let model = build_model(&spec).unwrap();
        let pm = analytic_phase_map(&spec, None).unwrap();
        let cycle = analytic_cycle(&spec, 256).unwrap().unwrap();
        for i in 0..cycle.n_samples() {
            let x = cycle.sample(i);
            let g = pm.derivatives(x).unwrap().grad;
            let v = model.drift_at(x);
            assert!((g[0] * v[0] + g[1] * v[1] - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn analytic_hopf_isochrons_are_invariant_under_the_period_map() {
    let spec = ModelSpec::hopf_bounded(0.0);
    let model = build_model(&spec).unwrap();
    let pm = analytic_phase_map(&spec, None).unwrap();
    let points = annulus_points([0.0, 0.0], 0.2, 2.5, 100, 2);
    let report = check_isochron_invariance(pm.as_ref(), &model, &points, 1e-3).unwrap();
    assert!(report.max < 1e-4, "max discrepancy {}", report.max);
}

#[test]
fn numeric_isochrons_are_invariant_under_the_period_map() {
    let spec = ModelSpec::three_cycles(1.0, 2.0, 3.0, 0.0).with_chart(Chart::Cartesian);
    let model = build_model(&spec).unwrap();
    let cycle = Arc::new(find_limit_cycle(&model, &spec.default_start(), &CycleOptions::default()).unwrap());
    let pm = NumericPhaseMap::new(cycle, &model);
    let points = annulus_points([0.0, 0.0], 1.6, 2.4, 100, 3);
    let report = check_isochron_invariance(&pm, &model, &points, 2e-3).unwrap();
    assert!(report.max < 1e-4, "max discrepancy {}", report.max);
}

#[test]
fn predator_prey_angle_map_is_not_an_isochron_map() {
    let spec = ModelSpec::predator_prey(NoiseVariant::B0, 0.0);
    let model = build_model(&spec).unwrap();
    let cycle = find_limit_cycle(&model, &spec.default_start(), &CycleOptions::default()).unwrap();
    let pm = analytic_phase_map(&spec, Some(&cycle)).unwrap();
    let e = predator_prey_equilibrium(&spec.params);
    let points = annulus_points(e, 0.2, 0.5, 20, 4);
    let report = check_isochron_invariance(pm.as_ref(), &model, &points, 1e-3).unwrap();
    assert!(report.max > 1e-3, "max discrepancy {}", report.max);
}
