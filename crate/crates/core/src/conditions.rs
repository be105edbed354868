//! Algebraic and sampled checks of the sufficient conditions for integrability of
//! the frequency functional near a phase singularity `x₀`:
//!
//! 1. `V` and `B` have polynomial entries and `‖V(x)‖, ‖B(x)‖ = O(‖x − x₀‖)`;
//! 2. `Xₜ` has a density (assumed, not checked);
//! 3. `B ≠ 0` inside the basin and `B → 0` at its finite boundary;
//! 4. `V′(x₀)` is positive definite and `σ ≤ σ* = Tr V′(x₀)/(2d)`.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::TAU;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::math::{norm, symmetric_eigenvalues};
use crate::sde::SdeModel;
use crate::zoo::{build_model, drift_jacobian, Chart, ModelKind, ModelSpec, SpecError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Verdict {
    Satisfied,
    Violated,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Evidence {
    /// Jacobian and coefficient structure known in closed form.
    ClosedForm,
    /// Finite-difference Jacobian and sampled coefficients only.
    Numeric,
}

/// A boolean that may not apply (serialized as `true`, `false` or `"not_applicable"`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Check {
    Holds(bool),
    NotApplicable,
}

impl Check {
    pub fn is_false(self) -> bool {
        self == Check::Holds(false)
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for Check {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Check::Holds(b) => s.serialize_bool(*b),
            Check::NotApplicable => s.serialize_str("not_applicable"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ConditionReport {
    pub sigma: f64,
    pub singularity: Option<Vec<f64>>,
    pub sigma_star: Option<f64>,
    pub jacobian_trace: Option<f64>,
    /// `σ ≤ σ*`.
    pub trace_condition: bool,
    /// The stricter-looking form `Tr V′(x₀) > 2dσ²`, reported for comparison.
    pub trace_condition_sigma_squared: bool,
    pub positive_definite: bool,
    pub polynomial_coefficients: Check,
    pub coefficients_vanish_at_singularity: bool,
    pub diffusion_positive_interior: bool,
    pub diffusion_vanishes_boundary: Check,
    pub evidence: Evidence,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

/// Everything the checker needs about a model.
pub struct ConditionInputs<'a> {
    pub model: &'a SdeModel,
    /// The phase singularity inside the basin, if there is one.
    pub singularity: Option<Vec<f64>>,
    /// Row-major `V′(x₀)` when known in closed form.
    pub jacobian: Option<Vec<f64>>,
    pub polynomial: Option<bool>,
    pub interior_samples: Vec<Vec<f64>>,
    /// Finite boundary points of the basin (empty when there are none to check).
    pub boundary_samples: Vec<Vec<f64>>,
}

fn diffusion_norm(model: &SdeModel, x: &[f64]) -> f64 {
    norm(&model.diffusion_at(x))
}

fn numeric_jacobian(model: &SdeModel, x0: &[f64]) -> Vec<f64> {
    let d = model.dim();
    let mut j = alloc::vec![0.0; d * d];
    for k in 0..d {
        let h = 1e-6 * (1.0 + x0[k].abs());
        let mut p = x0.to_vec();
        let mut m = x0.to_vec();
        p[k] += h;
        m[k] -= h;
        let (vp, vm) = (model.drift_at(&p), model.drift_at(&m));
        for i in 0..d {
            j[i * d + k] = (vp[i] - vm[i]) / (2.0 * h);
        }
    }
    j
}

/// `‖V‖/r` and `‖B‖/r` stay bounded as `r → 0` along sampled rays.
fn vanish_linearly(model: &SdeModel, x0: &[f64]) -> bool {
    let d = model.dim();
    let radii = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
    let mut ratios = Vec::new();
    for k in 0..16 {
        let th = TAU * k as f64 / 16.0;
        let mut e = alloc::vec![0.0; d];
        e[0] = th.cos();
        if d > 1 {
            e[1] = th.sin();
        }
        if d > 2 {
            e[2] = 0.5;
        }
        let en = norm(&e);
        let mut row = Vec::with_capacity(radii.len());
        for &r in &radii {
            let x: Vec<f64> = x0.iter().zip(&e).map(|(a, b)| a + r * b / en).collect();
            let v = norm(&model.drift_at(&x)) / r;
            let b = diffusion_norm(model, &x) / r;
            row.push((v, b));
        }
        ratios.push(row);
    }
    ratios.iter().all(|row| {
        let (v0, b0) = row[0];
        row.iter().all(|&(v, b)| v.is_finite() && b.is_finite() && v <= 4.0 * v0 + 1e-9 && b <= 4.0 * b0 + 1e-9)
    })
}

/// Evaluates the conditions from explicit inputs.
pub fn check_conditions(inputs: &ConditionInputs) -> ConditionReport {
    let model = inputs.model;
    let sigma = model.sigma();
    let d = model.dim();
    let mut notes = Vec::new();
    notes.push(String::from("existence of a density for all t is assumed, not checked"));
    let diffusion_positive_interior =
        inputs.interior_samples.iter().filter(|x| model.basin().contains(x)).all(|x| diffusion_norm(model, x) > 1e-12);
    let diffusion_vanishes_boundary = if inputs.boundary_samples.is_empty() {
        Check::NotApplicable
    } else {
        Check::Holds(inputs.boundary_samples.iter().all(|x| diffusion_norm(model, x) < 1e-9))
    };
    let polynomial_coefficients = inputs.polynomial.map_or(Check::NotApplicable, Check::Holds);
    let mut evidence =
        if inputs.jacobian.is_some() && inputs.polynomial.is_some() { Evidence::ClosedForm } else { Evidence::Numeric };
    let x0 = match &inputs.singularity {
        Some(x0) => x0.clone(),
        None => {
            notes.push(String::from("no phase singularity inside the basin; the conditions do not apply"));
            return ConditionReport {
                sigma,
                singularity: None,
                sigma_star: None,
                jacobian_trace: None,
                trace_condition: false,
                trace_condition_sigma_squared: false,
                positive_definite: false,
                polynomial_coefficients,
                coefficients_vanish_at_singularity: false,
                diffusion_positive_interior,
                diffusion_vanishes_boundary,
                evidence,
                verdict: Verdict::Inconclusive,
                notes,
            };
        }
    };
    let jac = match &inputs.jacobian {
        Some(j) => j.clone(),
        None => {
            evidence = Evidence::Numeric;
            numeric_jacobian(model, &x0)
        }
    };
    let trace: f64 = (0..d).map(|i| jac[i * d + i]).sum();
    let sigma_star = trace / (2.0 * d as f64);
    let trace_condition = sigma <= sigma_star;
    let trace_condition_sigma_squared = trace > 2.0 * d as f64 * sigma * sigma;
    let mut sym = alloc::vec![0.0; d * d];
    for i in 0..d {
        for k in 0..d {
            sym[i * d + k] = 0.5 * (jac[i * d + k] + jac[k * d + i]);
        }
    }
    let positive_definite = symmetric_eigenvalues(&sym, d).iter().all(|&l| l > 0.0);
    let coefficients_vanish_at_singularity = vanish_linearly(model, &x0);
    if !coefficients_vanish_at_singularity {
        notes.push(String::from("drift or diffusion is not O(|x - x0|) at the singularity"));
    }
    if polynomial_coefficients.is_false() {
        notes.push(String::from("coefficients are not polynomial"));
    }
    if !diffusion_positive_interior {
        notes.push(String::from("diffusion vanishes somewhere inside the basin"));
    }
    if diffusion_vanishes_boundary.is_false() {
        notes.push(String::from("diffusion does not vanish on the basin boundary"));
    }
    let structural_failure = !coefficients_vanish_at_singularity
        || polynomial_coefficients.is_false()
        || !diffusion_positive_interior
        || diffusion_vanishes_boundary.is_false();
    let verdict = if !trace_condition || !positive_definite {
        Verdict::Violated
    } else if structural_failure || evidence == Evidence::Numeric {
        Verdict::Inconclusive
    } else {
        Verdict::Satisfied
    };
    ConditionReport {
        sigma,
        singularity: Some(x0),
        sigma_star: Some(sigma_star),
        jacobian_trace: Some(trace),
        trace_condition,
        trace_condition_sigma_squared,
        positive_definite,
        polynomial_coefficients,
        coefficients_vanish_at_singularity,
        diffusion_positive_interior,
        diffusion_vanishes_boundary,
        evidence,
        verdict,
        notes,
    }
}

fn circle(cx: f64, cy: f64, r: f64, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|k| {
            let th = TAU * (k as f64 + 0.25) / n as f64;
            alloc::vec![cx + r * th.cos(), cy + r * th.sin()]
        })
        .collect()
}

/// Checks a zoo model with closed-form Jacobian and known coefficient structure.
pub fn check_sufficient_conditions(spec: &ModelSpec) -> Result<ConditionReport, SpecError> {
    let model = build_model(spec)?;
    let [a, _, c, _] = spec.params;
    let (singularity, polynomial, interior, boundary) = match spec.kind {
        k if k.is_hopf() => {
            let mut interior = Vec::new();
            for r in [0.1, 0.5, 1.0, 1.3, 1.9, 3.0] {
                interior.extend(circle(0.0, 0.0, r, 12));
            }
            // the finite boundary of R²∖{0} is the singular point itself
            (Some(alloc::vec![0.0, 0.0]), true, interior, alloc::vec![alloc::vec![0.0, 0.0]])
        }
        ModelKind::ThreeCycles => {
            let (interior, boundary) = match spec.chart {
                Chart::Cartesian => {
                    let mut inner = Vec::new();
                    for f in [0.1, 0.5, 0.9] {
                        inner.extend(circle(0.0, 0.0, a + f * (c - a), 12));
                    }
                    let mut edge = circle(0.0, 0.0, a, 12);
                    edge.extend(circle(0.0, 0.0, c, 12));
                    (inner, edge)
                }
                Chart::Polar => {
                    let thetas: Vec<f64> = (0..12).map(|k| TAU * k as f64 / 12.0).collect();
                    let inner = [0.1, 0.5, 0.9]
                        .iter()
                        .flat_map(|f| thetas.iter().map(move |&t| alloc::vec![a + f * (c - a), t]))
                        .collect();
                    let edge = [a, c].iter().flat_map(|&r| thetas.iter().map(move |&t| alloc::vec![r, t])).collect();
                    (inner, edge)
                }
            };
            (None, spec.chart == Chart::Polar, interior, boundary)
        }
        _ => {
            let x0 = spec.equilibrium();
            let v_star = x0.as_ref().map_or(1.0, |x| x[1]);
            let mut interior = Vec::new();
            for u in [0.3, 1.0, 2.0, 4.0, 6.5] {
                for v in [0.5, 3.0, 7.0, v_star, 12.0, 20.0] {
                    interior.push(alloc::vec![u, v]);
                }
            }
            let mut boundary = Vec::new();
            for s in [0.5, 2.0, 5.0, 10.0] {
                boundary.push(alloc::vec![0.0, s]);
                boundary.push(alloc::vec![s, 0.0]);
            }
            (x0, false, interior, boundary)
        }
    };
    let jacobian = singularity.as_ref().map(|x0| drift_jacobian(spec, x0).to_vec());
    Ok(check_conditions(&ConditionInputs {
        model: &model,
        singularity,
        jacobian,
        polynomial: Some(polynomial),
        interior_samples: interior,
        boundary_samples: boundary,
    }))
}
