//! Deterministic limit cycles: discovery through a Poincaré return map and a
//! uniformly sampled parameterization `s ↦ γ_s`.

use alloc::string::String;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use thiserror::Error;

use crate::math::{all_finite, distance, dot, norm, spectral_radius};
use crate::ode::Rk4;
use crate::sde::{SdeModel, VectorField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CycleError {
    #[error("no return to the section within t = {horizon}")]
    NoCycle { horizon: f64 },
    #[error("section error: {0}")]
    SectionError(String),
    #[error("orbit left the basin at t = {time}")]
    LeftBasin { time: f64 },
    #[error("cycle is not stable: return-map multiplier {multiplier}")]
    Unstable { multiplier: f64 },
    #[error("fixed-point iteration did not converge (residual {residual})")]
    NotConverged { residual: f64 },
}

/// A periodic orbit sampled at `s_i = i·T/n`, with velocities for cubic Hermite
/// interpolation between samples.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LimitCycle {
    period: f64,
    dim: usize,
    samples: Vec<f64>,
    velocities: Vec<f64>,
    section_point: Vec<f64>,
    section_normal: Vec<f64>,
    multiplier: Option<f64>,
}

impl LimitCycle {
    /// Builds a cycle from a closed-form parameterization `gamma(s)`.
    pub fn from_fn(field: &dyn VectorField, period: f64, n: usize, gamma: impl Fn(f64) -> Vec<f64>) -> Self {
        let dim = field.dim();
        let mut samples = Vec::with_capacity(n * dim);
        let mut velocities = alloc::vec![0.0; n * dim];
        for i in 0..n {
            samples.extend(gamma(i as f64 * period / n as f64));
        }
        for i in 0..n {
            field.drift(&samples[i * dim..(i + 1) * dim], &mut velocities[i * dim..(i + 1) * dim]);
        }
        let section_point = samples[..dim].to_vec();
        let v = &velocities[..dim];
        let nv = norm(v);
        let section_normal = v.iter().map(|c| c / nv).collect();
        Self { period, dim, samples, velocities, section_point, section_normal, multiplier: None }
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn sample_time(&self, i: usize) -> f64 {
        i as f64 * self.period / self.n_samples() as f64
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.velocities[i * self.dim..(i + 1) * self.dim]
    }

    /// Section `(point, unit normal)` used by the return map.
    pub fn section(&self) -> (&[f64], &[f64]) {
        (&self.section_point, &self.section_normal)
    }

    /// Return-map spectral radius, when the cycle came from [`find_limit_cycle`].
    pub fn multiplier(&self) -> Option<f64> {
        self.multiplier
    }

    /// Cubic Hermite interpolation of `γ_s` (periodic in `s`).
    pub fn state_at(&self, s: f64) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.dim];
        self.hermite(s, &mut out, None);
        out
    }

    /// Interpolated state and tangent at `s`.
    pub fn state_and_velocity(&self, s: f64) -> (Vec<f64>, Vec<f64>) {
        let mut x = alloc::vec![0.0; self.dim];
        let mut v = alloc::vec![0.0; self.dim];
        self.hermite(s, &mut x, Some(&mut v));
        (x, v)
    }

    fn hermite(&self, s: f64, out: &mut [f64], mut vel: Option<&mut [f64]>) {
        let n = self.n_samples();
        let h = self.period / n as f64;
        let u = crate::math::wrap_period(s, self.period) / h;
        let i = (u.floor() as usize).min(n - 1);
        let t = u - i as f64;
        let j = (i + 1) % n;
        let (p0, p1) = (self.sample(i), self.sample(j));
        let (m0, m1) = (self.velocity(i), self.velocity(j));
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        for k in 0..self.dim {
            out[k] = h00 * p0[k] + h10 * h * m0[k] + h01 * p1[k] + h11 * h * m1[k];
        }
        if let Some(v) = vel.as_mut() {
            let d00 = 6.0 * t2 - 6.0 * t;
            let d10 = 3.0 * t2 - 4.0 * t + 1.0;
            let d01 = -6.0 * t2 + 6.0 * t;
            let d11 = 3.0 * t2 - 2.0 * t;
            for k in 0..self.dim {
                v[k] = (d00 * p0[k] + d01 * p1[k]) / h + d10 * m0[k] + d11 * m1[k];
            }
        }
    }

    /// Parameter `s` of the point of the cycle nearest to `x`, and that distance.
    pub fn nearest(&self, x: &[f64]) -> (f64, f64) {
        let n = self.n_samples();
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for i in 0..n {
            let d = distance(self.sample(i), x);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        let h = self.period / n as f64;
        let centre = best as f64 * h;
        let mut buf = alloc::vec![0.0; self.dim];
        let mut f = |s: f64| {
            self.hermite(s, &mut buf, None);
            distance(&buf, x)
        };
        // golden-section search on the two adjacent sample intervals
        let g = 0.5 * (5.0f64.sqrt() - 1.0);
        let (mut a, mut b) = (centre - h, centre + h);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..80 {
            if (b - a).abs() < 1e-14 * self.period.max(1.0) {
                break;
            }
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = f(d);
            }
        }
        let s = 0.5 * (a + b);
        let ds = f(s);
        if ds <= best_d {
            (crate::math::wrap_period(s, self.period), ds)
        } else {
            (centre, best_d)
        }
    }

    /// `T⁻¹∫₀ᵀ f(γ_s) ds` by the periodic trapezoidal rule on the samples.
    pub fn line_average(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        let n = self.n_samples();
        (0..n).map(|i| f(self.sample(i))).sum::<f64>() / n as f64
    }

    /// Mean of the samples.
    pub fn centroid(&self) -> Vec<f64> {
        let n = self.n_samples();
        let mut c = alloc::vec![0.0; self.dim];
        for i in 0..n {
            for (ck, xk) in c.iter_mut().zip(self.sample(i)) {
                *ck += xk / n as f64;
            }
        }
        c
    }

    /// Componentwise `(min, max)` over the samples.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = alloc::vec![f64::INFINITY; self.dim];
        let mut hi = alloc::vec![f64::NEG_INFINITY; self.dim];
        for i in 0..self.n_samples() {
            for (k, v) in self.sample(i).iter().enumerate() {
                lo[k] = lo[k].min(*v);
                hi[k] = hi[k].max(*v);
            }
        }
        (lo, hi)
    }

    /// Signed area enclosed by a planar cycle (positive when counterclockwise).
    pub fn signed_area(&self) -> f64 {
        let n = self.n_samples();
        let mut a = 0.0;
        for i in 0..n {
            let p = self.sample(i);
            let q = self.sample((i + 1) % n);
            a += p[0] * q[1] - q[0] * p[1];
        }
        0.5 * a
    }

    /// Winding number of a planar cycle around `point`.
    pub fn winding_around(&self, point: &[f64]) -> i64 {
        let n = self.n_samples();
        let mut total = 0.0;
        for i in 0..n {
            let p = self.sample(i);
            let q = self.sample((i + 1) % n);
            let a0 = (p[1] - point[1]).atan2(p[0] - point[0]);
            let a1 = (q[1] - point[1]).atan2(q[0] - point[0]);
            total += crate::math::circular_diff(a0, a1, core::f64::consts::TAU);
        }
        (total / core::f64::consts::TAU).round() as i64
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CycleOptions {
    /// Time flowed before building the section.
    pub transient: f64,
    /// Largest RK4 step.
    pub step: f64,
    /// Give up when no return happens within this time.
    pub max_return_time: f64,
    /// Fixed-point tolerance in the section.
    pub tol: f64,
    pub max_iter: usize,
    pub n_samples: usize,
}

impl Default for CycleOptions {
    fn default() -> Self {
        Self { transient: 200.0, step: 1e-3, max_return_time: 1e3, tol: 1e-11, max_iter: 40, n_samples: 2048 }
    }
}

struct ReturnMap<'a> {
    field: &'a dyn VectorField,
    model: &'a SdeModel,
    point: Vec<f64>,
    normal: Vec<f64>,
    /// Orthonormal basis of the section's tangent space, row per vector.
    basis: Vec<Vec<f64>>,
    step: f64,
    horizon: f64,
}

impl ReturnMap<'_> {
    fn lift(&self, xi: &[f64]) -> Vec<f64> {
        let mut y = self.point.clone();
        for (c, e) in xi.iter().zip(&self.basis) {
            for (yk, ek) in y.iter_mut().zip(e) {
                *yk += c * ek;
            }
        }
        y
    }

    fn coords(&self, y: &[f64]) -> Vec<f64> {
        let diff: Vec<f64> = y.iter().zip(&self.point).map(|(a, b)| a - b).collect();
        self.basis.iter().map(|e| dot(e, &diff)).collect()
    }

    fn signed(&self, y: &[f64]) -> f64 {
        y.iter().zip(&self.point).zip(&self.normal).map(|((a, b), n)| (a - b) * n).sum()
    }

    /// Flows from `y` (on the section) to the next upward crossing.
    fn apply(&self, y: &[f64]) -> Result<(Vec<f64>, f64), CycleError> {
        let d = y.len();
        let mut rk = Rk4::new(d);
        let mut x = y.to_vec();
        let mut prev = x.clone();
        let mut t = 0.0;
        let mut g = self.signed(&x);
        let mut left = false;
        let h = self.step;
        while t < self.horizon {
            prev.copy_from_slice(&x);
            let g_prev = g;
            rk.step(self.field, &mut x, h);
            t += h;
            if !all_finite(&x) || !self.model.basin().contains(&x) {
                return Err(CycleError::LeftBasin { time: t });
            }
            g = self.signed(&x);
            if g < 0.0 {
                left = true;
            }
            if left && g_prev < 0.0 && g >= 0.0 {
                // Illinois regula falsi on the sub-step length
                let (mut a, mut b) = (0.0, h);
                let (mut ga, mut gb) = (g_prev, g);
                let mut side = 0i8;
                let mut tau = h;
                let mut z = x.clone();
                for _ in 0..60 {
                    tau = (a * gb - b * ga) / (gb - ga);
                    z.copy_from_slice(&prev);
                    rk.step(self.field, &mut z, tau);
                    let gz = self.signed(&z);
                    if gz.abs() < 1e-15 || (b - a) < 1e-15 {
                        break;
                    }
                    if (gz < 0.0) == (ga < 0.0) {
                        a = tau;
                        ga = gz;
                        if side == -1 {
                            gb *= 0.5;
                        }
                        side = -1;
                    } else {
                        b = tau;
                        gb = gz;
                        if side == 1 {
                            ga *= 0.5;
                        }
                        side = 1;
                    }
                }
                return Ok((z, t - h + tau));
            }
            if !left && t > 0.5 * self.horizon {
                break;
            }
        }
        Err(CycleError::NoCycle { horizon: self.horizon })
    }
}

fn section_basis(normal: &[f64]) -> Vec<Vec<f64>> {
    let d = normal.len();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for k in 0..d {
        let mut e = alloc::vec![0.0; d];
        e[k] = 1.0;
        let p = dot(&e, normal);
        for (ei, ni) in e.iter_mut().zip(normal) {
            *ei -= p * ni;
        }
        for b in &basis {
            let p = dot(&e, b);
            for (ei, bi) in e.iter_mut().zip(b) {
                *ei -= p * bi;
            }
        }
        let ne = norm(&e);
        if ne > 1e-6 {
            for ei in e.iter_mut() {
                *ei /= ne;
            }
            basis.push(e);
        }
        if basis.len() == d - 1 {
            break;
        }
    }
    basis
}

/// Solves the small dense system `a x = b` by Gaussian elimination with pivoting.
fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].abs().partial_cmp(&a[j * n + col].abs()).unwrap())?;
        if a[piv * n + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            b.swap(piv, col);
        }
        for i in col + 1..n {
            let f = a[i * n + col] / a[col * n + col];
            for k in col..n {
                a[i * n + k] -= f * a[col * n + k];
            }
            b[i] -= f * b[col];
        }
    }
    let mut x = alloc::vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i * n + k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i * n + i];
    }
    Some(x)
}

/// Locates the stable limit cycle reached from `x_guess` under the `σ = 0` flow.
pub fn find_limit_cycle(model: &SdeModel, x_guess: &[f64], opts: &CycleOptions) -> Result<LimitCycle, CycleError> {
    let field: &dyn VectorField = model.field().as_ref();
    let d = field.dim();
    if d < 2 {
        return Err(CycleError::SectionError("cycles need dimension >= 2".into()));
    }
    if !model.basin().contains(x_guess) {
        return Err(CycleError::LeftBasin { time: 0.0 });
    }
    let mut x = x_guess.to_vec();
    let mut rk = Rk4::new(d);
    let n_transient = (opts.transient / opts.step).ceil() as usize;
    for k in 0..n_transient {
        rk.step(field, &mut x, opts.step);
        if !all_finite(&x) || !model.basin().contains(&x) {
            return Err(CycleError::LeftBasin { time: (k + 1) as f64 * opts.step });
        }
    }
    let mut v = alloc::vec![0.0; d];
    field.drift(&x, &mut v);
    let speed = norm(&v);
    if speed < 1e-10 {
        return Err(CycleError::SectionError("flow is stationary at the section point".into()));
    }
    let normal: Vec<f64> = v.iter().map(|c| c / speed).collect();
    let basis = section_basis(&normal);
    let map = ReturnMap {
        field,
        model,
        point: x.clone(),
        normal: normal.clone(),
        basis,
        step: opts.step,
        horizon: opts.max_return_time,
    };
    let m = d - 1;
    let mut xi = alloc::vec![0.0; m];
    let mut residual = f64::INFINITY;
    let mut jac = alloc::vec![0.0; m * m];
    let mut period = 0.0;
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let (y, t_ret) = map.apply(&map.lift(&xi))?;
        let image = map.coords(&y);
        let f: Vec<f64> = image.iter().zip(&xi).map(|(a, b)| a - b).collect();
        residual = norm(&f);
        period = t_ret;
        // return-map Jacobian by forward differences
        let delta = 1e-6;
        for j in 0..m {
            let mut xj = xi.clone();
            xj[j] += delta;
            let (yj, _) = map.apply(&map.lift(&xj))?;
            let cj = map.coords(&yj);
            for i in 0..m {
                jac[i * m + j] = (cj[i] - image[i]) / delta;
            }
        }
        if residual < opts.tol {
            converged = true;
            break;
        }
        let mut a = jac.clone();
        for i in 0..m {
            a[i * m + i] -= 1.0;
        }
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        match solve_dense(a, rhs, m) {
            Some(step) => {
                for (x, s) in xi.iter_mut().zip(&step) {
                    *x += s;
                }
            }
            None => {
                xi = image;
            }
        }
    }
    if !converged && residual > 1e3 * opts.tol {
        return Err(CycleError::NotConverged { residual });
    }
    let multiplier = spectral_radius(&jac, m);
    if multiplier >= 1.0 {
        return Err(CycleError::Unstable { multiplier });
    }
    let start = map.lift(&xi);

    // resample on a uniform grid in s with an integer number of RK4 sub-steps
    let n = opts.n_samples;
    let per_sample = ((period / n as f64) / opts.step).ceil().max(1.0) as usize;
    let h = period / (n * per_sample) as f64;
    let mut samples = Vec::with_capacity(n * d);
    let mut velocities = alloc::vec![0.0; n * d];
    let mut y = start.clone();
    for i in 0..n {
        samples.extend_from_slice(&y);
        field.drift(&y, &mut velocities[i * d..(i + 1) * d]);
        for _ in 0..per_sample {
            rk.step(field, &mut y, h);
        }
    }
    let closure = distance(&y, &start);
    if closure > 1e-6 * (1.0 + norm(&start)) {
        return Err(CycleError::NotConverged { residual: closure });
    }
    Ok(LimitCycle {
        period,
        dim: d,
        samples,
        velocities,
        section_point: start,
        section_normal: normal,
        multiplier: Some(multiplier),
    })
}
