//! Stationary (or quasi-stationary) Fokker–Planck densities on a 2-D grid.
//!
//! The forward equation `∂ₜρ = −∇·(Vρ) + Σᵢⱼ ∂ᵢ∂ⱼ(Dᵢⱼρ)` with
//! `D = σ²BBᵀ/2 + εI` is discretized by cell-centred finite volumes. Face fluxes
//! `Jᵢ = (Vᵢ − Σⱼ∂ⱼDᵢⱼ)ρ − Σⱼ Dᵢⱼ∂ⱼρ` use Scharfetter–Gummel weights for the normal
//! part and central differences for the mixed derivative. The null vector (or,
//! with absorbing walls, the leading eigenvector) comes from shifted inverse
//! iteration on a banded LU factorization.

use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use thiserror::Error;

use crate::banded::{BandError, BandMatrix};
use crate::histogram::{EstimatorKind, GridSpec, MeasureHistogram, MeasureKind};
use crate::sde::SdeModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FpError {
    #[error("the oracle needs a two-dimensional model and grid")]
    NotTwoDimensional,
    #[error("invalid grid or options: {0}")]
    InvalidInput(&'static str),
    #[error("eigensolve did not converge (residual {residual})")]
    OracleFailed { residual: f64 },
    #[error(transparent)]
    Band(#[from] BandError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Boundary {
    /// Zero flux through the window edges and out of the basin.
    ReflectingAtWindow,
    /// Zero density outside the window and outside the basin.
    Absorbing,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FpOptions {
    pub grid: GridSpec,
    pub boundary: Boundary,
    /// Isotropic regularization added to the diffusion matrix.
    pub epsilon: f64,
    /// Solve on a grid refined by this factor, then sum back onto `grid`.
    pub refine: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl FpOptions {
    pub fn new(grid: GridSpec, boundary: Boundary) -> Self {
        Self { grid, boundary, epsilon: 1e-6, refine: 1, tol: 1e-10, max_iter: 200 }
    }
}

#[derive(Clone, Debug)]
pub struct FpSolution {
    /// Cell probabilities on the requested grid (`Σ ρ·area = 1`).
    pub histogram: MeasureHistogram,
    /// `−λ₀`; zero up to round-off for reflecting walls.
    pub decay_rate: f64,
    /// `‖Aρ − λ₀ρ‖∞ / (max|Aᵢᵢ| ‖ρ‖∞)`.
    pub residual: f64,
    pub iterations: usize,
    /// Most negative cell probability before clipping (round-off or cross-diffusion).
    pub min_weight: f64,
}

fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 - 0.5 * z
    } else if z > 700.0 {
        0.0
    } else {
        z / z.exp_m1()
    }
}

struct Coeffs<'a> {
    model: &'a SdeModel,
    s2: f64,
    eps: f64,
    b: Vec<f64>,
}

impl Coeffs<'_> {
    fn diffusion(&mut self, x: &[f64]) -> [f64; 3] {
        let m = self.model.noise_dim();
        self.model.field().diffusion(x, &mut self.b);
        let (mut dxx, mut dxy, mut dyy) = (0.0, 0.0, 0.0);
        for k in 0..m {
            let (p, q) = (self.b[k], self.b[m + k]);
            dxx += p * p;
            dxy += p * q;
            dyy += q * q;
        }
        let h = 0.5 * self.s2;
        [h * dxx + self.eps, h * dxy, h * dyy + self.eps]
    }

    fn drift(&self, x: &[f64]) -> [f64; 2] {
        let mut v = [0.0; 2];
        self.model.field().drift(x, &mut v);
        v
    }
}

/// Solves the stationary problem on `opts.grid` (refined internally if requested).
pub fn solve_stationary_fp_2d(model: &SdeModel, opts: &FpOptions) -> Result<FpSolution, FpError> {
    if model.dim() != 2 || opts.grid.dim() != 2 {
        return Err(FpError::NotTwoDimensional);
    }
    if !opts.grid.is_valid() || opts.grid.periodic.iter().any(|&p| p) {
        return Err(FpError::InvalidInput("grid must be a valid non-periodic window"));
    }
    if opts.refine == 0 || !(opts.epsilon >= 0.0) {
        return Err(FpError::InvalidInput("refine must be positive and epsilon nonnegative"));
    }
    let fine = GridSpec { bins: opts.grid.bins.iter().map(|b| b * opts.refine).collect(), ..opts.grid.clone() };
    let (nx, ny) = (fine.bins[0], fine.bins[1]);
    let (hx, hy) = (fine.width(0), fine.width(1));
    let n = nx * ny;
    let idx = |i: usize, j: usize| i * ny + j;
    let active: Vec<bool> = (0..n).map(|c| model.basin().contains(&fine.center(c))).collect();
    let mut co = Coeffs {
        model,
        s2: model.sigma() * model.sigma(),
        eps: opts.epsilon,
        b: alloc::vec![0.0; 2 * model.noise_dim().max(1)],
    };
    let mut a = BandMatrix::zeros(n, ny + 1, ny + 1);
    // flux terms as (cell, coefficient) lists; `None` marks a zero-density ghost
    let mut terms: Vec<(Option<usize>, f64)> = Vec::with_capacity(8);
    for axis in 0..2 {
        let (na, nb) = if axis == 0 { (nx, ny) } else { (ny, nx) };
        let (h, h_other) = if axis == 0 { (hx, hy) } else { (hy, hx) };
        // faces k = 0..=na along `axis`, between cells k-1 and k
        for t in 0..nb {
            for k in 0..=na {
                let cell = |s: usize| if axis == 0 { idx(s, t) } else { idx(t, s) };
                let left = if k > 0 { Some(cell(k - 1)) } else { None };
                let right = if k < na { Some(cell(k)) } else { None };
                let l_act = left.is_some_and(|c| active[c]);
                let r_act = right.is_some_and(|c| active[c]);
                if !l_act && !r_act {
                    continue;
                }
                let interior = l_act && r_act;
                if !interior && opts.boundary == Boundary::ReflectingAtWindow {
                    continue;
                }
                let mut xf = [0.0; 2];
                xf[axis] = fine.lo[axis] + k as f64 * h;
                xf[1 - axis] = fine.lo[1 - axis] + (t as f64 + 0.5) * h_other;
                let d = co.diffusion(&xf);
                let (dnn, dno) = if axis == 0 { (d[0], d[1]) } else { (d[2], d[1]) };
                // u = V_n − ∂_n D_nn − ∂_o D_no at the face
                let mut shift = |dn: f64, dt_: f64| {
                    let mut p = xf;
                    p[axis] += dn;
                    p[1 - axis] += dt_;
                    co.diffusion(&p)
                };
                let (dp, dm) = (shift(0.5 * h, 0.0), shift(-0.5 * h, 0.0));
                let (op, om) = (shift(0.0, 0.5 * h_other), shift(0.0, -0.5 * h_other));
                let (i_nn, i_no) = if axis == 0 { (0, 1) } else { (2, 1) };
                let u = co.drift(&xf)[axis] - (dp[i_nn] - dm[i_nn]) / h - (op[i_no] - om[i_no]) / h_other;
                terms.clear();
                // a wall sits on the face itself, half a cell from the centre
                let hd = if interior { h } else { 0.5 * h };
                let pe = u * hd / dnn;
                let w = dnn / hd;
                terms.push((left.filter(|_| l_act), w * bernoulli(-pe)));
                terms.push((right.filter(|_| r_act), -w * bernoulli(pe)));
                if interior && dno != 0.0 {
                    // −D_no ∂_o ρ averaged over the two adjacent cells
                    for s in [k - 1, k] {
                        let lo = t.saturating_sub(1);
                        let hi = (t + 1).min(nb - 1);
                        if hi == lo {
                            continue;
                        }
                        let span = (hi - lo) as f64 * h_other;
                        let c_hi = if axis == 0 { idx(s, hi) } else { idx(hi, s) };
                        let c_lo = if axis == 0 { idx(s, lo) } else { idx(lo, s) };
                        if active[c_hi] && active[c_lo] {
                            terms.push((Some(c_hi), -0.5 * dno / span));
                            terms.push((Some(c_lo), 0.5 * dno / span));
                        }
                    }
                }
                // J leaves `left` and enters `right`
                for &(c, coef) in terms.iter() {
                    if let Some(c) = c {
                        if let Some(l) = left.filter(|_| l_act) {
                            a.add(l, c, -coef / h)?;
                        }
                        if let Some(r) = right.filter(|_| r_act) {
                            a.add(r, c, coef / h)?;
                        }
                    }
                }
            }
        }
    }
    let scale = a.max_abs_diagonal().max(1e-300);
    for c in 0..n {
        if !active[c] {
            a.set(c, c, -scale)?;
        }
    }
    let shift = 1e-9 * scale;
    let mut shifted = a.clone();
    for c in 0..n {
        shifted.add(c, c, -shift)?;
    }
    let lu = shifted.factor()?;
    let mut v: Vec<f64> = active.iter().map(|&on| if on { 1.0 } else { 0.0 }).collect();
    let mut av = alloc::vec![0.0; n];
    let mut residual = f64::INFINITY;
    let mut lambda = 0.0;
    let mut iterations = 0;
    for it in 1..=opts.max_iter {
        iterations = it;
        let mut w = v.clone();
        lu.solve(&mut w);
        let s: f64 = w.iter().sum();
        let norm = if s.abs() > 0.0 { s } else { w.iter().map(|x| x.abs()).sum() };
        if !(norm.abs() > 0.0) || !norm.is_finite() {
            break;
        }
        for x in w.iter_mut() {
            *x /= norm;
        }
        let change = w.iter().zip(&v).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        v = w;
        a.mul_vec(&v, &mut av);
        let vv: f64 = v.iter().map(|x| x * x).sum();
        lambda = v.iter().zip(&av).map(|(p, q)| p * q).sum::<f64>() / vv;
        let vmax = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
        residual = av.iter().zip(&v).map(|(q, p)| (q - lambda * p).abs()).fold(0.0, f64::max) / (scale * vmax);
        if change < opts.tol * vmax && residual < 1e-8 {
            break;
        }
    }
    if !(residual < 1e-6) {
        return Err(FpError::OracleFailed { residual });
    }
    let min_weight = v.iter().copied().fold(f64::INFINITY, f64::min).min(0.0);
    let mut hist = MeasureHistogram::empty(
        fine,
        match opts.boundary {
            Boundary::ReflectingAtWindow => MeasureKind::Ergodic,
            Boundary::Absorbing => MeasureKind::QuasiErgodic,
        },
        EstimatorKind::FokkerPlanck,
    );
    for (w, x) in hist.weights.iter_mut().zip(&v) {
        *w = x.max(0.0);
    }
    hist.normalize();
    let hist = if opts.refine > 1 { hist.coarsen(opts.refine).ok_or(FpError::InvalidInput("refine"))? } else { hist };
    Ok(FpSolution { histogram: hist, decay_rate: -lambda, residual, iterations, min_weight })
}
