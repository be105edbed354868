//! Periodic cubic interpolating splines.

use alloc::vec::Vec;

use crate::math::wrap_period;

/// C² cubic spline through `(x_i, y_i)` with `y` periodic over `[x_0, x_0 + period)`.
#[derive(Clone, Debug)]
pub struct PeriodicSpline {
    x0: f64,
    period: f64,
    knots: Vec<f64>,
    values: Vec<f64>,
    /// Second derivatives at the knots.
    moments: Vec<f64>,
}

impl PeriodicSpline {
    /// `knots` strictly increasing inside `[knots[0], knots[0] + period)`.
    pub fn new(knots: Vec<f64>, values: Vec<f64>, period: f64) -> Option<Self> {
        let n = knots.len();
        if n < 3 || values.len() != n || !(period > 0.0) {
            return None;
        }
        let x0 = knots[0];
        if knots.windows(2).any(|w| !(w[1] > w[0])) || knots[n - 1] >= x0 + period {
            return None;
        }
        let h = |i: usize| {
            if i + 1 < n {
                knots[i + 1] - knots[i]
            } else {
                x0 + period - knots[n - 1]
            }
        };
        // cyclic tridiagonal system h_{i-1} M_{i-1} + 2(h_{i-1}+h_i) M_i + h_i M_{i+1} = rhs_i
        let mut sub = alloc::vec![0.0; n];
        let mut diag = alloc::vec![0.0; n];
        let mut sup = alloc::vec![0.0; n];
        let mut rhs = alloc::vec![0.0; n];
        for i in 0..n {
            let im = (i + n - 1) % n;
            let ip = (i + 1) % n;
            let hm = h(im);
            let hi = h(i);
            sub[i] = hm;
            diag[i] = 2.0 * (hm + hi);
            sup[i] = hi;
            rhs[i] = 6.0 * ((values[ip] - values[i]) / hi - (values[i] - values[im]) / hm);
        }
        let moments = solve_cyclic(&sub, &diag, &sup, &rhs)?;
        Some(Self { x0, period, knots, values, moments })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    fn locate(&self, x: f64) -> (usize, f64, f64) {
        let n = self.knots.len();
        let u = self.x0 + wrap_period(x - self.x0, self.period);
        let i = match self.knots.binary_search_by(|k| k.partial_cmp(&u).unwrap()) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let right = if i + 1 < n { self.knots[i + 1] } else { self.x0 + self.period };
        (i, u - self.knots[i], right - self.knots[i])
    }

    /// Value, first and second derivative at `x`.
    pub fn eval_all(&self, x: f64) -> (f64, f64, f64) {
        let n = self.knots.len();
        let (i, t, h) = self.locate(x);
        let j = (i + 1) % n;
        let (yi, yj) = (self.values[i], self.values[j]);
        let (mi, mj) = (self.moments[i], self.moments[j]);
        let a = (h - t) / h;
        let b = t / h;
        let value = a * yi + b * yj + ((a * a * a - a) * mi + (b * b * b - b) * mj) * h * h / 6.0;
        let slope = (yj - yi) / h + h / 6.0 * (-(3.0 * a * a - 1.0) * mi + (3.0 * b * b - 1.0) * mj);
        let curvature = a * mi + b * mj;
        (value, slope, curvature)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_all(x).0
    }
}

/// Solves a cyclic tridiagonal system (Sherman–Morrison on the Thomas algorithm).
fn solve_cyclic(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let alpha = sup[n - 1];
    let beta = sub[0];
    let gamma = -diag[0];
    let mut d = diag.to_vec();
    d[0] -= gamma;
    d[n - 1] -= alpha * beta / gamma;
    let x = solve_tridiagonal(sub, &d, sup, rhs)?;
    let mut u = alloc::vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = solve_tridiagonal(sub, &d, sup, &u)?;
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    Some(x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect())
}

fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut c = alloc::vec![0.0; n];
    let mut d = alloc::vec![0.0; n];
    if diag[0] == 0.0 {
        return None;
    }
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * c[i - 1];
        if m == 0.0 {
            return None;
        }
        c[i] = sup[i] / m;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Some(d)
}
