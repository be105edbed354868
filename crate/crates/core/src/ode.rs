//! Classical fourth-order Runge–Kutta for the deterministic flow `ẋ = V(x)`.

use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::sde::VectorField;

/// Reusable stage buffers for RK4 steps of a fixed dimension.
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: alloc::vec![0.0; dim],
            k2: alloc::vec![0.0; dim],
            k3: alloc::vec![0.0; dim],
            k4: alloc::vec![0.0; dim],
            tmp: alloc::vec![0.0; dim],
        }
    }

    pub fn step(&mut self, field: &dyn VectorField, x: &mut [f64], h: f64) {
        let d = x.len();
        field.drift(x, &mut self.k1);
        for i in 0..d {
            self.tmp[i] = x[i] + 0.5 * h * self.k1[i];
        }
        field.drift(&self.tmp, &mut self.k2);
        for i in 0..d {
            self.tmp[i] = x[i] + 0.5 * h * self.k2[i];
        }
        field.drift(&self.tmp, &mut self.k3);
        for i in 0..d {
            self.tmp[i] = x[i] + h * self.k3[i];
        }
        field.drift(&self.tmp, &mut self.k4);
        for i in 0..d {
            x[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// Flows `x` for time `t` (which may be zero) with steps no longer than `max_step`.
pub fn flow(field: &dyn VectorField, x: &[f64], t: f64, max_step: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    if t <= 0.0 {
        return y;
    }
    let n = (t / max_step).ceil().max(1.0) as usize;
    let h = t / n as f64;
    let mut rk = Rk4::new(x.len());
    for _ in 0..n {
        rk.step(field, &mut y, h);
    }
    y
}
