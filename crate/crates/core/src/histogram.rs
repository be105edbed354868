//! Rectangular grids and binned occupation measures.

use alloc::vec::Vec;
use core::ops::ControlFlow;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::math::rem_euclid;
use crate::sde::PathObserver;

/// Uniform rectangular grid over `[lo, hi)` in up to three dimensions. Periodic axes
/// wrap coordinates into the window; other coordinates outside it are not binned.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub bins: Vec<usize>,
    pub periodic: Vec<bool>,
}

impl GridSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, bins: Vec<usize>) -> Self {
        let periodic = alloc::vec![false; lo.len()];
        Self { lo, hi, bins, periodic }
    }

    pub fn square(half_width: f64, bins: usize) -> Self {
        Self::new(alloc::vec![-half_width, -half_width], alloc::vec![half_width, half_width], alloc::vec![bins, bins])
    }

    pub fn with_periodic(mut self, axis: usize) -> Self {
        self.periodic[axis] = true;
        self
    }

    pub fn is_valid(&self) -> bool {
        let d = self.lo.len();
        (1..=3).contains(&d)
            && self.hi.len() == d
            && self.bins.len() == d
            && self.periodic.len() == d
            && self.bins.iter().all(|&b| b > 0)
            && self.lo.iter().zip(&self.hi).all(|(l, h)| l.is_finite() && h.is_finite() && l < h)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn n_bins(&self) -> usize {
        self.bins.iter().product()
    }

    pub fn width(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.bins[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.width(k)).product()
    }

    pub fn bin_diagonal(&self) -> f64 {
        (0..self.dim()).map(|k| self.width(k) * self.width(k)).sum::<f64>().sqrt()
    }

    /// Flat index (last axis fastest) of the bin containing `x`.
    pub fn index(&self, x: &[f64]) -> Option<usize> {
        let mut flat = 0;
        for k in 0..self.dim() {
            let mut v = x[k];
            if self.periodic[k] {
                v = self.lo[k] + rem_euclid(v - self.lo[k], self.hi[k] - self.lo[k]);
            }
            let u = (v - self.lo[k]) / self.width(k);
            if !(u >= 0.0) {
                return None;
            }
            let i = u.floor() as usize;
            let i = if i == self.bins[k] && self.periodic[k] { 0 } else { i };
            if i >= self.bins[k] {
                return None;
            }
            flat = flat * self.bins[k] + i;
        }
        Some(flat)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let d = self.dim();
        let mut idx = alloc::vec![0; d];
        for k in (0..d).rev() {
            idx[k] = flat % self.bins[k];
            flat /= self.bins[k];
        }
        idx
    }

    pub fn center(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat).iter().enumerate().map(|(k, &i)| self.lo[k] + (i as f64 + 0.5) * self.width(k)).collect()
    }

    /// Coarsens by an integer factor per axis.
    pub fn coarsened(&self, factor: usize) -> Option<Self> {
        if factor == 0 || self.bins.iter().any(|b| b % factor != 0) {
            return None;
        }
        Some(Self { bins: self.bins.iter().map(|b| b / factor).collect(), ..self.clone() })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MeasureKind {
    Ergodic,
    QuasiErgodic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EstimatorKind {
    LongPath,
    DiscardOnExit,
    FlemingViot,
    /// Cycle-line quadrature (the `σ = 0` measure).
    CycleLine,
    /// Stationary Fokker–Planck solve.
    FokkerPlanck,
}

/// Binned probability measure.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeasureHistogram {
    pub grid: GridSpec,
    pub weights: Vec<f64>,
    pub kind: MeasureKind,
    pub estimator: EstimatorKind,
    pub total_samples: u64,
    pub burn_in: f64,
    /// Fraction of samples that fell outside the window before normalization.
    pub clipped_fraction: f64,
}

impl MeasureHistogram {
    pub fn empty(grid: GridSpec, kind: MeasureKind, estimator: EstimatorKind) -> Self {
        let n = grid.n_bins();
        Self {
            grid,
            weights: alloc::vec![0.0; n],
            kind,
            estimator,
            total_samples: 0,
            burn_in: 0.0,
            clipped_fraction: 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Scales weights to unit sum; returns `false` when there is no mass.
    pub fn normalize(&mut self) -> bool {
        let s = self.total();
        if !(s > 0.0) {
            return false;
        }
        for w in self.weights.iter_mut() {
            *w /= s;
        }
        true
    }

    /// Density (weight per unit volume) in each bin.
    pub fn density(&self) -> Vec<f64> {
        let v = self.grid.cell_volume();
        self.weights.iter().map(|w| w / v).collect()
    }

    /// Total-variation distance `½ Σ |p − q|` to another histogram on the same grid.
    pub fn total_variation(&self, other: &MeasureHistogram) -> Option<f64> {
        if self.grid != other.grid {
            return None;
        }
        Some(0.5 * self.weights.iter().zip(&other.weights).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }

    /// Sums blocks of `factor^d` bins.
    pub fn coarsen(&self, factor: usize) -> Option<MeasureHistogram> {
        let grid = self.grid.coarsened(factor)?;
        let mut weights = alloc::vec![0.0; grid.n_bins()];
        for (flat, w) in self.weights.iter().enumerate() {
            let idx = self.grid.multi_index(flat);
            let mut target = 0;
            for k in 0..grid.dim() {
                target = target * grid.bins[k] + idx[k] / factor;
            }
            weights[target] += w;
        }
        Some(MeasureHistogram { grid, weights, ..self.clone() })
    }

    /// Component-wise mean of bin centers under the weights.
    pub fn mean(&self) -> Vec<f64> {
        let d = self.grid.dim();
        let mut m = alloc::vec![0.0; d];
        for (flat, w) in self.weights.iter().enumerate() {
            if *w != 0.0 {
                for (mk, ck) in m.iter_mut().zip(self.grid.center(flat)) {
                    *mk += w * ck;
                }
            }
        }
        m
    }
}

/// Occupation counts of one path after a burn-in step.
#[derive(Clone, Debug)]
pub struct Occupation {
    grid: GridSpec,
    burn_in_step: u64,
    pub counts: Vec<u64>,
    pub inside: u64,
    pub outside: u64,
}

impl Occupation {
    pub fn new(grid: GridSpec, burn_in_step: u64) -> Self {
        let n = grid.n_bins();
        Self { grid, burn_in_step, counts: alloc::vec![0; n], inside: 0, outside: 0 }
    }

    pub fn record(&mut self, x: &[f64]) {
        match self.grid.index(x) {
            Some(i) => {
                self.counts[i] += 1;
                self.inside += 1;
            }
            None => self.outside += 1,
        }
    }

    pub fn samples(&self) -> u64 {
        self.inside + self.outside
    }
}

impl PathObserver for Occupation {
    fn observe(&mut self, step: u64, _t: f64, x: &[f64]) -> ControlFlow<()> {
        if step >= self.burn_in_step {
            self.record(x);
        }
        ControlFlow::Continue(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn index_and_center_agree() {
        let g = GridSpec::new(alloc::vec![-1.0, 0.0], alloc::vec![1.0, 4.0], alloc::vec![4, 8]);
        for flat in 0..g.n_bins() {
            assert_eq!(g.index(&g.center(flat)), Some(flat));
        }
        assert_eq!(g.index(&[1.0, 1.0]), None);
        assert_eq!(g.index(&[-1.0, 0.0]), Some(0));
    }

    #[test]
    fn periodic_axis_wraps() {
        let g = GridSpec::new(alloc::vec![1.0, 0.0], alloc::vec![3.0, 6.0], alloc::vec![2, 6]).with_periodic(1);
        assert_eq!(g.index(&[1.5, 6.5]), g.index(&[1.5, 0.5]));
        assert_eq!(g.index(&[1.5, -0.5]), g.index(&[1.5, 5.5]));
    }

    #[test]
    fn coarsening_preserves_mass() {
        let g = GridSpec::square(1.0, 8);
        let mut h = MeasureHistogram::empty(g, MeasureKind::Ergodic, EstimatorKind::LongPath);
        for (i, w) in h.weights.iter_mut().enumerate() {
            *w = (i % 5) as f64;
        }
        h.normalize();
        let c = h.coarsen(2).unwrap();
        assert_eq!(c.grid.bins, alloc::vec![4, 4]);
        assert!((c.total() - 1.0).abs() < 1e-12);
        assert!(h.coarsen(3).is_none());
    }

    proptest! {
        #[test]
        fn normalized_weights_sum_to_one(ws in proptest::collection::vec(0.0..10.0f64, 16)) {
            let mut h = MeasureHistogram::empty(GridSpec::square(1.0, 4), MeasureKind::Ergodic, EstimatorKind::LongPath);
            h.weights.copy_from_slice(&ws);
            if h.normalize() {
                prop_assert!((h.total() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn points_inside_window_get_a_bin(x in -2.0..2.0f64, y in -2.0..2.0f64) {
            let g = GridSpec::square(2.0, 16);
            let i = g.index(&[x, y]).unwrap();
            let c = g.center(i);
            prop_assert!((c[0] - x).abs() <= 0.5 * g.width(0) + 1e-12);
            prop_assert!((c[1] - y).abs() <= 0.5 * g.width(1) + 1e-12);
        }
    }
}
