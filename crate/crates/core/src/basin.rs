//! Open sets used as basins of attraction.
//!
//! A basin reports membership and a lower bound on the distance to its boundary.
//! `contains(x)` must imply `boundary_distance(x) > 0`.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::math::{distance, norm};

pub trait Basin: Send + Sync {
    fn contains(&self, x: &[f64]) -> bool;
    /// Distance to the boundary (a lower bound is acceptable); `+∞` for
    /// unbounded sets without boundary.
    fn boundary_distance(&self, x: &[f64]) -> f64;
    fn description(&self) -> String;
}

/// All of `ℝᵈ`.
#[derive(Clone, Debug, Default)]
pub struct WholeSpace;

impl Basin for WholeSpace {
    fn contains(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.is_finite())
    }
    fn boundary_distance(&self, _x: &[f64]) -> f64 {
        f64::INFINITY
    }
    fn description(&self) -> String {
        "whole space".into()
    }
}

/// `ℝᵈ` with one point removed.
#[derive(Clone, Debug)]
pub struct PuncturedSpace {
    pub center: Vec<f64>,
}

impl Basin for PuncturedSpace {
    fn contains(&self, x: &[f64]) -> bool {
        self.boundary_distance(x) > 0.0
    }
    fn boundary_distance(&self, x: &[f64]) -> f64 {
        distance(x, &self.center)
    }
    fn description(&self) -> String {
        alloc::format!("space punctured at {:?}", self.center)
    }
}

/// Open ball `‖x − center‖ < radius`.
#[derive(Clone, Debug)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Basin for Ball {
    fn contains(&self, x: &[f64]) -> bool {
        self.boundary_distance(x) > 0.0
    }
    fn boundary_distance(&self, x: &[f64]) -> f64 {
        let d = self.radius - distance(x, &self.center);
        if d.is_nan() {
            0.0
        } else {
            d.max(0.0)
        }
    }
    fn description(&self) -> String {
        alloc::format!("ball of radius {} at {:?}", self.radius, self.center)
    }
}

/// Planar annulus `inner < ‖(x, y) − center‖ < outer` in Cartesian coordinates.
#[derive(Clone, Debug)]
pub struct Annulus {
    pub center: [f64; 2],
    pub inner: f64,
    pub outer: f64,
}

impl Basin for Annulus {
    fn contains(&self, x: &[f64]) -> bool {
        self.boundary_distance(x) > 0.0
    }
    fn boundary_distance(&self, x: &[f64]) -> f64 {
        let r = norm(&[x[0] - self.center[0], x[1] - self.center[1]]);
        let d = (r - self.inner).min(self.outer - r);
        if d.is_nan() {
            0.0
        } else {
            d.max(0.0)
        }
    }
    fn description(&self) -> String {
        alloc::format!("annulus {} < r < {}", self.inner, self.outer)
    }
}

/// `lo < x[axis] < hi`, other coordinates free. Used for polar charts where the
/// radius is one coordinate.
#[derive(Clone, Debug)]
pub struct CoordinateBand {
    pub axis: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Basin for CoordinateBand {
    fn contains(&self, x: &[f64]) -> bool {
        self.boundary_distance(x) > 0.0
    }
    fn boundary_distance(&self, x: &[f64]) -> f64 {
        let v = x[self.axis];
        let d = (v - self.lo).min(self.hi - v);
        if d.is_nan() {
            0.0
        } else {
            d.max(0.0)
        }
    }
    fn description(&self) -> String {
        alloc::format!("{} < x[{}] < {}", self.lo, self.axis, self.hi)
    }
}

/// Open positive orthant.
#[derive(Clone, Debug, Default)]
pub struct PositiveOrthant;

impl Basin for PositiveOrthant {
    fn contains(&self, x: &[f64]) -> bool {
        self.boundary_distance(x) > 0.0
    }
    fn boundary_distance(&self, x: &[f64]) -> f64 {
        let d = x.iter().copied().fold(f64::INFINITY, f64::min);
        if d.is_nan() {
            0.0
        } else {
            d.max(0.0)
        }
    }
    fn description(&self) -> String {
        "open positive orthant".into()
    }
}

/// Intersection of two open sets.
#[derive(Clone)]
pub struct Intersection {
    pub first: Arc<dyn Basin>,
    pub second: Arc<dyn Basin>,
}

impl Basin for Intersection {
    fn contains(&self, x: &[f64]) -> bool {
        self.first.contains(x) && self.second.contains(x)
    }
    fn boundary_distance(&self, x: &[f64]) -> f64 {
        if !self.contains(x) {
            return 0.0;
        }
        self.first.boundary_distance(x).min(self.second.boundary_distance(x))
    }
    fn description(&self) -> String {
        alloc::format!("({}) ∩ ({})", self.first.description(), self.second.description())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::boxed::Box;
    use proptest::prelude::*;

    fn basins() -> Vec<Box<dyn Basin>> {
        alloc::vec![
            Box::new(WholeSpace),
            Box::new(PuncturedSpace { center: alloc::vec![0.0, 0.0] }),
            Box::new(Ball { center: alloc::vec![0.5, -0.5], radius: 2.0 }),
            Box::new(Annulus { center: [0.0, 0.0], inner: 1.0, outer: 3.0 }),
            Box::new(CoordinateBand { axis: 0, lo: 1.0, hi: 3.0 }),
            Box::new(PositiveOrthant),
        ]
    }

    proptest! {
        // membership is open: a step shorter than the boundary distance stays inside
        #[test]
        fn contains_is_open(x in -4.0..4.0f64, y in -4.0..4.0f64, ang in 0.0..std::f64::consts::TAU, frac in 0.0..0.999f64) {
            for b in basins() {
                let p = [x, y];
                if b.contains(&p) {
                    let d = b.boundary_distance(&p);
                    prop_assert!(d > 0.0);
                    let step = if d.is_finite() { frac * d } else { frac * 10.0 };
                    let q = [x + step * ang.cos(), y + step * ang.sin()];
                    prop_assert!(b.contains(&q), "{} left by a short step", b.description());
                }
            }
        }
    }

    #[test]
    fn intersection_takes_smaller_distance() {
        let i = Intersection {
            first: Arc::new(Annulus { center: [0.0, 0.0], inner: 1.0, outer: 3.0 }),
            second: Arc::new(Ball { center: alloc::vec![0.0, 0.0], radius: 2.5 }),
        };
        assert!((i.boundary_distance(&[2.0, 0.0]) - 0.5).abs() < 1e-12);
        assert!(!i.contains(&[2.7, 0.0]));
    }
}
