//! Running moments and small least-squares fits.

use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Welford running mean and variance.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Welford {
    pub n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Combines two accumulators (Chan et al. pairwise update).
    pub fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance (zero for fewer than two samples).
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for Welford {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut w = Welford::new();
        for x in iter {
            w.push(x);
        }
        w
    }
}

/// Straight-line fit `y = intercept + slope·x`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_error: f64,
}

/// Ordinary least squares; needs at least two distinct abscissae.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_std_error = if n > 2 {
        let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        (rss / (n - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    Some(LineFit { slope, intercept, slope_std_error })
}

/// Fit of `y = m·x` through the origin.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OriginFit {
    pub m: f64,
    pub m_std_error: f64,
    pub residuals: Vec<f64>,
}

/// Weighted least squares `y ≈ m x` with weights `w_i` (typically `1/se_i²`).
pub fn weighted_fit_through_origin(x: &[f64], y: &[f64], w: &[f64]) -> Option<OriginFit> {
    if x.is_empty() || x.len() != y.len() || x.len() != w.len() {
        return None;
    }
    let sxx: f64 = x.iter().zip(w).map(|(a, wi)| wi * a * a).sum();
    if !(sxx > 0.0) || !sxx.is_finite() {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).zip(w).map(|((a, b), wi)| wi * a * b).sum();
    let m = sxy / sxx;
    let residuals: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - m * a).collect();
    Some(OriginFit { m, m_std_error: (1.0 / sxx).sqrt(), residuals })
}

/// Weights `1/se²` with a floor so exact (zero-error) points do not dominate.
pub fn inverse_variance_weights(std_errors: &[f64]) -> Vec<f64> {
    let positive: Vec<f64> = std_errors.iter().copied().filter(|s| *s > 0.0).collect();
    let floor = if positive.is_empty() { 1.0 } else { positive.iter().copied().fold(f64::INFINITY, f64::min) * 1e-3 };
    std_errors.iter().map(|s| 1.0 / s.max(floor).powi(2)).collect()
}
