//! Small dense helpers for states of dimension `d ≤ 3`.

use alloc::vec::Vec;
use core::f64::consts::TAU;
#[cfg(not(feature = "std"))]
use num_traits::Float;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Euclidean remainder for positive `period` (not provided by `core` for floats).
pub fn rem_euclid(x: f64, period: f64) -> f64 {
    let r = x % period;
    if r < 0.0 {
        r + period
    } else {
        r
    }
}

/// Reduces `x` into `[0, period)`.
pub fn wrap_period(x: f64, period: f64) -> f64 {
    let r = rem_euclid(x, period);
    // rem_euclid can round up to exactly `period` for tiny negative inputs
    if r >= period {
        0.0
    } else {
        r
    }
}

/// Circular difference `b - a` reduced to `(-period/2, period/2]`.
pub fn circular_diff(a: f64, b: f64, period: f64) -> f64 {
    let mut d = rem_euclid(b - a, period);
    if d > 0.5 * period {
        d -= period;
    }
    d
}

/// Angle of `(x, y)` in `[0, 2π)`.
pub fn angle(x: f64, y: f64) -> f64 {
    let a = y.atan2(x);
    if a < 0.0 {
        a + TAU
    } else {
        a
    }
}

/// `out = M v` for a row-major `rows × cols` matrix.
pub fn mat_vec(m: &[f64], rows: usize, cols: usize, v: &[f64], out: &mut [f64]) {
    for i in 0..rows {
        out[i] = dot(&m[i * cols..(i + 1) * cols], v);
    }
}

/// `B Bᵀ` for a row-major `d × m` matrix, returned row-major `d × d`.
pub fn outer_self(b: &[f64], d: usize, m: usize) -> Vec<f64> {
    let mut out = alloc::vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = dot(&b[i * m..(i + 1) * m], &b[j * m..(j + 1) * m]);
        }
    }
    out
}

/// `Tr H[B·, B·] = Σ_k (B e_k)ᵀ H (B e_k)` for a symmetric `d × d` matrix `H`
/// and a row-major `d × m` matrix `B`.
pub fn trace_quadratic(h: &[f64], b: &[f64], d: usize, m: usize) -> f64 {
    let mut total = 0.0;
    for k in 0..m {
        for i in 0..d {
            let bi = b[i * m + k];
            if bi == 0.0 {
                continue;
            }
            for j in 0..d {
                total += bi * h[i * d + j] * b[j * m + k];
            }
        }
    }
    total
}

/// Eigenvalues of a symmetric matrix of dimension ≤ 3 (Jacobi sweeps).
pub fn symmetric_eigenvalues(m: &[f64], d: usize) -> Vec<f64> {
    let mut a: Vec<f64> = m.to_vec();
    for _ in 0..64 {
        let mut off = 0.0;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    off += a[i * d + j] * a[i * d + j];
                }
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[p * d + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = 0.5 * (a[q * d + q] - a[p * d + p]) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..d).map(|i| a[i * d + i]).collect()
}

/// Spectral radius of a small square matrix by power iteration on `MᵀM`-free
/// repeated multiplication; adequate for Floquet multiplier estimates.
pub fn spectral_radius(m: &[f64], n: usize) -> f64 {
    match n {
        0 => 0.0,
        1 => m[0].abs(),
        2 => {
            let tr = m[0] + m[3];
            let det = m[0] * m[3] - m[1] * m[2];
            let disc = tr * tr - 4.0 * det;
            if disc >= 0.0 {
                let r = disc.sqrt();
                ((tr + r) * 0.5).abs().max(((tr - r) * 0.5).abs())
            } else {
                det.abs().sqrt()
            }
        }
        _ => {
            let mut v = alloc::vec![1.0; n];
            let mut w = alloc::vec![0.0; n];
            let mut rho = 0.0;
            for _ in 0..500 {
                mat_vec(m, n, n, &v, &mut w);
                let nw = norm(&w);
                if nw == 0.0 {
                    return 0.0;
                }
                rho = nw / norm(&v);
                for (vi, wi) in v.iter_mut().zip(&w) {
                    *vi = wi / nw;
                }
            }
            rho
        }
    }
}
