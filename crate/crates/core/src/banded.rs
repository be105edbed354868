//! Banded matrices with an LU factorization using partial pivoting.
//!
//! Storage follows the LAPACK `gbtrf` layout: column-major with `kl` extra rows
//! on top for the fill-in produced by row interchanges.

use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BandError {
    #[error("matrix is singular at column {column}")]
    Singular { column: usize },
    #[error("entry ({row}, {col}) lies outside the band")]
    OutsideBand { row: usize, col: usize },
}

/// Square matrix with `kl` sub- and `ku` super-diagonals.
#[derive(Clone, Debug, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Self { n, kl, ku, ldab, ab: alloc::vec![0.0; ldab * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn in_band(&self, row: usize, col: usize) -> bool {
        row < self.n && col < self.n && row + self.ku >= col && col + self.kl >= row
    }

    #[inline]
    fn slot(&self, row: usize, col: usize) -> usize {
        col * self.ldab + self.kl + self.ku + row - col
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        if self.in_band(row, col) {
            self.ab[self.slot(row, col)]
        } else {
            0.0
        }
    }

    pub fn add(&mut self, row: usize, col: usize, v: f64) -> Result<(), BandError> {
        if !self.in_band(row, col) {
            return Err(BandError::OutsideBand { row, col });
        }
        let s = self.slot(row, col);
        self.ab[s] += v;
        Ok(())
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) -> Result<(), BandError> {
        if !self.in_band(row, col) {
            return Err(BandError::OutsideBand { row, col });
        }
        let s = self.slot(row, col);
        self.ab[s] = v;
        Ok(())
    }

    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            *o = (lo..=hi).map(|j| self.ab[self.slot(i, j)] * x[j]).sum();
        }
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i).abs()).fold(0.0, f64::max)
    }

    /// Factors `P A = L U` in place.
    pub fn factor(mut self) -> Result<BandLu, BandError> {
        let n = self.n;
        let kl = self.kl;
        let kv = self.kl + self.ku;
        let ldab = self.ldab;
        // fill-in rows start at zero
        for j in 0..n {
            for r in 0..kl {
                self.ab[j * ldab + r] = 0.0;
            }
        }
        let at = |i: usize, j: usize| j * ldab + kv + i - j;
        let mut ipiv = alloc::vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0;
            let mut best = self.ab[at(j, j)].abs();
            for k in 1..=km {
                let v = self.ab[at(j + k, j)].abs();
                if v > best {
                    best = v;
                    jp = k;
                }
            }
            ipiv[j] = j + jp;
            if best == 0.0 {
                return Err(BandError::Singular { column: j });
            }
            ju = ju.max((j + self.ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    self.ab.swap(at(j, c), at(j + jp, c));
                }
            }
            let pivot = self.ab[at(j, j)];
            for k in 1..=km {
                self.ab[at(j + k, j)] /= pivot;
            }
            for c in j + 1..=ju {
                let a = self.ab[at(j, c)];
                if a != 0.0 {
                    for k in 1..=km {
                        let l = self.ab[at(j + k, j)];
                        self.ab[at(j + k, c)] -= l * a;
                    }
                }
            }
        }
        Ok(BandLu { m: self, ipiv })
    }
}

/// Output of [`BandMatrix::factor`].
#[derive(Clone, Debug)]
pub struct BandLu {
    m: BandMatrix,
    ipiv: Vec<usize>,
}

impl BandLu {
    /// Solves `A x = b`, overwriting `b` with `x`.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.m.n;
        let kl = self.m.kl;
        let kv = self.m.kl + self.m.ku;
        let ldab = self.m.ldab;
        let ab = &self.m.ab;
        let at = |i: usize, j: usize| j * ldab + kv + i - j;
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = kl.min(n - 1 - j);
            let bj = b[j];
            for k in 1..=km {
                b[j + k] -= ab[at(j + k, j)] * bj;
            }
        }
        for j in (0..n).rev() {
            b[j] /= ab[at(j, j)];
            let bj = b[j];
            for i in j.saturating_sub(kv)..j {
                b[i] -= ab[at(i, j)] * bj;
            }
        }
    }
}
