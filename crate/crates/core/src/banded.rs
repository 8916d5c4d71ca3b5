//! Square banded matrices with an LU solve (partial pivoting).
//!
//! Radial grids give tridiagonal operators, rectangles give a 5-point stencil
//! whose half-bandwidth is `nx`. Both fit one dense band layout.

use crate::error::{Error, Result};

/// Banded `n x n` matrix with equal lower and upper half-bandwidth `bw`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    n: usize,
    bw: usize,
    // row-major band: entry (i, j) lives at i * width + (j + bw - i)
    data: Vec<f64>,
}

impl SparseOperator {
    pub fn zeros(n: usize, bw: usize) -> Self {
        SparseOperator { n, bw, data: vec![0.0; n * (2 * bw + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    fn width(&self) -> usize {
        2 * self.bw + 1
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        (i.abs_diff(j) <= self.bw && i < self.n && j < self.n).then(|| i * self.width() + j + self.bw - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.data[k])
    }

    /// Adds `v` to entry `(i, j)`. Panics outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.slot(i, j).unwrap_or_else(|| panic!("entry ({i}, {j}) outside band {}", self.bw));
        self.data[k] += v;
    }

    fn cols(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.bw)..(i + self.bw + 1).min(self.n)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.cols(i).map(|j| self.get(i, j) * x[j]).sum()).collect()
    }

    /// `|A| |x|`, used for componentwise backward-error estimates.
    pub fn abs_apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.cols(i).map(|j| (self.get(i, j) * x[j]).abs()).sum()).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for j in self.cols(i) {
                m = m.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }

    /// Multiplies row `i` by `s[i]`.
    pub fn scale_rows(&mut self, s: &[f64]) {
        let w = self.width();
        for (row, &si) in self.data.chunks_mut(w).zip(s) {
            row.iter_mut().for_each(|v| *v *= si);
        }
    }

    /// Solves `A x = b` by banded Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(b.len(), self.n);
        let (n, kl) = (self.n, self.bw);
        // pivoting can grow the upper band to kl + ku
        let ku = 2 * kl;
        let w = kl + ku + 1;
        let at = |i: usize, j: usize| i * w + j + kl - i;
        let mut lu = vec![0.0; n * w];
        for i in 0..n {
            for j in self.cols(i) {
                lu[at(i, j)] = self.get(i, j);
            }
        }
        let mut x = b.to_vec();
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + ku).min(n - 1);
            let p = (k..=last_row)
                .max_by(|&a, &b| lu[at(a, k)].abs().total_cmp(&lu[at(b, k)].abs()).then(b.cmp(&a)))
                .unwrap();
            let piv = lu[at(p, k)];
            if !(piv.abs() > scale * f64::EPSILON * 1e-4) || !piv.is_finite() {
                return Err(Error::Singular(k));
            }
            if p != k {
                for j in k..=last_col {
                    lu.swap(at(k, j), at(p, j));
                }
                x.swap(k, p);
            }
            for i in k + 1..=last_row {
                let l = lu[at(i, k)] / piv;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..=last_col {
                    lu[at(i, j)] -= l * lu[at(k, j)];
                }
                x[i] -= l * x[k];
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + ku).min(n - 1);
            let s: f64 = (k + 1..=last_col).map(|j| lu[at(k, j)] * x[j]).sum();
            x[k] = (x[k] - s) / lu[at(k, k)];
        }
        Ok(x)
    }
}
