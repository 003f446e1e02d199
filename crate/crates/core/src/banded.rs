//! Direct solver for cyclic banded linear systems.
//!
//! A periodic stencil of half-width `p` couples node `j` to nodes `j±1..j±p`
//! modulo `n`. Reordering the unknowns as `0, n−1, 1, n−2, 2, …` places every
//! wrap-around coupling within distance `2p` of the diagonal, so the system
//! becomes an ordinary band matrix that Gaussian elimination with partial
//! pivoting handles in `O(n p²)` work.

use crate::error::{Error, Result};

/// Square `n × n` matrix whose row `i` is nonzero only in columns
/// `i−p ..= i+p` (indices modulo `n`).
#[derive(Debug, Clone)]
pub struct CyclicBandMatrix {
    n: usize,
    half_bw: usize,
    coeffs: Vec<f64>,
}

impl CyclicBandMatrix {
    pub fn new(n: usize, half_bw: usize) -> Result<Self> {
        if n < 2 * half_bw + 1 {
            return Err(Error::Parameter(format!(
                "cyclic band matrix needs n >= {} for half bandwidth {half_bw}, got {n}",
                2 * half_bw + 1
            )));
        }
        Ok(Self {
            n,
            half_bw,
            coeffs: vec![0.0; n * (2 * half_bw + 1)],
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.half_bw
    }

    #[inline]
    fn slot(&self, row: usize, offset: isize) -> usize {
        let p = self.half_bw as isize;
        assert!(
            offset.abs() <= p,
            "offset {offset} outside half bandwidth {p}"
        );
        row * (2 * self.half_bw + 1) + (offset + p) as usize
    }

    /// Entry at row `row`, column `row + offset (mod n)`.
    pub fn get(&self, row: usize, offset: isize) -> f64 {
        self.coeffs[self.slot(row, offset)]
    }

    pub fn add(&mut self, row: usize, offset: isize, value: f64) {
        let s = self.slot(row, offset);
        self.coeffs[s] += value;
    }

    pub fn set(&mut self, row: usize, offset: isize, value: f64) {
        let s = self.slot(row, offset);
        self.coeffs[s] = value;
    }

    #[inline]
    fn column(&self, row: usize, offset: isize) -> usize {
        (row as isize + offset).rem_euclid(self.n as isize) as usize
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let p = self.half_bw as isize;
        (0..self.n)
            .map(|i| {
                (-p..=p)
                    .map(|k| self.get(i, k) * x[self.column(i, k)])
                    .sum()
            })
            .collect()
    }

    /// Solves `A x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if rhs.len() != n {
            return Err(Error::Parameter(format!(
                "right-hand side has length {}, expected {n}",
                rhs.len()
            )));
        }
        let order = interleaved_order(n);
        let mut pos = vec![0usize; n];
        for (q, &node) in order.iter().enumerate() {
            pos[node] = q;
        }

        let p = self.half_bw as isize;
        let mut bw = 0usize;
        for i in 0..n {
            for k in -p..=p {
                if self.get(i, k) != 0.0 {
                    bw = bw.max(pos[i].abs_diff(pos[self.column(i, k)]));
                }
            }
        }

        let mut band = Band::new(n, bw);
        let mut b = vec![0.0; n];
        for i in 0..n {
            let r = pos[i];
            b[r] = rhs[i];
            for k in -p..=p {
                let v = self.get(i, k);
                if v != 0.0 {
                    *band.at(r, pos[self.column(i, k)]) += v;
                }
            }
        }
        let y = band.solve_in_place(&mut b)?;
        Ok((0..n).map(|i| y[pos[i]]).collect())
    }
}

fn interleaved_order(n: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(n);
    let (mut lo, mut hi) = (0usize, n);
    while lo < hi {
        order.push(lo);
        lo += 1;
        if lo < hi {
            hi -= 1;
            order.push(hi);
        }
    }
    order
}

/// Band storage with room for the fill produced by partial pivoting:
/// row `i` holds columns `i−bw ..= i+2bw`.
struct Band {
    n: usize,
    bw: usize,
    width: usize,
    data: Vec<f64>,
}

impl Band {
    fn new(n: usize, bw: usize) -> Self {
        let width = 3 * bw + 1;
        Self {
            n,
            bw,
            width,
            data: vec![0.0; n * width],
        }
    }

    #[inline]
    fn idx(&self, row: usize, col: usize) -> usize {
        debug_assert!(col + self.bw >= row && col <= row + 2 * self.bw);
        row * self.width + (col + self.bw - row)
    }

    #[inline]
    fn at(&mut self, row: usize, col: usize) -> &mut f64 {
        let i = self.idx(row, col);
        &mut self.data[i]
    }

    #[inline]
    fn get(&self, row: usize, col: usize) -> f64 {
        self.data[self.idx(row, col)]
    }

    fn solve_in_place(&mut self, b: &mut [f64]) -> Result<Vec<f64>> {
        let (n, bw) = (self.n, self.bw);
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let last_row = (k + bw).min(n - 1);
            let last_col = (k + 2 * bw).min(n - 1);
            let (piv, pval) = (k..=last_row)
                .map(|r| (r, self.get(r, k).abs()))
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .expect("non-empty pivot range");
            if pval <= n as f64 * f64::EPSILON * scale || !pval.is_finite() {
                return Err(Error::Numerical(format!(
                    "singular band matrix at elimination step {k}"
                )));
            }
            if piv != k {
                for c in k..=last_col {
                    let (a, bidx) = (self.idx(k, c), self.idx(piv, c));
                    self.data.swap(a, bidx);
                }
                b.swap(k, piv);
            }
            let d = self.get(k, k);
            for i in k + 1..=last_row {
                let l = self.get(i, k) / d;
                if l == 0.0 {
                    continue;
                }
                for c in k..=last_col {
                    let u = self.get(k, c);
                    *self.at(i, c) -= l * u;
                }
                b[i] -= l * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let last_col = (i + 2 * bw).min(n - 1);
            let s: f64 = (i + 1..=last_col).map(|c| self.get(i, c) * x[c]).sum();
            x[i] = (b[i] - s) / self.get(i, i);
        }
        Ok(x)
    }
}
