//! Uniform periodic discretization of (−π, π).
//!
//! Nodes are `θ_j = (j − N/2)·h` with `h = 2π/N`, so that `θ_0 = −π`, the
//! node `θ_{N/2} = 0` is exact, and `θ_{N/2+k} = −θ_{N/2−k}` holds bitwise.
//! That last property is what lets symmetry checks about θ = 0 be exact.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest grid accepted by [`PeriodicGrid::new`].
pub const MIN_POINTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicGrid {
    n_points: usize,
    spacing: f64,
}

impl PeriodicGrid {
    /// `n_points` must be even and at least [`MIN_POINTS`].
    pub fn new(n_points: usize) -> Result<Self> {
        if n_points < MIN_POINTS || !n_points.is_multiple_of(2) {
            return Err(Error::Parameter(format!(
                "grid size must be even and >= {MIN_POINTS}, got {n_points}"
            )));
        }
        Ok(Self {
            n_points,
            spacing: 2.0 * PI / n_points as f64,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    #[inline]
    pub fn node(&self, j: usize) -> f64 {
        (j as f64 - (self.n_points / 2) as f64) * self.spacing
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.node(j)).collect()
    }

    /// Index of the node mirrored about θ = 0 (θ_{mirror(j)} = −θ_j, with
    /// θ = −π mapping to itself since ±π coincide).
    #[inline]
    pub fn mirror(&self, j: usize) -> usize {
        (self.n_points - j) % self.n_points
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> PeriodicGridFunction {
        PeriodicGridFunction {
            grid: *self,
            values: (0..self.n_points).map(|j| f(self.node(j))).collect(),
        }
    }

    pub fn constant(&self, c: f64) -> PeriodicGridFunction {
        PeriodicGridFunction {
            grid: *self,
            values: vec![c; self.n_points],
        }
    }
}

/// Values sampled at the nodes of a [`PeriodicGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicGridFunction {
    grid: PeriodicGrid,
    values: Vec<f64>,
}

impl PeriodicGridFunction {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::Parameter(format!(
                "expected {} values, got {}",
                grid.n_points(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two functions on the same grid.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid.n_points() != other.grid.n_points() {
            return Err(Error::Parameter(format!(
                "grid mismatch: {} vs {} points",
                self.grid.n_points(),
                other.grid.n_points()
            )));
        }
        Ok(())
    }
}

/// Rectangle rule `h Σ f_j`, which is the trapezoid rule on a periodic grid.
pub fn quadrature(f: &PeriodicGridFunction) -> f64 {
    f.grid.spacing() * f.values.iter().sum::<f64>()
}

/// Centered periodic finite differences of order 1 to 4 (second-order accurate).
pub fn derivative(f: &PeriodicGridFunction, order: u32) -> Result<PeriodicGridFunction> {
    let n = f.len();
    let h = f.grid.spacing();
    let v = &f.values;
    let at = |j: usize, k: isize| v[(j as isize + k).rem_euclid(n as isize) as usize];
    let values: Vec<f64> = match order {
        1 => (0..n).map(|j| (at(j, 1) - at(j, -1)) / (2.0 * h)).collect(),
        2 => (0..n)
            .map(|j| (at(j, 1) - 2.0 * at(j, 0) + at(j, -1)) / (h * h))
            .collect(),
        3 => (0..n)
            .map(|j| (at(j, 2) - 2.0 * at(j, 1) + 2.0 * at(j, -1) - at(j, -2)) / (2.0 * h.powi(3)))
            .collect(),
        4 => (0..n)
            .map(|j| {
                (at(j, 2) - 4.0 * at(j, 1) + 6.0 * at(j, 0) - 4.0 * at(j, -1) + at(j, -2))
                    / h.powi(4)
            })
            .collect(),
        _ => {
            return Err(Error::Parameter(format!(
                "derivative order must be 1..=4, got {order}"
            )))
        }
    };
    Ok(PeriodicGridFunction {
        grid: f.grid,
        values,
    })
}

/// One-sided difference `(f_{j+1} − f_j)/h`, i.e. the gradient at the face
/// between node j and node j+1.
pub fn face_gradient(f: &PeriodicGridFunction) -> Vec<f64> {
    let n = f.len();
    let h = f.grid.spacing();
    (0..n)
        .map(|j| (f.values[(j + 1) % n] - f.values[j]) / h)
        .collect()
}

pub fn l2_norm(f: &PeriodicGridFunction) -> f64 {
    (f.grid.spacing() * f.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

pub fn linf_norm(f: &PeriodicGridFunction) -> f64 {
    f.values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn h1_norm(f: &PeriodicGridFunction) -> f64 {
    let d = derivative(f, 1).expect("order 1 is valid");
    let l2 = l2_norm(f);
    let dl2 = l2_norm(&d);
    (l2 * l2 + dl2 * dl2).sqrt()
}
