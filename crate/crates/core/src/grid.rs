//! Uniform sampling grids and complex sampled functions.
//!
//! Samples sit at cell midpoints: x_j = x_min + (j + 1/2) dx. Midpoint
//! placement keeps box-like windows away from their own support edges, so
//! plain Riemann sums reproduce continuum inner products exactly for
//! piecewise-constant integrands aligned with the lattice.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// A uniform midpoint grid on [x_min, x_max] with a power-of-two point count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::InvalidArgument(format!(
                "grid interval [{x_min}, {x_max}] is empty or not finite"
            )));
        }
        if n_points < 2 || !n_points.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "n_points must be a power of two >= 2, got {n_points}"
            )));
        }
        Ok(GridSpec { x_min, x_max, n_points })
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_points as f64
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Position of sample j (midpoint convention).
    pub fn point(&self, j: usize) -> f64 {
        self.x_min + (j as f64 + 0.5) * self.dx()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |j| self.point(j))
    }

    pub fn nyquist(&self) -> f64 {
        0.5 / self.dx()
    }

    /// Frequency spacing of the DFT dual grid.
    pub fn freq_step(&self) -> f64 {
        1.0 / (self.x_max - self.x_min)
    }

    /// Grid whose sample j sits at DFT bin frequency (j - N/2) / (x_max - x_min).
    /// Built so that `point(j)` lands exactly on the bin centers.
    pub fn dft_dual(&self) -> GridSpec {
        let ds = self.freq_step();
        let half = self.n_points as f64 / 2.0;
        GridSpec {
            x_min: -half * ds - 0.5 * ds,
            x_max: half * ds - 0.5 * ds,
            n_points: self.n_points,
        }
    }

    /// Indices j with lo <= x_j <= hi, or None when no sample falls inside.
    pub fn index_window(&self, lo: f64, hi: f64) -> Option<(usize, usize)> {
        if hi < lo {
            return None;
        }
        let dx = self.dx();
        // Smallest j with x_j >= lo and largest with x_j <= hi.
        let jlo = ((lo - self.x_min) / dx - 0.5).ceil().max(0.0);
        let jhi = ((hi - self.x_min) / dx - 0.5).floor();
        if jhi < jlo || jlo >= self.n_points as f64 || jhi < 0.0 {
            return None;
        }
        let jlo = jlo as usize;
        let jhi = (jhi as usize).min(self.n_points - 1);
        Some((jlo, jhi))
    }

    /// Whether [lo, hi] lies inside the grid's covered interval.
    pub fn contains_interval(&self, lo: f64, hi: f64) -> bool {
        lo >= self.x_min && hi <= self.x_max
    }
}

/// Complex samples on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
}

impl SampledFunction {
    pub fn zeros(grid: GridSpec) -> Self {
        SampledFunction { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.points().map(f).collect();
        SampledFunction { grid, values }
    }

    pub fn real_from_fn(grid: GridSpec, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    /// L2 inner product <f, g> = dx * sum f_j conj(g_j).
    pub fn inner(&self, other: &SampledFunction) -> Result<Complex64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b.conj())
            .sum();
        Ok(s * self.grid.dx())
    }

    pub fn norm_sq(&self) -> f64 {
        self.grid.dx() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }
}
