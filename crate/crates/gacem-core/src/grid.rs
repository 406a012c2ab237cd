//! Uniform binning of the normalized axis `[-1, 1]`.

use crate::error::{Error, Result};
use alloc::format;

/// `n` equal bins covering `[-1, 1]`; grid points are the bin centers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridMap {
    n: usize,
}

impl GridMap {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!("grid needs at least 2 bins, got {n}")));
        }
        Ok(GridMap { n })
    }

    pub fn bins(&self) -> usize {
        self.n
    }

    /// Bin width on the normalized axis.
    pub fn delta(&self) -> f64 {
        2.0 / self.n as f64
    }

    /// Center of bin `b` (the grid point).
    pub fn center(&self, b: u32) -> f64 {
        -1.0 + self.delta() * (b as f64 + 0.5)
    }

    /// Lower edge of bin `b`; `lower_edge(n)` is the upper domain edge.
    pub fn lower_edge(&self, b: u32) -> f64 {
        if b as usize == self.n {
            1.0
        } else {
            -1.0 + self.delta() * b as f64
        }
    }

    /// Nearest bin for an arbitrary normalized coordinate (clamped to the
    /// boundary bins outside `[-1, 1]`).
    pub fn snap(&self, x: f64) -> u32 {
        let t = (x + 1.0) / self.delta();
        let b = crate::math::floor(t) as i64;
        b.clamp(0, self.n as i64 - 1) as u32
    }

    /// Bin of a coordinate that must already be a grid point.
    pub fn bin_of_grid_point(&self, x: f64) -> Result<u32> {
        let b = self.snap(x);
        if crate::math::abs(self.center(b) - x) > 1e-9 {
            return Err(Error::Contract(format!(
                "coordinate {x} is not on the grid (nearest center {})",
                self.center(b)
            )));
        }
        Ok(b)
    }
}
