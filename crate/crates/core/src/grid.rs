//! Rectangular lattices standing in for the state space.
//!
//! Nodes are stored with axis 0 varying slowest. Box corners are always nodes and
//! the per-axis coordinates are computed by one formula everywhere, so a point that
//! lies exactly on a node is recognised as such by [`SpatialGrid::interpolate`].

use alloc::sync::Arc;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

#[derive(Debug, PartialEq)]
struct GridData {
    lower: Vec<f64>,
    upper: Vec<f64>,
    points_per_axis: usize,
    nodes: Vec<Vec<f64>>,
}

/// Uniform lattice on a box in `ℝ^d`. Cloning is cheap (shared storage).
#[derive(Debug, Clone)]
pub struct SpatialGrid {
    inner: Arc<GridData>,
}

impl PartialEq for SpatialGrid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || self.inner == other.inner
    }
}

fn axis_coord(lower: f64, upper: f64, n: usize, i: usize) -> f64 {
    if i + 1 == n {
        upper
    } else {
        lower + (upper - lower) * (i as f64) / ((n - 1) as f64)
    }
}

impl SpatialGrid {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, points_per_axis: usize) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::Invalid("grid needs at least one axis"));
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        if points_per_axis < 2 {
            return Err(Error::Invalid("grid needs at least 2 points per axis"));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(lo, hi)| !lo.is_finite() || !hi.is_finite() || lo >= hi)
        {
            return Err(Error::Invalid("grid box is degenerate"));
        }
        let d = lower.len();
        let count = points_per_axis
            .checked_pow(d as u32)
            .ok_or(Error::Invalid("grid too large"))?;
        let mut nodes = Vec::with_capacity(count);
        let mut idx = alloc::vec![0usize; d];
        for _ in 0..count {
            nodes.push(
                (0..d)
                    .map(|k| axis_coord(lower[k], upper[k], points_per_axis, idx[k]))
                    .collect(),
            );
            for k in (0..d).rev() {
                idx[k] += 1;
                if idx[k] < points_per_axis {
                    break;
                }
                idx[k] = 0;
            }
        }
        Ok(Self {
            inner: Arc::new(GridData {
                lower,
                upper,
                points_per_axis,
                nodes,
            }),
        })
    }

    /// Cube `[-radius, radius]^dim`.
    pub fn cube(dim: usize, radius: f64, points_per_axis: usize) -> Result<Self> {
        Self::new(
            alloc::vec![-radius; dim],
            alloc::vec![radius; dim],
            points_per_axis,
        )
    }

    pub fn dim(&self) -> usize {
        self.inner.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.inner.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.inner.upper
    }

    pub fn points_per_axis(&self) -> usize {
        self.inner.points_per_axis
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.inner.nodes
    }

    pub fn len(&self) -> usize {
        self.inner.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.nodes.is_empty()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.inner.upper[axis] - self.inner.lower[axis]) / ((self.points_per_axis() - 1) as f64)
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        axis_coord(
            self.inner.lower[axis],
            self.inner.upper[axis],
            self.points_per_axis(),
            i,
        )
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let n = self.points_per_axis();
        let mut out = alloc::vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            out[k] = flat % n;
            flat /= n;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        let n = self.points_per_axis();
        multi.iter().fold(0, |acc, &i| acc * n + i)
    }

    /// Whether the node is strictly inside the lattice on every axis.
    pub fn is_interior(&self, flat: usize) -> bool {
        let n = self.points_per_axis();
        self.multi_index(flat).iter().all(|&i| i > 0 && i + 1 < n)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower().iter().zip(self.upper()))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// Largest Euclidean norm over the nodes.
    pub fn max_radius(&self) -> f64 {
        self.nodes().iter().map(|x| norm(x)).fold(0.0, f64::max)
    }

    /// Multilinear interpolation of nodal `values` at `x`. Exact at nodes.
    pub fn interpolate(&self, values: &[Complex64], x: &[f64]) -> Result<Complex64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let n = self.points_per_axis();
        let mut cell = alloc::vec![0usize; self.dim()];
        let mut frac = alloc::vec![0.0f64; self.dim()];
        for k in 0..self.dim() {
            let (lo, hi) = (self.lower()[k], self.upper()[k]);
            if !(x[k] >= lo && x[k] <= hi) {
                return Err(Error::OutOfGrid);
            }
            let pos = (x[k] - lo) / (hi - lo) * ((n - 1) as f64);
            let mut i = (pos.floor() as usize).min(n - 2);
            // `pos` may be off by one ulp; settle on the bracketing cell.
            while i > 0 && x[k] < self.coord(k, i) {
                i -= 1;
            }
            while i + 2 < n && x[k] >= self.coord(k, i + 1) {
                i += 1;
            }
            let (a, b) = (self.coord(k, i), self.coord(k, i + 1));
            cell[k] = i;
            frac[k] = if x[k] == a {
                0.0
            } else if x[k] == b {
                1.0
            } else {
                ((x[k] - a) / (b - a)).clamp(0.0, 1.0)
            };
        }
        let mut acc = Complex64::new(0.0, 0.0);
        let mut corner = alloc::vec![0usize; self.dim()];
        for mask in 0..(1usize << self.dim()) {
            let mut w = 1.0;
            for k in 0..self.dim() {
                let upper = (mask >> k) & 1 == 1;
                w *= if upper { frac[k] } else { 1.0 - frac[k] };
                corner[k] = cell[k] + upper as usize;
            }
            if w != 0.0 {
                acc += values[self.flat_index(&corner)] * w;
            }
        }
        Ok(acc)
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}
