//! Uniform tensor-product coordinate grids.
//!
//! A [`ChartGrid`] stands in for one coordinate chart. Axes beyond `dim`
//! carry a single point so every grid can be addressed with three indices.
//! Points are numbered with axis 0 slowest.

use alloc::format;

use crate::error::{Error, Result};

/// Half-width of every finite-difference stencil used by the engine.
pub const STENCIL_RADIUS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryMode {
    /// Wraparound on every axis (a flat torus chart).
    Periodic,
    /// Non-periodic patch. Each derivative shrinks the evaluable region by
    /// [`STENCIL_RADIUS`] along the differentiated axis; residuals are reported
    /// no closer than `margin` points to the patch boundary.
    InteriorPatch { margin: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartGrid {
    dim: usize,
    shape: [usize; 3],
    spacing: [f64; 3],
    origin: [f64; 3],
    mode: BoundaryMode,
}

impl ChartGrid {
    /// Builds a grid with zero origin.
    pub fn new(dim: usize, shape: &[usize], spacing: &[f64], mode: BoundaryMode) -> Result<Self> {
        Self::with_origin(dim, shape, spacing, &[0.0; 3][..dim.min(3)], mode)
    }

    pub fn with_origin(
        dim: usize,
        shape: &[usize],
        spacing: &[f64],
        origin: &[f64],
        mode: BoundaryMode,
    ) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{2,3}}")));
        }
        if shape.len() != dim || spacing.len() != dim || origin.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "expected {dim} entries for shape, spacing and origin"
            )));
        }
        let min_points = 2 * STENCIL_RADIUS + 1;
        let mut s = [1usize; 3];
        let mut h = [1.0f64; 3];
        let mut o = [0.0f64; 3];
        for a in 0..dim {
            if shape[a] < min_points {
                return Err(Error::InvalidGrid(format!(
                    "axis {a}: {} points, need at least {min_points}",
                    shape[a]
                )));
            }
            if !(spacing[a] > 0.0) || !spacing[a].is_finite() {
                return Err(Error::InvalidGrid(format!("axis {a}: spacing must be positive")));
            }
            if !origin[a].is_finite() {
                return Err(Error::InvalidGrid(format!("axis {a}: origin must be finite")));
            }
            s[a] = shape[a];
            h[a] = spacing[a];
            o[a] = origin[a];
        }
        if let BoundaryMode::InteriorPatch { margin } = mode {
            if margin < 2 * STENCIL_RADIUS {
                return Err(Error::InvalidGrid(format!(
                    "margin {margin} below twice the stencil radius"
                )));
            }
            for a in 0..dim {
                if 2 * margin >= s[a] {
                    return Err(Error::InvalidGrid(format!(
                        "margin {margin} exceeds half the extent of axis {a} ({} points)",
                        s[a]
                    )));
                }
            }
        }
        Ok(ChartGrid { dim, shape: s, spacing: h, origin: o, mode })
    }

    /// Periodic grid of `n` points per axis covering `[0, length)`.
    pub fn periodic_cube(dim: usize, n: usize, length: f64) -> Result<Self> {
        let shape = [n; 3];
        let spacing = [length / n as f64; 3];
        Self::new(dim, &shape[..dim], &spacing[..dim], BoundaryMode::Periodic)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn mode(&self) -> BoundaryMode {
        self.mode
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.mode, BoundaryMode::Periodic)
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing[..self.dim].iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn num_points(&self) -> usize {
        self.shape[0] * self.shape[1] * self.shape[2]
    }

    /// Stride between neighbouring points along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => self.shape[1] * self.shape[2],
            1 => self.shape[2],
            _ => 1,
        }
    }

    pub fn linear_index(&self, idx: [usize; 3]) -> usize {
        (idx[0] * self.shape[1] + idx[1]) * self.shape[2] + idx[2]
    }

    pub fn multi_index(&self, p: usize) -> [usize; 3] {
        let i2 = p % self.shape[2];
        let r = p / self.shape[2];
        [r / self.shape[1], r % self.shape[1], i2]
    }

    /// Coordinate of point `idx`: `origin + i * spacing` per axis.
    pub fn coord(&self, idx: [usize; 3]) -> [f64; 3] {
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = self.origin[a] + idx[a] as f64 * self.spacing[a];
        }
        x
    }

    pub fn coord_of(&self, p: usize) -> [f64; 3] {
        self.coord(self.multi_index(p))
    }

    /// Region on which freshly sampled fields are valid.
    pub fn full_region(&self) -> Region {
        Region { lo: [0; 3], hi: self.shape }
    }

    /// Region on which residuals are reported: the whole grid for periodic
    /// charts, the grid minus `margin` on each side for patches.
    pub fn reporting_region(&self) -> Region {
        match self.mode {
            BoundaryMode::Periodic => self.full_region(),
            BoundaryMode::InteriorPatch { margin } => {
                let mut r = self.full_region();
                for a in 0..self.dim {
                    r.lo[a] = margin;
                    r.hi[a] = self.shape[a] - margin;
                }
                r
            }
        }
    }

    /// Same chart sampled with `factor` times as many points per axis.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let mut shape = [0usize; 3];
        let mut spacing = [0.0; 3];
        for a in 0..self.dim {
            shape[a] = self.shape[a] * factor;
            spacing[a] = self.spacing[a] / factor as f64;
        }
        Self::with_origin(
            self.dim,
            &shape[..self.dim],
            &spacing[..self.dim],
            &self.origin[..self.dim],
            self.mode,
        )
    }

    pub fn same_layout(&self, other: &ChartGrid) -> bool {
        self.dim == other.dim && self.shape == other.shape
    }
}

/// Half-open box of grid indices, `lo[a] <= i < hi[a]` on every axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl Region {
    pub fn is_empty(&self) -> bool {
        (0..3).any(|a| self.lo[a] >= self.hi[a])
    }

    pub fn contains(&self, idx: [usize; 3]) -> bool {
        (0..3).all(|a| idx[a] >= self.lo[a] && idx[a] < self.hi[a])
    }

    pub fn intersect(&self, other: &Region) -> Region {
        let mut r = *self;
        for a in 0..3 {
            r.lo[a] = r.lo[a].max(other.lo[a]);
            r.hi[a] = r.hi[a].min(other.hi[a]);
        }
        r
    }

    /// Shrinks by `by` points on both ends of `axis`.
    pub fn shrink_axis(&self, axis: usize, by: usize) -> Region {
        let mut r = *self;
        r.lo[axis] += by;
        r.hi[axis] = r.hi[axis].saturating_sub(by);
        r
    }

    pub fn num_points(&self) -> usize {
        if self.is_empty() {
            0
        } else {
            (0..3).map(|a| self.hi[a] - self.lo[a]).product()
        }
    }

    /// Grid points in the region, axis 0 slowest.
    pub fn iter(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let r = *self;
        let empty = r.is_empty();
        (r.lo[0]..if empty { r.lo[0] } else { r.hi[0] }).flat_map(move |i| {
            (r.lo[1]..r.hi[1]).flat_map(move |j| (r.lo[2]..r.hi[2]).map(move |k| [i, j, k]))
        })
    }
}
