//! Multi-component fields on a [`ChartGrid`] and their partial derivatives.
//!
//! Storage is point-major: the `ncomp` components of point `p` occupy
//! `data[p * ncomp .. (p + 1) * ncomp]`. A tensor with `u` upper and `l` lower
//! indices stores its components row-major in the index order
//! `(upper..., lower...)`, each index running over `0..dim`. Covariant
//! derivatives insert the new index as the first lower index.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{BoundaryMode, ChartGrid, Region, STENCIL_RADIUS};
use crate::par::{fill_blocks, pairwise_sum};

/// 4th-order centred first derivative from values at offsets −2..=2, unscaled.
/// Symmetric pairs are differenced first so constants give exactly zero.
#[inline]
fn d1(v: [f64; 5]) -> f64 {
    8.0 * (v[3] - v[1]) - (v[4] - v[0])
}

/// 4th-order centred second derivative, unscaled.
#[inline]
fn d2(v: [f64; 5]) -> f64 {
    (16.0 * (v[3] + v[1]) - (v[4] + v[0])) - 30.0 * v[2]
}

/// `(covariant, contravariant)` index counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rank {
    pub covariant: usize,
    pub contravariant: usize,
}

impl Rank {
    pub const SCALAR: Rank = Rank { covariant: 0, contravariant: 0 };

    pub const fn cov(n: usize) -> Rank {
        Rank { covariant: n, contravariant: 0 }
    }

    pub const fn mixed(contravariant: usize, covariant: usize) -> Rank {
        Rank { covariant, contravariant }
    }

    pub fn total(&self) -> usize {
        self.covariant + self.contravariant
    }

    pub fn components(&self, dim: usize) -> usize {
        dim.pow(self.total() as u32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: ChartGrid,
    rank: Rank,
    ncomp: usize,
    region: Region,
    degenerate: bool,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: ChartGrid, rank: Rank) -> Self {
        let ncomp = rank.components(grid.dim());
        Field {
            grid,
            rank,
            ncomp,
            region: grid.full_region(),
            degenerate: false,
            data: vec![0.0; ncomp * grid.num_points()],
        }
    }

    /// Samples `f(x, block)` at every grid coordinate.
    pub fn from_fn<F>(grid: ChartGrid, rank: Rank, f: F) -> Self
    where
        F: Fn([f64; 3], &mut [f64]) + Sync + Send,
    {
        let mut out = Field::zeros(grid, rank);
        fill_blocks(&mut out.data, out.ncomp, |p, b| f(grid.coord_of(p), b));
        out
    }

    /// Builds a field on `region` by calling `f(point, block)` for every point
    /// inside it; points outside are zero.
    pub fn from_points<F>(grid: ChartGrid, rank: Rank, region: Region, f: F) -> Result<Self>
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        if region.is_empty() {
            return Err(Error::RegionExhausted);
        }
        let mut out = Field::zeros(grid, rank);
        out.region = region;
        fill_blocks(&mut out.data, out.ncomp, |p, b| {
            if region.contains(grid.multi_index(p)) {
                f(p, b)
            }
        });
        Ok(out)
    }

    pub fn from_data(grid: ChartGrid, rank: Rank, data: Vec<f64>) -> Result<Self> {
        let ncomp = rank.components(grid.dim());
        if data.len() != ncomp * grid.num_points() {
            return Err(Error::ShapeMismatch(alloc::format!(
                "expected {} values, got {}",
                ncomp * grid.num_points(),
                data.len()
            )));
        }
        Ok(Field { grid, rank, ncomp, region: grid.full_region(), degenerate: false, data })
    }

    pub fn grid(&self) -> &ChartGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn rank(&self) -> Rank {
        self.rank
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Marks the buffer as allowed to hold non-finite values.
    pub fn flag_degenerate(&mut self) {
        self.degenerate = true;
    }

    pub fn with_region(mut self, region: Region) -> Self {
        self.region = self.region.intersect(&region);
        self
    }

    pub fn at(&self, p: usize) -> &[f64] {
        &self.data[p * self.ncomp..(p + 1) * self.ncomp]
    }

    pub fn at_mut(&mut self, p: usize) -> &mut [f64] {
        &mut self.data[p * self.ncomp..(p + 1) * self.ncomp]
    }

    /// First non-finite value's point index, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite()).map(|i| i / self.ncomp)
    }

    fn check_compatible(&self, other: &Field) -> Result<()> {
        if !self.grid.same_layout(&other.grid) || self.ncomp != other.ncomp {
            return Err(Error::ShapeMismatch(alloc::format!(
                "fields of rank {:?} and {:?} on different layouts",
                self.rank,
                other.rank
            )));
        }
        Ok(())
    }

    /// `a * self + b * other`, valid on the intersection of both regions.
    pub fn lincomb(&self, a: f64, other: &Field, b: f64) -> Result<Field> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        out.region = self.region.intersect(&other.region);
        out.degenerate = self.degenerate || other.degenerate;
        for (o, (x, y)) in out.data.iter_mut().zip(self.data.iter().zip(&other.data)) {
            *o = a * x + b * y;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.lincomb(1.0, other, -1.0)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.lincomb(1.0, other, 1.0)
    }

    pub fn scaled(&self, a: f64) -> Field {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= a);
        out
    }

    /// In-place `self += a * other`; the region becomes the intersection.
    pub fn axpy(&mut self, a: f64, other: &Field) -> Result<()> {
        self.check_compatible(other)?;
        self.region = self.region.intersect(&other.region);
        for (o, x) in self.data.iter_mut().zip(&other.data) {
            *o += a * x;
        }
        Ok(())
    }

    /// Replaces a rank-2 tensor by its symmetric part, exactly.
    pub fn symmetrize2(&mut self) {
        let n = self.dim();
        debug_assert_eq!(self.rank.total(), 2);
        for block in self.data.chunks_mut(self.ncomp) {
            for i in 0..n {
                for j in (i + 1)..n {
                    let s = 0.5 * (block[i * n + j] + block[j * n + i]);
                    block[i * n + j] = s;
                    block[j * n + i] = s;
                }
            }
        }
    }

    /// Max over points of `region ∩ self.region` of the largest absolute component.
    pub fn max_abs_on(&self, region: &Region) -> f64 {
        let r = self.region.intersect(region);
        let mut m = 0.0f64;
        for idx in r.iter() {
            let p = self.grid.linear_index(idx);
            for v in self.at(p) {
                m = m.max(v.abs());
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.max_abs_on(&self.region)
    }

    /// Root-mean-square over all components of `region ∩ self.region`, summed pairwise.
    pub fn rms_on(&self, region: &Region) -> f64 {
        let r = self.region.intersect(region);
        let mut sq = Vec::with_capacity(r.num_points() * self.ncomp);
        for idx in r.iter() {
            let p = self.grid.linear_index(idx);
            sq.extend(self.at(p).iter().map(|v| v * v));
        }
        if sq.is_empty() {
            return 0.0;
        }
        libm::sqrt(pairwise_sum(&sq) / sq.len() as f64)
    }

    /// Partial derivative along `axis` of every component, 4th-order centred.
    pub fn partial(&self, axis: usize, order: usize) -> Result<Field> {
        let grid = self.grid;
        if axis >= grid.dim() {
            return Err(Error::InvalidParameter(alloc::format!("axis {axis} out of range")));
        }
        let h = grid.spacing()[axis];
        let (stencil, scale): (fn([f64; 5]) -> f64, f64) = match order {
            1 => (d1, 1.0 / (12.0 * h)),
            2 => (d2, 1.0 / (12.0 * h * h)),
            _ => return Err(Error::InvalidParameter(alloc::format!("derivative order {order}"))),
        };
        let n_axis = grid.shape()[axis];
        let region = match grid.mode() {
            BoundaryMode::Periodic => self.region,
            BoundaryMode::InteriorPatch { .. } => self.region.shrink_axis(axis, STENCIL_RADIUS),
        };
        if region.is_empty() {
            return Err(Error::RegionExhausted);
        }
        let periodic = grid.is_periodic();
        let ncomp = self.ncomp;
        let src = &self.data;
        let mut out = Field::zeros(grid, self.rank);
        out.region = region;
        out.degenerate = self.degenerate;
        fill_blocks(&mut out.data, ncomp, |p, block| {
            let idx = grid.multi_index(p);
            if !region.contains(idx) {
                return;
            }
            let mut nb = [0usize; 5];
            for (s, off) in (-2isize..=2).enumerate() {
                let mut j = idx;
                j[axis] = if periodic {
                    ((idx[axis] + n_axis) as isize + off) as usize % n_axis
                } else {
                    (idx[axis] as isize + off) as usize
                };
                nb[s] = grid.linear_index(j) * ncomp;
            }
            for (c, out_c) in block.iter_mut().enumerate() {
                let v = [src[nb[0] + c], src[nb[1] + c], src[nb[2] + c], src[nb[3] + c], src[nb[4] + c]];
                *out_c = stencil(v) * scale;
            }
        });
        Ok(out)
    }

    /// All first partials, stacked with the derivative index first:
    /// component `(a, c)` is `∂_a` of component `c`.
    pub fn gradient(&self) -> Result<Field> {
        let n = self.dim();
        let parts = (0..n).map(|a| self.partial(a, 1)).collect::<Result<Vec<_>>>()?;
        let mut rank = self.rank;
        rank.covariant += 1;
        let region = parts.iter().fold(self.region, |r, f| r.intersect(&f.region));
        let nc = self.ncomp;
        Field::from_points(self.grid, rank, region, |p, b| {
            for (a, f) in parts.iter().enumerate() {
                b[a * nc..(a + 1) * nc].copy_from_slice(f.at(p));
            }
        })
    }

    /// All second partials `∂_a ∂_b`, derivative indices first. Diagonal
    /// entries use the 5-point second-derivative stencil, off-diagonal entries
    /// compose first-derivative stencils; the result is exactly symmetric in `(a, b)`.
    pub fn hessian(&self) -> Result<Field> {
        let n = self.dim();
        let nc = self.ncomp;
        let mut pieces: Vec<(usize, usize, Field)> = Vec::new();
        for a in 0..n {
            pieces.push((a, a, self.partial(a, 2)?));
            let da = self.partial(a, 1)?;
            for b in (a + 1)..n {
                pieces.push((a, b, da.partial(b, 1)?));
            }
        }
        let mut rank = self.rank;
        rank.covariant += 2;
        let region = pieces.iter().fold(self.region, |r, (_, _, f)| r.intersect(&f.region));
        Field::from_points(self.grid, rank, region, |p, blk| {
            for (a, b, f) in &pieces {
                let v = f.at(p);
                blk[(a * n + b) * nc..(a * n + b + 1) * nc].copy_from_slice(v);
                if a != b {
                    blk[(b * n + a) * nc..(b * n + a + 1) * nc].copy_from_slice(v);
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn torus(n: usize) -> ChartGrid {
        ChartGrid::periodic_cube(2, n, 2.0 * PI).unwrap()
    }

    #[test]
    fn constant_has_zero_derivative() {
        let g = torus(16);
        let f = Field::from_fn(g, Rank::SCALAR, |_, b| b[0] = 3.7);
        for order in [1, 2] {
            assert_eq!(f.partial(0, order).unwrap().max_abs(), 0.0);
        }
    }

    fn sin_error(n: usize) -> f64 {
        let g = torus(n);
        let f = Field::from_fn(g, Rank::SCALAR, |x, b| b[0] = libm::sin(x[0]));
        let d = f.partial(0, 1).unwrap();
        let exact = Field::from_fn(g, Rank::SCALAR, |x, b| b[0] = libm::cos(x[0]));
        d.sub(&exact).unwrap().max_abs()
    }

    #[test]
    fn first_derivative_of_sine_is_fourth_order() {
        let e1 = sin_error(32);
        let e2 = sin_error(64);
        let ratio = e1 / e2;
        assert!(e1 < 1e-4, "{e1}");
        assert!((ratio - 16.0).abs() < 0.5, "ratio {ratio}");
    }

    #[test]
    fn second_derivative_exact_on_quadratic_patch() {
        let g = ChartGrid::new(2, &[20, 20], &[0.1, 0.1], BoundaryMode::InteriorPatch { margin: 4 })
            .unwrap();
        let f = Field::from_fn(g, Rank::SCALAR, |x, b| b[0] = x[0] * x[0]);
        let d = f.partial(0, 2).unwrap();
        assert_eq!(d.region().lo[0], 2);
        assert_eq!(d.region().hi[0], 18);
        assert_eq!(d.region().lo[1], 0);
        for idx in d.region().iter() {
            let v = d.at(g.linear_index(idx))[0];
            assert!((v - 2.0).abs() < 1e-11, "{v}");
        }
    }

    #[test]
    fn region_exhaustion() {
        let g = ChartGrid::new(2, &[9, 9], &[0.1, 0.1], BoundaryMode::InteriorPatch { margin: 4 })
            .unwrap();
        let f = Field::from_fn(g, Rank::SCALAR, |x, b| b[0] = x[0]);
        let d = f.partial(0, 1).unwrap().partial(0, 1).unwrap();
        assert!(!d.region().is_empty());
        assert!(matches!(d.partial(0, 1), Err(Error::RegionExhausted)));
    }

    #[test]
    fn periodic_shift_commutes_with_derivative() {
        let g = torus(24);
        let f = Field::from_fn(g, Rank::SCALAR, |x, b| {
            b[0] = libm::exp(libm::sin(x[0])) * libm::cos(2.0 * x[1])
        });
        let shift = |h: &Field| {
            let mut s = h.clone();
            for p in 0..g.num_points() {
                let mut idx = g.multi_index(p);
                idx[0] = (idx[0] + 1) % 24;
                s.at_mut(p)[0] = h.at(g.linear_index(idx))[0];
            }
            s
        };
        let a = shift(&f.partial(0, 1).unwrap());
        let b = shift(&f).partial(0, 1).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn hessian_is_symmetric() {
        let g = torus(16);
        let f = Field::from_fn(g, Rank::SCALAR, |x, b| b[0] = libm::sin(x[0] + 2.0 * x[1]));
        let h = f.hessian().unwrap();
        for p in 0..g.num_points() {
            assert_eq!(h.at(p)[1], h.at(p)[2]);
        }
    }
}
