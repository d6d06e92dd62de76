//! Residual norms on a common physical box across a resolution ladder.

use crate::field::Field;
use crate::grid::{ChartGrid, Region};

/// Physical bounding box of a region's grid points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalBox {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl PhysicalBox {
    pub fn of(grid: &ChartGrid, region: &Region) -> Self {
        let a = grid.coord(region.lo);
        let mut last = region.hi;
        for d in 0..grid.dim() {
            last[d] = last[d].saturating_sub(1);
        }
        let b = grid.coord(last);
        PhysicalBox { lo: a, hi: b }
    }

    /// Indices of `grid` lying inside the box, up to a small fraction of a cell.
    pub fn region_on(&self, grid: &ChartGrid) -> Region {
        let mut r = grid.full_region();
        let h = grid.spacing();
        let o = grid.origin();
        for d in 0..grid.dim() {
            let tol = 1e-6 * h[d];
            let lo = libm::ceil((self.lo[d] - o[d] - tol) / h[d]).max(0.0) as usize;
            let hi = (libm::floor((self.hi[d] - o[d] + tol) / h[d]) + 1.0).max(0.0) as usize;
            r.lo[d] = lo.min(r.hi[d]);
            r.hi[d] = hi.min(r.hi[d]).max(r.lo[d]);
        }
        r
    }
}

/// Tracks the comparison box for one identity across rungs (coarsest first).
#[derive(Debug, Clone, Default)]
pub struct CommonBox {
    bx: Option<PhysicalBox>,
}

impl CommonBox {
    /// Max and rms of `residual` over its valid and reporting region, clipped
    /// to the box fixed by the first rung seen.
    pub fn norms(&mut self, residual: &Field) -> (f64, f64) {
        let grid = residual.grid();
        let own = residual.region().intersect(&grid.reporting_region());
        let region = if grid.is_periodic() {
            own
        } else {
            let bx = *self.bx.get_or_insert_with(|| PhysicalBox::of(grid, &own));
            own.intersect(&bx.region_on(grid))
        };
        if region.is_empty() {
            return (f64::NAN, f64::NAN);
        }
        (residual.max_abs_on(&region), residual.rms_on(&region))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoundaryMode;

    #[test]
    fn box_maps_to_matching_points_on_refined_grid() {
        let g = ChartGrid::with_origin(2, &[16, 16], &[0.1, 0.1], &[1.0, 2.0], BoundaryMode::InteriorPatch { margin: 4 })
            .unwrap();
        let r = Region { lo: [6, 6, 0], hi: [10, 12, 1] };
        let b = PhysicalBox::of(&g, &r);
        let f = g.refined(2).unwrap();
        let rf = b.region_on(&f);
        assert_eq!(rf.lo[..2], [12, 12]);
        assert_eq!(rf.hi[..2], [19, 23]);
        let c0 = g.coord([9, 11, 0]);
        let c1 = f.coord([18, 22, 0]);
        assert!((c0[0] - c1[0]).abs() < 1e-12 && (c0[1] - c1[1]).abs() < 1e-12);
    }
}
