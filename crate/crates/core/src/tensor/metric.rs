use alloc::format;

use crate::error::{Error, Result};
use crate::field::{Field, Rank};
use crate::linalg;

/// Default minimum admissible metric eigenvalue.
pub const DEFAULT_SPD_FLOOR: f64 = 1e-10;

/// Symmetric positive-definite covariant 2-tensor `g_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    components: Field,
    spd_floor: f64,
}

impl MetricField {
    /// Validates exact symmetry and `λ_min > spd_floor` on the field's region.
    pub fn new(components: Field, spd_floor: f64) -> Result<Self> {
        check_symmetric2(&components)?;
        let n = components.dim();
        for idx in components.region().iter() {
            let p = components.grid().linear_index(idx);
            let (lo, _) = eigen_or_nan(n, components.at(p));
            if !(lo > spd_floor) {
                return Err(Error::MetricDegenerate { point: p, min_eigenvalue: lo });
            }
        }
        Ok(MetricField { components, spd_floor })
    }

    pub fn with_default_floor(components: Field) -> Result<Self> {
        Self::new(components, DEFAULT_SPD_FLOOR)
    }

    pub fn field(&self) -> &Field {
        &self.components
    }

    pub fn into_field(self) -> Field {
        self.components
    }

    pub fn spd_floor(&self) -> f64 {
        self.spd_floor
    }

    pub fn dim(&self) -> usize {
        self.components.dim()
    }
}

fn eigen_or_nan(n: usize, block: &[f64]) -> (f64, f64) {
    if block[..n * n].iter().all(|v| v.is_finite()) {
        linalg::sym_eig_extremes(n, block)
    } else {
        (f64::NAN, f64::NAN)
    }
}

pub(crate) fn check_symmetric2(f: &Field) -> Result<()> {
    if f.rank().total() != 2 {
        return Err(Error::ShapeMismatch(format!("expected rank 2, got {:?}", f.rank())));
    }
    let n = f.dim();
    for p in 0..f.grid().num_points() {
        let b = f.at(p);
        for i in 0..n {
            for j in (i + 1)..n {
                if b[i * n + j].to_bits() != b[j * n + i].to_bits() {
                    return Err(Error::InvalidParameter(format!(
                        "tensor not exactly symmetric at point {p}"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Symmetric covariant 2-tensor `h_ij = ∂_t g_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    components: Field,
}

impl VelocityField {
    pub fn new(components: Field) -> Result<Self> {
        check_symmetric2(&components)?;
        Ok(VelocityField { components })
    }

    pub fn zeros_like(g: &MetricField) -> Self {
        VelocityField { components: Field::zeros(*g.field().grid(), Rank::cov(2)) }
    }

    pub fn field(&self) -> &Field {
        &self.components
    }

    pub fn into_field(self) -> Field {
        self.components
    }
}

/// Pointwise `g^ij`, exactly symmetric.
pub fn inverse_metric(g: &MetricField) -> Result<Field> {
    let f = g.field();
    let n = f.dim();
    let floor = g.spd_floor();
    for idx in f.region().iter() {
        let p = f.grid().linear_index(idx);
        let (lo, _) = eigen_or_nan(n, f.at(p));
        if !(lo > floor) {
            return Err(Error::MetricDegenerate { point: p, min_eigenvalue: lo });
        }
    }
    let mut out = Field::from_points(*f.grid(), Rank::mixed(2, 0), f.region(), |p, b| {
        linalg::invert(n, f.at(p), b);
    })?;
    out.symmetrize2();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BoundaryMode, ChartGrid};
    use core::f64::consts::PI;

    #[test]
    fn identity_inverts_to_identity() {
        let grid = ChartGrid::periodic_cube(3, 6, 1.0).unwrap();
        let g = Field::from_fn(grid, Rank::cov(2), |_, b| {
            for i in 0..3 {
                b[i * 3 + i] = 1.0;
            }
        });
        let inv = inverse_metric(&MetricField::with_default_floor(g.clone()).unwrap()).unwrap();
        assert_eq!(inv.data(), g.data());
    }

    #[test]
    fn sphere_band_diagonal_inverse() {
        let grid = ChartGrid::with_origin(
            2,
            &[16, 16],
            &[0.4 * PI / 16.0, 2.0 * PI / 16.0],
            &[0.3 * PI, 0.0],
            BoundaryMode::InteriorPatch { margin: 4 },
        )
        .unwrap();
        let g = Field::from_fn(grid, Rank::cov(2), |x, b| {
            b[0] = 1.0;
            b[3] = libm::sin(x[0]).powi(2);
        });
        let inv = inverse_metric(&MetricField::with_default_floor(g).unwrap()).unwrap();
        for p in 0..grid.num_points() {
            let th = grid.coord_of(p)[0];
            let want = 1.0 / libm::sin(th).powi(2);
            assert!((inv.at(p)[3] - want).abs() < 1e-12 * want);
            assert_eq!(inv.at(p)[1], 0.0);
        }
    }

    #[test]
    fn degenerate_metric_is_rejected() {
        let grid = ChartGrid::periodic_cube(2, 8, 1.0).unwrap();
        let g = Field::from_fn(grid, Rank::cov(2), |x, b| {
            b[0] = 1.0;
            b[3] = if x[0] > 0.5 { 1e-12 } else { 1.0 };
        });
        assert!(matches!(
            MetricField::with_default_floor(g),
            Err(Error::MetricDegenerate { .. })
        ));
    }

    #[test]
    fn asymmetric_metric_is_rejected() {
        let grid = ChartGrid::periodic_cube(2, 8, 1.0).unwrap();
        let g = Field::from_fn(grid, Rank::cov(2), |_, b| {
            b.copy_from_slice(&[1.0, 0.1, 0.2, 1.0]);
        });
        assert!(MetricField::with_default_floor(g).is_err());
    }
}
