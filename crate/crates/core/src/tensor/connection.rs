//! Levi-Civita connection and its first two time derivatives along a flow.
//!
//! All three objects are stored as `(1,2)` fields with index order `[k][i][j]`
//! for `X^k_{ij}` and are exactly symmetric in `(i, j)`.

use crate::error::Result;
use crate::field::{Field, Rank};
use crate::tensor::covariant::covariant_derivative;
use crate::tensor::metric::{MetricField, VelocityField};

/// Christoffel symbols `Γ^k_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionField(Field);

/// Connection velocity `B^k_ij = ∂_t Γ^k_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionVelocityField(Field);

/// Connection acceleration `A^k_ij = ∂²_t Γ^k_ij` along the flow.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionAccelField(Field);

macro_rules! connection_like {
    ($t:ty) => {
        impl $t {
            pub fn field(&self) -> &Field {
                &self.0
            }

            pub fn into_field(self) -> Field {
                self.0
            }

            /// `g_lk X^k_ij`, stored `[l][i][j]`.
            pub fn lowered(&self, g: &Field) -> Result<Field> {
                lower_first(&self.0, g)
            }
        }
    };
}

connection_like!(ConnectionField);
connection_like!(ConnectionVelocityField);
connection_like!(ConnectionAccelField);

impl ConnectionField {
    /// Wraps a `(1,2)` field without recomputation; used for test fixtures.
    pub fn from_field(f: Field) -> Self {
        ConnectionField(f)
    }
}

fn lower_first(x: &Field, g: &Field) -> Result<Field> {
    let n = x.dim();
    let region = x.region().intersect(&g.region());
    Field::from_points(*x.grid(), Rank::cov(3), region, |p, out| {
        let xv = x.at(p);
        let gv = g.at(p);
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for k in 0..n {
                        s += gv[l * n + k] * xv[(k * n + i) * n + j];
                    }
                    out[(l * n + i) * n + j] = s;
                }
            }
        }
    })
}

/// Raises the first index of a `[l][i][j]` covariant 3-tensor symmetric in
/// `(i, j)`, writing only `i <= j` and mirroring.
fn raise_first_symmetric(low: &Field, ginv: &Field) -> Result<Field> {
    let n = low.dim();
    let region = low.region().intersect(&ginv.region());
    Field::from_points(*low.grid(), Rank::mixed(1, 2), region, |p, out| {
        let lv = low.at(p);
        let gi = ginv.at(p);
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += gi[k * n + l] * lv[(l * n + i) * n + j];
                    }
                    out[(k * n + i) * n + j] = s;
                    out[(k * n + j) * n + i] = s;
                }
            }
        }
    })
}

/// `Γ^k_ij = ½ g^kl (∂_i g_jl + ∂_j g_il − ∂_l g_ij)`.
pub fn christoffel(g: &MetricField, ginv: &Field) -> Result<ConnectionField> {
    let n = g.dim();
    let dg = g.field().gradient()?;
    let low = Field::from_points(*dg.grid(), Rank::cov(3), dg.region(), |p, out| {
        let d = dg.at(p);
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    out[(l * n + i) * n + j] = 0.5
                        * (d[(i * n + j) * n + l] + d[(j * n + i) * n + l] - d[(l * n + i) * n + j]);
                }
            }
        }
    })?;
    Ok(ConnectionField(raise_first_symmetric(&low, ginv)?))
}

/// Lowered connection velocity `B_lij = ½ (D_i h_jl + D_j h_il − D_l h_ij)`.
pub fn connection_velocity_lowered(h: &VelocityField, gamma: &ConnectionField) -> Result<Field> {
    let n = h.field().dim();
    let dh = covariant_derivative(h.field(), gamma)?;
    Field::from_points(*dh.grid(), Rank::cov(3), dh.region(), |p, out| {
        let d = dh.at(p);
        for l in 0..n {
            for i in 0..n {
                for j in i..n {
                    let v = 0.5
                        * (d[(i * n + j) * n + l] + d[(j * n + i) * n + l] - d[(l * n + i) * n + j]);
                    out[(l * n + i) * n + j] = v;
                    out[(l * n + j) * n + i] = v;
                }
            }
        }
    })
}

/// `B^k_ij = g^kl B_lij`, the time derivative of the connection induced by `h = ∂_t g`.
pub fn connection_velocity(
    h: &VelocityField,
    ginv: &Field,
    gamma: &ConnectionField,
) -> Result<ConnectionVelocityField> {
    let low = connection_velocity_lowered(h, gamma)?;
    Ok(ConnectionVelocityField(raise_first_symmetric(&low, ginv)?))
}

/// Connection acceleration along the hyperbolic geometric flow:
/// `g(A(X,Y),Z) = −(D_X Ric)(Y,Z) − (D_Y Ric)(X,Z) + (D_Z Ric)(X,Y) − 2 h(B(X,Y),Z)`.
///
/// The formula substitutes `∂²_t g = −2 Ric`, so the result is the true
/// `∂²_t Γ` only when `(g, h)` is a phase point of that flow.
pub fn connection_acceleration(
    h: &VelocityField,
    ginv: &Field,
    gamma: &ConnectionField,
    ricci: &Field,
    b: &ConnectionVelocityField,
) -> Result<ConnectionAccelField> {
    let n = ricci.dim();
    let dric = covariant_derivative(ricci, gamma)?;
    let hf = h.field();
    let bf = b.field();
    let region = dric.region().intersect(&bf.region()).intersect(&hf.region());
    let low = Field::from_points(*ricci.grid(), Rank::cov(3), region, |p, out| {
        let d = dric.at(p);
        let hv = hf.at(p);
        let bv = bf.at(p);
        for l in 0..n {
            for i in 0..n {
                for j in i..n {
                    let mut hb = 0.0;
                    for m in 0..n {
                        hb += hv[l * n + m] * bv[(m * n + i) * n + j];
                    }
                    let v = -d[(i * n + j) * n + l] - d[(j * n + i) * n + l] + d[(l * n + i) * n + j]
                        - 2.0 * hb;
                    out[(l * n + i) * n + j] = v;
                    out[(l * n + j) * n + i] = v;
                }
            }
        }
    })?;
    Ok(ConnectionAccelField(raise_first_symmetric(&low, ginv)?))
}
