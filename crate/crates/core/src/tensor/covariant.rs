//! Covariant derivatives of covariant tensors.
//!
//! `(D_a T)_{i1..ir} = ∂_a T_{i1..ir} − Σ_s Γ^m_{a i_s} T_{i1..m..ir}`, stored with
//! the derivative index first. Iterating gives `D²_{a,b} T = (D(DT))_{ab...}`,
//! which already contains the `−D_{D_a ∂_b}` correction.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{Field, Rank};
use crate::tensor::connection::ConnectionField;

fn require_covariant(t: &Field) -> Result<()> {
    if t.rank().contravariant != 0 {
        return Err(Error::ShapeMismatch(alloc::format!(
            "covariant derivative expects a covariant tensor, got {:?}",
            t.rank()
        )));
    }
    Ok(())
}

/// `D_axis T`, same rank as `T`.
pub fn covariant_derivative_along(t: &Field, gamma: &ConnectionField, axis: usize) -> Result<Field> {
    require_covariant(t)?;
    let n = t.dim();
    let r = t.rank().covariant;
    let dt = t.partial(axis, 1)?;
    let gam = gamma.field();
    let region = dt.region().intersect(&gam.region());
    let mut place = [0usize; 8];
    for s in 0..r {
        place[s] = n.pow((r - 1 - s) as u32);
    }
    Field::from_points(*t.grid(), t.rank(), region, |p, out| {
        let tv = t.at(p);
        let gv = gam.at(p);
        out.copy_from_slice(dt.at(p));
        for (c, o) in out.iter_mut().enumerate() {
            let mut corr = 0.0;
            for s in 0..r {
                let is = (c / place[s]) % n;
                let base = c - is * place[s];
                for m in 0..n {
                    corr += gv[(m * n + axis) * n + is] * tv[base + m * place[s]];
                }
            }
            *o -= corr;
        }
    })
}

/// `DT`, rank raised by one covariant index placed first.
pub fn covariant_derivative(t: &Field, gamma: &ConnectionField) -> Result<Field> {
    let n = t.dim();
    let nc = t.ncomp();
    let parts = (0..n)
        .map(|a| covariant_derivative_along(t, gamma, a))
        .collect::<Result<Vec<_>>>()?;
    let region = parts.iter().fold(t.region(), |r, f| r.intersect(&f.region()));
    Field::from_points(*t.grid(), Rank::cov(t.rank().covariant + 1), region, |p, b| {
        for (a, f) in parts.iter().enumerate() {
            b[a * nc..(a + 1) * nc].copy_from_slice(f.at(p));
        }
    })
}

/// `D²T` with component `(a, b, ...)` equal to `(D²_{∂_a,∂_b} T)(...)`.
pub fn second_covariant_derivative(t: &Field, gamma: &ConnectionField) -> Result<Field> {
    covariant_derivative(&covariant_derivative(t, gamma)?, gamma)
}

/// Rough Laplacian `g^{ab} (D²_{a,b} T)`, assembled one outer derivative
/// direction at a time so the full `D²T` is never stored.
pub fn rough_laplacian(t: &Field, ginv: &Field, gamma: &ConnectionField) -> Result<Field> {
    let n = t.dim();
    let nc = t.ncomp();
    let dt = covariant_derivative(t, gamma)?;
    let mut acc: Option<Field> = None;
    for a in 0..n {
        let slice = covariant_derivative_along(&dt, gamma, a)?;
        let region = slice.region().intersect(&ginv.region());
        let term = Field::from_points(*t.grid(), t.rank(), region, |p, out| {
            let s = slice.at(p);
            let gi = ginv.at(p);
            for b in 0..n {
                let w = gi[a * n + b];
                for c in 0..nc {
                    out[c] += w * s[b * nc + c];
                }
            }
        })?;
        acc = Some(match acc {
            None => term,
            Some(prev) => prev.add(&term)?,
        });
    }
    Ok(acc.expect("dim >= 2"))
}
