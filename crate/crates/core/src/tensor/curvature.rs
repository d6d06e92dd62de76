//! Riemann, Ricci and scalar curvature, and the quadratic curvature tensors.
//!
//! Sign convention: `R_ijkl = R(∂_i,∂_j,∂_k,∂_l) = −g(R(∂_i,∂_j)∂_k, ∂_l)` with
//! `R(X,Y) = D_X D_Y − D_Y D_X − D_[X,Y]`. Then `R_ijij` is the sectional
//! curvature of a coordinate plane (positive on the round sphere) and
//! `Ric_ik = g^jl R_ijkl`.

use crate::error::{Error, Result};
use crate::field::{Field, Rank};
use crate::linalg;
use crate::tensor::connection::{christoffel, ConnectionField};
use crate::tensor::metric::{inverse_metric, MetricField};

#[inline]
pub(crate) fn i4(n: usize, i: usize, j: usize, k: usize, l: usize) -> usize {
    ((i * n + j) * n + k) * n + l
}

/// Curvature of one metric snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureBundle {
    pub ginv: Field,
    pub christoffel: ConnectionField,
    pub riemann: Field,
    pub ricci: Field,
    pub scalar: Field,
}

impl CurvatureBundle {
    /// Full pipeline `g → g⁻¹ → Γ → R → Ric → Scal`.
    pub fn compute(g: &MetricField) -> Result<Self> {
        let ginv = inverse_metric(g)?;
        let gamma = christoffel(g, &ginv)?;
        let riemann = riemann(g, &gamma)?;
        let (ricci, scalar) = ricci_and_scalar(&riemann, &ginv)?;
        Ok(CurvatureBundle { ginv, christoffel: gamma, riemann, ricci, scalar })
    }

    pub fn dim(&self) -> usize {
        self.riemann.dim()
    }
}

/// Assembles `R_ijkl = ½(∂_j∂_k g_il + ∂_i∂_l g_jk − ∂_i∂_k g_jl − ∂_j∂_l g_ik)
/// + g_pq (Γ^p_jk Γ^q_il − Γ^p_jl Γ^q_ik)`.
///
/// Both pieces are algebraic curvature tensors in their own right, so the
/// index symmetries and the first Bianchi identity hold to roundoff whatever
/// the discretisation error.
pub fn riemann(g: &MetricField, gamma: &ConnectionField) -> Result<Field> {
    let n = g.dim();
    let gf = g.field();
    let hess = gf.hessian()?;
    let gam = gamma.field();
    let region = hess.region().intersect(&gam.region());
    Field::from_points(*gf.grid(), Rank::cov(4), region, |p, out| {
        let hv = hess.at(p);
        let gv = gf.at(p);
        let cv = gam.at(p);
        // Christoffels of the first kind, Γ_{q,ab} = g_qp Γ^p_ab
        let mut low = [0.0f64; 27];
        for q in 0..n {
            for a in 0..n {
                for b in 0..n {
                    let mut s = 0.0;
                    for pp in 0..n {
                        s += gv[q * n + pp] * cv[(pp * n + a) * n + b];
                    }
                    low[(q * n + a) * n + b] = s;
                }
            }
        }
        let h = |a: usize, b: usize, c: usize, d: usize| hv[i4(n, a, b, c, d)];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let second = 0.5 * (h(j, k, i, l) + h(i, l, j, k) - h(i, k, j, l) - h(j, l, i, k));
                        let mut quad = 0.0;
                        for q in 0..n {
                            quad += low[(q * n + j) * n + k] * cv[(q * n + i) * n + l]
                                - low[(q * n + j) * n + l] * cv[(q * n + i) * n + k];
                        }
                        out[i4(n, i, j, k, l)] = second + quad;
                    }
                }
            }
        }
    })
}

/// `Ric_ik = g^jl R_ijkl` (exactly symmetrised) and `Scal = g^ik Ric_ik`.
pub fn ricci_and_scalar(riemann: &Field, ginv: &Field) -> Result<(Field, Field)> {
    let n = riemann.dim();
    let region = riemann.region().intersect(&ginv.region());
    let grid = *riemann.grid();
    let mut ric = Field::from_points(grid, Rank::cov(2), region, |p, out| {
        let r = riemann.at(p);
        let gi = ginv.at(p);
        for i in 0..n {
            for k in 0..n {
                let mut s = 0.0;
                for j in 0..n {
                    for l in 0..n {
                        s += gi[j * n + l] * r[i4(n, i, j, k, l)];
                    }
                }
                out[i * n + k] = s;
            }
        }
    })?;
    ric.symmetrize2();
    let scal = Field::from_points(grid, Rank::SCALAR, region, |p, out| {
        out[0] = trace(n, ginv.at(p), ric.at(p));
    })?;
    Ok((ric, scal))
}

/// `g^ij T_ij`.
pub(crate) fn trace(n: usize, ginv: &[f64], t: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += ginv[i * n + j] * t[i * n + j];
        }
    }
    s
}

/// Raises indices 2 and 4: `V_i^a_k^b = g^pa g^qb R_ipkq`.
fn raise_2_4(n: usize, r: &[f64], gi: &[f64], out: &mut [f64]) {
    for i in 0..n {
        for a in 0..n {
            for k in 0..n {
                for b in 0..n {
                    let mut s = 0.0;
                    for pp in 0..n {
                        for q in 0..n {
                            s += gi[pp * n + a] * gi[q * n + b] * r[i4(n, i, pp, k, q)];
                        }
                    }
                    out[i4(n, i, a, k, b)] = s;
                }
            }
        }
    }
}

/// Raises indices 3 and 4: `U_ij^ab = g^pa g^qb R_ijpq`.
fn raise_3_4(n: usize, r: &[f64], gi: &[f64], out: &mut [f64]) {
    for i in 0..n {
        for j in 0..n {
            for a in 0..n {
                for b in 0..n {
                    let mut s = 0.0;
                    for pp in 0..n {
                        for q in 0..n {
                            s += gi[pp * n + a] * gi[q * n + b] * r[i4(n, i, j, pp, q)];
                        }
                    }
                    out[i4(n, i, j, a, b)] = s;
                }
            }
        }
    }
}

/// Pointwise `B_ijkl = g^pr g^qs R_piqj R_rksl`.
pub fn quad_b_at(n: usize, r: &[f64], gi: &[f64], out: &mut [f64]) {
    // W^r_i^s_j = g^pr g^qs R_piqj, i.e. raise indices 1 and 3
    let mut w = [0.0f64; 81];
    for rr in 0..n {
        for i in 0..n {
            for s in 0..n {
                for j in 0..n {
                    let mut acc = 0.0;
                    for pp in 0..n {
                        for q in 0..n {
                            acc += gi[pp * n + rr] * gi[q * n + s] * r[i4(n, pp, i, q, j)];
                        }
                    }
                    w[i4(n, rr, i, s, j)] = acc;
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut acc = 0.0;
                    for rr in 0..n {
                        for s in 0..n {
                            acc += w[i4(n, rr, i, s, j)] * r[i4(n, rr, k, s, l)];
                        }
                    }
                    out[i4(n, i, j, k, l)] = acc;
                }
            }
        }
    }
}

/// Field of `B_ijkl = g^pr g^qs R_piqj R_rksl`.
pub fn quad_contraction_b(bundle: &CurvatureBundle) -> Result<Field> {
    let n = bundle.dim();
    let r = &bundle.riemann;
    let gi = &bundle.ginv;
    Field::from_points(*r.grid(), Rank::cov(4), r.region().intersect(&gi.region()), |p, out| {
        quad_b_at(n, r.at(p), gi.at(p), out)
    })
}

/// `R²`, `R#` and `Q(R) = R² + R#`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTensorField {
    pub r2: Field,
    pub rsharp: Field,
    pub q: Field,
}

/// Pointwise `R²_ijkl = g^pa g^qb R_ijpq R_abkl` and
/// `R#_ijkl = 2 g^pa g^qb (R_ipkq R_jalb − R_iplq R_jakb)`.
pub fn q_parts_at(n: usize, r: &[f64], gi: &[f64], r2: &mut [f64], rsharp: &mut [f64]) {
    let mut u = [0.0f64; 81];
    let mut v = [0.0f64; 81];
    raise_3_4(n, r, gi, &mut u);
    raise_2_4(n, r, gi, &mut v);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut sq = 0.0;
                    let mut sh = 0.0;
                    for a in 0..n {
                        for b in 0..n {
                            sq += u[i4(n, i, j, a, b)] * r[i4(n, a, b, k, l)];
                            sh += v[i4(n, i, a, k, b)] * r[i4(n, j, a, l, b)]
                                - v[i4(n, i, a, l, b)] * r[i4(n, j, a, k, b)];
                        }
                    }
                    r2[i4(n, i, j, k, l)] = sq;
                    rsharp[i4(n, i, j, k, l)] = 2.0 * sh;
                }
            }
        }
    }
}

pub fn q_tensor(bundle: &CurvatureBundle) -> Result<QTensorField> {
    let n = bundle.dim();
    let r = &bundle.riemann;
    let gi = &bundle.ginv;
    let region = r.region().intersect(&gi.region());
    let grid = *r.grid();
    let nc = n.pow(4);
    let r2 = Field::from_points(grid, Rank::cov(4), region, |p, out| {
        let mut scratch = [0.0f64; 81];
        q_parts_at(n, r.at(p), gi.at(p), out, &mut scratch[..nc]);
    })?;
    let rsharp = Field::from_points(grid, Rank::cov(4), region, |p, out| {
        let mut scratch = [0.0f64; 81];
        q_parts_at(n, r.at(p), gi.at(p), &mut scratch[..nc], out);
    })?;
    let q = r2.add(&rsharp)?;
    Ok(QTensorField { r2, rsharp, q })
}

/// Sectional curvature `R(u,v,u,v) / (|u|²|v|² − g(u,v)²)` at grid point `p`.
pub fn sectional_curvature(
    riemann: &Field,
    g: &Field,
    p: usize,
    u: &[f64],
    v: &[f64],
) -> Result<f64> {
    let n = riemann.dim();
    let gv = g.at(p);
    let denom = linalg::inner(n, gv, u, u) * linalg::inner(n, gv, v, v)
        - libm::pow(linalg::inner(n, gv, u, v), 2.0);
    let scale = linalg::inner(n, gv, u, u) * linalg::inner(n, gv, v, v);
    if !(denom > 1e-12 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::DegeneratePlane(denom));
    }
    let r = riemann.at(p);
    let mut num = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    num += r[i4(n, i, j, k, l)] * u[i] * v[j] * u[k] * v[l];
                }
            }
        }
    }
    Ok(num / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{default_grid, instantiate, MetricPreset};
    use crate::tensor::metric::VelocityField;
    use alloc::vec::Vec;
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sphere(n: usize) -> (MetricField, CurvatureBundle) {
        let p = MetricPreset::SphereBand { radius: 1.0 };
        let grid = default_grid(&p, 2, n).unwrap();
        let (g, _) = instantiate(&p, &grid, 0.0).unwrap();
        let b = CurvatureBundle::compute(&g).unwrap();
        (g, b)
    }

    // max errors of (R_θφθφ − sin²θ, Ric − g, Scal − 2, K − 1) over the band
    fn sphere_errors(n: usize) -> [f64; 4] {
        let (g, b) = sphere(n);
        let grid = *g.field().grid();
        let mut e = [0.0f64; 4];
        for idx in b.scalar.region().iter() {
            let p = grid.linear_index(idx);
            let s2 = libm::pow(libm::sin(grid.coord_of(p)[0]), 2.0);
            e[0] = e[0].max((b.riemann.at(p)[i4(2, 0, 1, 0, 1)] - s2).abs());
            for (r, gv) in b.ricci.at(p).iter().zip(g.field().at(p)) {
                e[1] = e[1].max((r - gv).abs());
            }
            e[2] = e[2].max((b.scalar.at(p)[0] - 2.0).abs());
            let k = sectional_curvature(&b.riemann, g.field(), p, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
            e[3] = e[3].max((k - 1.0).abs());
        }
        e
    }

    #[test]
    fn unit_sphere_curvature() {
        let coarse = sphere_errors(64);
        let fine = sphere_errors(128);
        for (c, f) in coarse.iter().zip(&fine) {
            assert!(*c < 1e-3, "{coarse:?}");
            assert!(libm::log2(c / f) > 3.5, "{coarse:?} {fine:?}");
        }
    }

    #[test]
    fn flat_curvature_vanishes() {
        let grid = default_grid(&MetricPreset::Flat, 3, 8).unwrap();
        let (g, _) = instantiate(&MetricPreset::Flat, &grid, 0.0).unwrap();
        let b = CurvatureBundle::compute(&g).unwrap();
        assert_eq!(b.riemann.max_abs(), 0.0);
        assert_eq!(b.scalar.max_abs(), 0.0);
        let k = sectional_curvature(&b.riemann, g.field(), 3, &[1.0, 0.0, 0.0], &[0.3, 1.0, 0.0]);
        assert_eq!(k.unwrap(), 0.0);
        let same = sectional_curvature(&b.riemann, g.field(), 3, &[1.0, 2.0, 0.0], &[1.0, 2.0, 0.0]);
        assert!(matches!(same, Err(Error::DegeneratePlane(_))));
    }

    fn random_bundle() -> (MetricField, CurvatureBundle) {
        let p = MetricPreset::RandomSmooth { epsilon: 0.2, seed: 3 };
        let grid = default_grid(&p, 3, 10).unwrap();
        let (g, _) = instantiate(&p, &grid, 0.0).unwrap();
        let b = CurvatureBundle::compute(&g).unwrap();
        (g, b)
    }

    fn algebraic_residual(n: usize, r: &[f64]) -> f64 {
        let mut e = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = r[i4(n, i, j, k, l)];
                        e = e.max((v + r[i4(n, j, i, k, l)]).abs());
                        e = e.max((v + r[i4(n, i, j, l, k)]).abs());
                        e = e.max((v - r[i4(n, k, l, i, j)]).abs());
                        e = e.max((v + r[i4(n, j, k, i, l)] + r[i4(n, k, i, j, l)]).abs());
                    }
                }
            }
        }
        e
    }

    #[test]
    fn riemann_symmetries_and_first_bianchi() {
        let (_, b) = random_bundle();
        let scale = b.riemann.max_abs() + 1.0;
        assert!(b.riemann.max_abs() > 1e-2);
        for p in 0..b.riemann.grid().num_points() {
            assert!(algebraic_residual(3, b.riemann.at(p)) < 1e-10 * scale);
        }
        let q = q_tensor(&b).unwrap();
        for p in 0..b.riemann.grid().num_points() {
            assert!(algebraic_residual(3, q.q.at(p)) < 1e-10 * scale * scale);
        }
    }

    #[test]
    fn contractions_are_consistent() {
        let (g, b) = random_bundle();
        for p in (0..b.ricci.grid().num_points()).step_by(37) {
            let gi = b.ginv.at(p);
            let r = b.riemann.at(p);
            // Ric_jl = g^ik R_ijkl
            for j in 0..3 {
                for l in 0..3 {
                    let mut s = 0.0;
                    for i in 0..3 {
                        for k in 0..3 {
                            s += gi[i * 3 + k] * r[i4(3, i, j, k, l)];
                        }
                    }
                    assert!((s - b.ricci.at(p)[j * 3 + l]).abs() < 1e-12);
                }
            }
            let mut id = [0.0; 9];
            for i in 0..3 {
                for j in 0..3 {
                    id[i * 3 + j] = (0..3).map(|k| gi[i * 3 + k] * g.field().at(p)[k * 3 + j]).sum();
                }
            }
            for i in 0..3 {
                for j in 0..3 {
                    assert!((id[i * 3 + j] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
                }
            }
        }
    }

    fn brute_b(n: usize, r: &[f64], gi: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; n.pow(4)];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut s = 0.0;
                        for p in 0..n {
                            for q in 0..n {
                                for rr in 0..n {
                                    for ss in 0..n {
                                        s += gi[p * n + rr]
                                            * gi[q * n + ss]
                                            * r[i4(n, p, i, q, j)]
                                            * r[i4(n, rr, k, ss, l)];
                                    }
                                }
                            }
                        }
                        out[i4(n, i, j, k, l)] = s;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn quadratic_b_matches_brute_force() {
        let (_, b) = random_bundle();
        let qb = quad_contraction_b(&b).unwrap();
        for p in (0..qb.grid().num_points()).step_by(53) {
            let want = brute_b(3, b.riemann.at(p), b.ginv.at(p));
            let got = qb.at(p);
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        for l in 0..3 {
                            let v = got[i4(3, i, j, k, l)];
                            assert!((v - want[i4(3, i, j, k, l)]).abs() < 1e-12);
                            assert!((v - got[i4(3, j, i, l, k)]).abs() < 1e-12);
                            assert!((v - got[i4(3, k, l, i, j)]).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    fn to_frame(n: usize, r: &[f64], e: &[[f64; 3]; 3]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; n.pow(4)];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let mut s = 0.0;
                        for i in 0..n {
                            for j in 0..n {
                                for k in 0..n {
                                    for l in 0..n {
                                        s += r[i4(n, i, j, k, l)] * e[a][i] * e[b][j] * e[c][k] * e[d][l];
                                    }
                                }
                            }
                        }
                        out[i4(n, a, b, c, d)] = s;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn q_tensor_matches_orthonormal_frame_definition() {
        let (g, b) = random_bundle();
        let q = q_tensor(&b).unwrap();
        let n = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let p = (rng.next_u64() % g.field().grid().num_points() as u64) as usize;
            let e = crate::linalg::orthonormal_frame(n, g.field().at(p));
            let rf = to_frame(n, b.riemann.at(p), &e);
            let qf = to_frame(n, q.q.at(p), &e);
            let r = |a, b, c, d| rf[i4(n, a, b, c, d)];
            for x in 0..n {
                for y in 0..n {
                    for z in 0..n {
                        for w in 0..n {
                            let mut sq = 0.0;
                            let mut sh = 0.0;
                            for pp in 0..n {
                                for qq in 0..n {
                                    sq += r(x, y, pp, qq) * r(pp, qq, z, w);
                                    sh += r(x, pp, z, qq) * r(y, pp, w, qq) - r(x, pp, w, qq) * r(y, pp, z, qq);
                                }
                            }
                            assert!((qf[i4(n, x, y, z, w)] - sq - 2.0 * sh).abs() < 1e-10);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn constant_curvature_q_matches_brute_force() {
        // R = K (g_ik g_jl − g_il g_jk) at one SPD point
        let n = 3;
        let k = 0.7;
        let g = [2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 1.0];
        let mut gi = [0.0; 9];
        assert!(crate::linalg::invert(3, &g, &mut gi));
        let mut r = [0.0; 81];
        for i in 0..n {
            for j in 0..n {
                for kk in 0..n {
                    for l in 0..n {
                        r[i4(n, i, j, kk, l)] =
                            k * (g[i * n + kk] * g[j * n + l] - g[i * n + l] * g[j * n + kk]);
                    }
                }
            }
        }
        let mut r2 = [0.0; 81];
        let mut rs = [0.0; 81];
        q_parts_at(n, &r, &gi, &mut r2, &mut rs);
        for i in 0..n {
            for j in 0..n {
                for kk in 0..n {
                    for l in 0..n {
                        let mut sq = 0.0;
                        let mut sh = 0.0;
                        for p in 0..n {
                            for q in 0..n {
                                for a in 0..n {
                                    for bb in 0..n {
                                        let w = gi[p * n + a] * gi[q * n + bb];
                                        sq += w * r[i4(n, i, j, p, q)] * r[i4(n, a, bb, kk, l)];
                                        sh += w
                                            * (r[i4(n, i, p, kk, q)] * r[i4(n, j, a, l, bb)]
                                                - r[i4(n, i, p, l, q)] * r[i4(n, j, a, kk, bb)]);
                                    }
                                }
                            }
                        }
                        assert!((r2[i4(n, i, j, kk, l)] - sq).abs() < 1e-12);
                        assert!((rs[i4(n, i, j, kk, l)] - 2.0 * sh).abs() < 1e-12);
                        // closed form: R² = 2K²(g∘g), R# = 2(n−2)K²(g∘g)
                        let gg = g[i * n + kk] * g[j * n + l] - g[i * n + l] * g[j * n + kk];
                        assert!((sq - 2.0 * k * k * gg).abs() < 1e-12);
                        assert!((2.0 * sh - 2.0 * (n as f64 - 2.0) * k * k * gg).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn sphere_ricci_is_parallel() {
        let (_, b) = sphere(64);
        let dric = crate::tensor::covariant_derivative(&b.ricci, &b.christoffel).unwrap();
        assert!(dric.max_abs_on(&dric.region()) < 1e-4);
        let lap = crate::tensor::rough_laplacian(&b.riemann, &b.ginv, &b.christoffel).unwrap();
        assert!(lap.max_abs_on(&lap.region()) < 1e-3);
    }

    #[test]
    fn zero_velocity_gives_zero_b() {
        let (g, b) = random_bundle();
        let h = VelocityField::zeros_like(&g);
        let bv = crate::tensor::connection_velocity(&h, &b.ginv, &b.christoffel).unwrap();
        assert_eq!(bv.field().max_abs(), 0.0);
    }
}
