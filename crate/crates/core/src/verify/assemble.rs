//! Right-hand sides of the curvature identities and evolution equations,
//! assembled from spatial derivatives at one time level.
//!
//! Nothing here looks at neighbouring snapshots; time derivatives enter only
//! through the explicit `∂_t R` and `∂_t Ric` arguments of the local Ricci and
//! scalar equations, which are lower-order correction terms.
//!
//! Vector-valued curvature: `(R(X,Y)Z)^m = −g^mv R_XYZv`.

use crate::error::Result;
use crate::field::{Field, Rank};
use crate::grid::Region;
use crate::tensor::curvature::{i4, q_tensor, quad_contraction_b, trace, CurvatureBundle};
use crate::tensor::{
    connection_acceleration, connection_velocity, covariant_derivative, rough_laplacian,
    second_covariant_derivative, ConnectionField, ConnectionVelocityField, MetricField, VelocityField,
};

/// Knobs for deliberately corrupted assemblies (mutation tests).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assembly {
    /// Multiplies `Q(R)` wherever it appears.
    pub q_sign: f64,
}

impl Default for Assembly {
    fn default() -> Self {
        Assembly { q_sign: 1.0 }
    }
}

/// Which version of a global evolution equation to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    /// As printed.
    Printed,
    /// Re-derived: Ricci terms `+Ric(R(X,Y)Z,W) − Ric(R(X,Y)W,Z)` and
    /// `2(D_X h)(B(Y,Z),W) − 2(D_Y h)(B(X,Z),W)` in place of the `h(D B)` terms.
    Derived,
}

/// Reading of `Ric(X, R_{Z,W} Y)` in the commutation formula for `D²Ric`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reading {
    /// `R_{Z,W} = R(Z,W)` as a curvature operator.
    Operator,
    /// Opposite sign on both `Ric·R` terms.
    Flipped,
}

/// Sign pattern for `(D²_{X,Y} − D²_{Y,X}) Ric`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RicciSigns {
    /// `Ric(R(X,Y)Z,W) + Ric(R(X,Y)W,Z)`.
    Printed,
    /// `−Ric(R(X,Y)Z,W) − Ric(Z,R(X,Y)W)`.
    Standard,
}

/// Curvature, its derivatives and the quadratic terms of one static metric.
#[derive(Debug, Clone)]
pub struct StaticTerms {
    pub dim: usize,
    pub g: Field,
    pub bundle: CurvatureBundle,
    pub lap_riemann: Field,
    pub q: Field,
    pub d2_ricci: Field,
}

impl StaticTerms {
    pub fn compute(g: &MetricField, asm: &Assembly) -> Result<Self> {
        let bundle = CurvatureBundle::compute(g)?;
        let lap_riemann = rough_laplacian(&bundle.riemann, &bundle.ginv, &bundle.christoffel)?;
        let q = q_tensor(&bundle)?.q.scaled(asm.q_sign);
        let d2_ricci = second_covariant_derivative(&bundle.ricci, &bundle.christoffel)?;
        Ok(StaticTerms { dim: g.dim(), g: g.field().clone(), bundle, lap_riemann, q, d2_ricci })
    }

    pub fn gamma(&self) -> &ConnectionField {
        &self.bundle.christoffel
    }

    /// `(D²_{X,Z}Ric)(Y,W) − (D²_{X,W}Ric)(Y,Z) − (D²_{Y,Z}Ric)(X,W) + (D²_{Y,W}Ric)(X,Z)`.
    pub fn lemma_lhs(&self) -> Result<Field> {
        let n = self.dim;
        let d2 = &self.d2_ricci;
        Field::from_points(*d2.grid(), Rank::cov(4), d2.region(), |p, out| {
            let v = d2.at(p);
            for_each4(n, |x, y, z, w, c| out[c] = d4(n, v, x, y, z, w));
        })
    }

    /// `ΔR + Q(R) − Ric(X,R_{Z,W}Y) + Ric(Y,R_{Z,W}X)`.
    pub fn lemma_rhs(&self, reading: Reading) -> Result<Field> {
        let n = self.dim;
        let sign = match reading {
            Reading::Operator => 1.0,
            Reading::Flipped => -1.0,
        };
        let (r, gi, ric) = (&self.bundle.riemann, &self.bundle.ginv, &self.bundle.ricci);
        let region = self.lap_riemann.region().intersect(&self.q.region());
        Field::from_points(*r.grid(), Rank::cov(4), region, |p, out| {
            let m = mixed_ricci(n, gi.at(p), ric.at(p));
            let (rv, lap, q) = (r.at(p), self.lap_riemann.at(p), self.q.at(p));
            for_each4(n, |x, y, z, w, c| {
                out[c] = lap[c] + q[c]
                    + sign * (-ric_op(n, rv, &m, x, z, w, y) + ric_op(n, rv, &m, y, z, w, x));
            });
        })
    }

    /// `(D²_{X,Y} − D²_{Y,X})Ric (Z,W)` from the stored `D²Ric`.
    pub fn ricci_commutator(&self) -> Result<Field> {
        let n = self.dim;
        let d2 = &self.d2_ricci;
        Field::from_points(*d2.grid(), Rank::cov(4), d2.region(), |p, out| {
            let v = d2.at(p);
            for_each4(n, |x, y, z, w, c| out[c] = v[i4(n, x, y, z, w)] - v[i4(n, y, x, z, w)]);
        })
    }

    /// Curvature action on Ric with the given sign pattern.
    pub fn ricci_action(&self, signs: RicciSigns) -> Result<Field> {
        let n = self.dim;
        let (r, gi, ric) = (&self.bundle.riemann, &self.bundle.ginv, &self.bundle.ricci);
        Field::from_points(*r.grid(), Rank::cov(4), r.region().intersect(&ric.region()), |p, out| {
            let m = mixed_ricci(n, gi.at(p), ric.at(p));
            let rv = r.at(p);
            for_each4(n, |x, y, z, w, c| {
                let a = ric_r(n, rv, &m, x, y, z, w);
                let b = ric_r(n, rv, &m, x, y, w, z);
                out[c] = match signs {
                    RicciSigns::Printed => a + b,
                    RicciSigns::Standard => -a - b,
                };
            });
        })
    }
}

/// Everything needed for the evolution equations at one phase point `(g, h)`.
#[derive(Debug, Clone)]
pub struct EvolutionTerms {
    pub stat: StaticTerms,
    pub h: Field,
    pub lap_ricci: Field,
    pub lap_scalar: Field,
    pub quad_b: Field,
    /// `B^k_ij`
    pub b: ConnectionVelocityField,
    /// `B_lij = g_lk B^k_ij`
    pub b_low: Field,
    /// `(D_x B)_lij`, lowered, derivative index first.
    pub db_low: Field,
    /// `(D_x h)_ij`
    pub dh: Field,
    /// `A^k_ij` from the acceleration formula.
    pub accel: Field,
}

impl EvolutionTerms {
    pub fn compute(g: &MetricField, h: &VelocityField, asm: &Assembly) -> Result<Self> {
        let stat = StaticTerms::compute(g, asm)?;
        let bd = &stat.bundle;
        let gamma = &bd.christoffel;
        let lap_ricci = rough_laplacian(&bd.ricci, &bd.ginv, gamma)?;
        let lap_scalar = rough_laplacian(&bd.scalar, &bd.ginv, gamma)?;
        let quad_b = quad_contraction_b(bd)?;
        let b = connection_velocity(h, &bd.ginv, gamma)?;
        let b_low = b.lowered(g.field())?;
        let db_low = covariant_derivative(&b_low, gamma)?;
        let dh = covariant_derivative(h.field(), gamma)?;
        let accel = connection_acceleration(h, &bd.ginv, gamma, &bd.ricci, &b)?.into_field();
        Ok(EvolutionTerms {
            stat,
            h: h.field().clone(),
            lap_ricci,
            lap_scalar,
            quad_b,
            b,
            b_low,
            db_low,
            dh,
            accel,
        })
    }

    fn at(&self, p: usize) -> Point<'_> {
        let s = &self.stat;
        let n = s.dim;
        let gi = s.bundle.ginv.at(p);
        let ric = s.bundle.ricci.at(p);
        let h = self.h.at(p);
        let mut hup = [0.0; 9];
        let mut hh = [0.0; 9];
        let mut hg = [0.0; 9];
        // H^{jl} = g^jp h_pq g^ql, HH = g⁻¹ h g⁻¹ h g⁻¹, hg_W^l = h_Wk g^kl
        let mut gih = [0.0; 9];
        for a in 0..n {
            for b in 0..n {
                let mut s1 = 0.0;
                let mut s2 = 0.0;
                for k in 0..n {
                    s1 += gi[a * n + k] * h[k * n + b];
                    s2 += h[a * n + k] * gi[k * n + b];
                }
                gih[a * n + b] = s1;
                hg[a * n + b] = s2;
            }
        }
        for a in 0..n {
            for b in 0..n {
                let mut s1 = 0.0;
                for k in 0..n {
                    s1 += gih[a * n + k] * gi[k * n + b];
                }
                hup[a * n + b] = s1;
            }
        }
        for a in 0..n {
            for b in 0..n {
                let mut s1 = 0.0;
                for k in 0..n {
                    s1 += gih[a * n + k] * hup[k * n + b];
                }
                hh[a * n + b] = s1;
            }
        }
        Point {
            n,
            gi,
            r: s.bundle.riemann.at(p),
            ric,
            m: mixed_ricci(n, gi, ric),
            hup,
            hh,
            hg,
            b: self.b.field().at(p),
            bl: self.b_low.at(p),
            dbl: self.db_low.at(p),
            dh: self.dh.at(p),
        }
    }

    fn dynamic_region(&self) -> Region {
        self.stat
            .lap_riemann
            .region()
            .intersect(&self.stat.q.region())
            .intersect(&self.stat.d2_ricci.region())
            .intersect(&self.lap_ricci.region())
            .intersect(&self.lap_scalar.region())
            .intersect(&self.db_low.region())
            .intersect(&self.dh.region())
    }

    /// Local Riemann equation:
    /// `ΔR + 2(B_ijkl − B_ijlk − B_iljk + B_ikjl) − g^pq(R_pjkl Ric_qi + R_ipkl Ric_qj
    /// + R_ijpl Ric_qk + R_ijkp Ric_ql) + 2g_pq(B^p_il B^q_jk − B^p_jl B^q_ik)`.
    pub fn riemann_local(&self) -> Result<Field> {
        let n = self.stat.dim;
        let (lap, qb) = (&self.stat.lap_riemann, &self.quad_b);
        Field::from_points(*lap.grid(), Rank::cov(4), self.dynamic_region(), |p, out| {
            let pt = self.at(p);
            let (lv, bq) = (lap.at(p), qb.at(p));
            for_each4(n, |i, j, k, l, c| {
                let quad = bq[i4(n, i, j, k, l)] - bq[i4(n, i, j, l, k)] - bq[i4(n, i, l, j, k)]
                    + bq[i4(n, i, k, j, l)];
                let mut rr = 0.0;
                for q in 0..n {
                    rr += pt.r[i4(n, q, j, k, l)] * pt.m[q * n + i]
                        + pt.r[i4(n, i, q, k, l)] * pt.m[q * n + j]
                        + pt.r[i4(n, i, j, q, l)] * pt.m[q * n + k]
                        + pt.r[i4(n, i, j, k, q)] * pt.m[q * n + l];
                }
                out[c] = lv[c] + 2.0 * quad - rr + pt.gg(i, j, k, l);
            });
        })
    }

    /// Local Ricci equation, with `∂_t R_ijkl` supplied by the caller.
    pub fn ricci_local(&self, dt_riemann: &Field) -> Result<Field> {
        let n = self.stat.dim;
        let lap = &self.lap_ricci;
        let region = self.dynamic_region().intersect(&dt_riemann.region());
        Field::from_points(*lap.grid(), Rank::cov(2), region, |p, out| {
            let pt = self.at(p);
            let (lv, dr) = (lap.at(p), dt_riemann.at(p));
            let ricup = raise2(n, pt.gi, pt.ric);
            for i in 0..n {
                for k in 0..n {
                    let mut s = lv[i * n + k];
                    for a in 0..n {
                        for b in 0..n {
                            s += 2.0 * pt.r[i4(n, a, i, b, k)] * ricup[a * n + b];
                            s -= 2.0 * pt.gi[a * n + b] * pt.ric[a * n + i] * pt.ric[b * n + k];
                            s += pt.gi[a * n + b] * pt.gg(i, a, k, b);
                            s -= 2.0 * pt.hup[a * n + b] * dr[i4(n, i, a, k, b)];
                            s += 2.0 * pt.hh[a * n + b] * pt.r[i4(n, i, a, k, b)];
                        }
                    }
                    out[i * n + k] = s;
                }
            }
        })
    }

    /// Local scalar equation, with `∂_t R_ijkl` and `∂_t Ric_ik` supplied.
    pub fn scalar_local(&self, dt_riemann: &Field, dt_ricci: &Field) -> Result<Field> {
        let n = self.stat.dim;
        let lap = &self.lap_scalar;
        let region = self.dynamic_region().intersect(&dt_riemann.region()).intersect(&dt_ricci.region());
        Field::from_points(*lap.grid(), Rank::SCALAR, region, |p, out| {
            let pt = self.at(p);
            let (dr, dric) = (dt_riemann.at(p), dt_ricci.at(p));
            let ricup = raise2(n, pt.gi, pt.ric);
            let mut s = lap.at(p)[0];
            for i in 0..n {
                for k in 0..n {
                    s += 2.0 * ricup[i * n + k] * pt.ric[i * n + k];
                    s -= 2.0 * pt.hup[i * n + k] * dric[i * n + k];
                    s += 4.0 * pt.ric[i * n + k] * pt.hh[i * n + k];
                    for j in 0..n {
                        for l in 0..n {
                            let gik = pt.gi[i * n + k];
                            s += gik * pt.gi[j * n + l] * pt.gg(i, j, k, l);
                            s -= 2.0 * gik * pt.hup[j * n + l] * dr[i4(n, i, j, k, l)];
                        }
                    }
                }
            }
            out[0] = s;
        })
    }

    /// Global Riemann equation in terms of `D²Ric` (coordinate fields X,Y,Z,W).
    pub fn riemann_global(&self, form: Form) -> Result<Field> {
        let n = self.stat.dim;
        let d2 = &self.stat.d2_ricci;
        Field::from_points(*d2.grid(), Rank::cov(4), self.dynamic_region(), |p, out| {
            let pt = self.at(p);
            let dv = d2.at(p);
            for_each4(n, |x, y, z, w, c| {
                out[c] = d4(n, dv, x, y, z, w) + pt.global_tail(form, x, y, z, w);
            });
        })
    }

    /// Global Riemann equation with `D²Ric` traded for `ΔR + Q(R)` and the
    /// `Ric·R` terms of the commutation formula (operator reading).
    pub fn riemann_q_form(&self, form: Form) -> Result<Field> {
        let n = self.stat.dim;
        let (lap, q) = (&self.stat.lap_riemann, &self.stat.q);
        Field::from_points(*lap.grid(), Rank::cov(4), self.dynamic_region(), |p, out| {
            let pt = self.at(p);
            let (lv, qv) = (lap.at(p), q.at(p));
            for_each4(n, |x, y, z, w, c| {
                let lemma = lv[c] + qv[c] - ric_op(n, pt.r, &pt.m, x, z, w, y)
                    + ric_op(n, pt.r, &pt.m, y, z, w, x);
                out[c] = lemma + pt.global_tail(form, x, y, z, w);
            });
        })
    }

    /// Frame-summed Ricci equation:
    /// `ΔRic + 2 g^ab g^cd R_XaYc Ric_bd + 2g^ab[h((D_X B)(e_a,Y),e_b) − h((D_a B)(X,Y),e_b)]
    /// − 2g^ab[g(B(X,B(e_a,Y)),e_b) − g(B(e_a,B(X,Y)),e_b)]`.
    pub fn ricci_global(&self) -> Result<Field> {
        let n = self.stat.dim;
        let lap = &self.lap_ricci;
        Field::from_points(*lap.grid(), Rank::cov(2), self.dynamic_region(), |p, out| {
            let pt = self.at(p);
            let lv = lap.at(p);
            let ricup = raise2(n, pt.gi, pt.ric);
            for x in 0..n {
                for y in 0..n {
                    let mut s = lv[x * n + y];
                    for a in 0..n {
                        for b in 0..n {
                            let gab = pt.gi[a * n + b];
                            s += 2.0 * pt.r[i4(n, x, a, y, b)] * ricup[a * n + b];
                            s += 2.0 * gab * (pt.h_db(x, a, y, b) - pt.h_db(a, x, y, b));
                            s -= 2.0 * gab * (pt.bb(x, a, y, b) - pt.bb(a, x, y, b));
                        }
                    }
                    out[x * n + y] = s;
                }
            }
        })
    }

    /// Frame-summed scalar equation:
    /// `ΔScal + 2|Ric|² + 2Σ[h((D_j B)(e_i,e_j),e_i) − h((D_i B)(e_j,e_j),e_i)]
    /// − 2Σ[g(B(e_j,B(e_i,e_j)),e_i) − g(B(e_i,B(e_j,e_j)),e_i)]`.
    pub fn scalar_global(&self) -> Result<Field> {
        let n = self.stat.dim;
        let lap = &self.lap_scalar;
        Field::from_points(*lap.grid(), Rank::SCALAR, self.dynamic_region(), |p, out| {
            let pt = self.at(p);
            let ricup = raise2(n, pt.gi, pt.ric);
            let mut s = lap.at(p)[0] + 2.0 * trace(n, &ricup[..n * n], pt.ric);
            for_each4(n, |a, b, c, d, _| {
                let w1 = pt.gi[a * n + c] * pt.gi[b * n + d];
                let w2 = pt.gi[a * n + d] * pt.gi[b * n + c];
                s += 2.0 * (w1 * pt.h_db(a, b, c, d) - w2 * pt.h_db(a, b, c, d));
                s -= 2.0 * (w1 * pt.bb(a, b, c, d) - w2 * pt.bb(a, b, c, d));
            });
            out[0] = s;
        })
    }
}

struct Point<'a> {
    n: usize,
    gi: &'a [f64],
    r: &'a [f64],
    ric: &'a [f64],
    m: [f64; 9],
    hup: [f64; 9],
    hh: [f64; 9],
    hg: [f64; 9],
    b: &'a [f64],
    bl: &'a [f64],
    dbl: &'a [f64],
    dh: &'a [f64],
}

impl Point<'_> {
    /// `2 g_pq (B^p_il B^q_jk − B^p_jl B^q_ik)`
    fn gg(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for q in 0..n {
            s += self.bl[(q * n + i) * n + l] * self.b[(q * n + j) * n + k]
                - self.bl[(q * n + j) * n + l] * self.b[(q * n + i) * n + k];
        }
        2.0 * s
    }

    /// `h((D_X B)(Y,Z),W)`
    fn h_db(&self, x: usize, y: usize, z: usize, w: usize) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for l in 0..n {
            s += self.hg[w * n + l] * self.dbl[i4(n, x, l, y, z)];
        }
        s
    }

    /// `(D_X h)(B(Y,Z),W)`
    fn dh_b(&self, x: usize, y: usize, z: usize, w: usize) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for k in 0..n {
            s += self.dh[(x * n + k) * n + w] * self.b[(k * n + y) * n + z];
        }
        s
    }

    /// `g(B(X,B(Y,Z)),W)`
    fn bb(&self, x: usize, y: usize, z: usize, w: usize) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for m in 0..n {
            s += self.bl[(w * n + x) * n + m] * self.b[(m * n + y) * n + z];
        }
        s
    }

    /// Everything in the global Riemann equation besides `D²Ric` (or the commutation identity standing in for it).
    fn global_tail(&self, form: Form, x: usize, y: usize, z: usize, w: usize) -> f64 {
        let n = self.n;
        let rr = ric_r(n, self.r, &self.m, x, y, z, w) - ric_r(n, self.r, &self.m, x, y, w, z);
        let comp = -2.0 * self.bb(x, y, z, w) + 2.0 * self.bb(y, x, z, w);
        match form {
            Form::Printed => {
                -rr + 2.0 * self.h_db(x, y, z, w) - 2.0 * self.h_db(y, x, z, w) + comp
            }
            Form::Derived => rr + 2.0 * self.dh_b(x, y, z, w) - 2.0 * self.dh_b(y, x, z, w) + comp,
        }
    }
}

/// `M^v_W = g^vm Ric_mW`.
fn mixed_ricci(n: usize, gi: &[f64], ric: &[f64]) -> [f64; 9] {
    let mut m = [0.0; 9];
    for v in 0..n {
        for w in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += gi[v * n + k] * ric[k * n + w];
            }
            m[v * n + w] = s;
        }
    }
    m
}

/// `T^ab = g^ai g^bj T_ij`.
fn raise2(n: usize, gi: &[f64], t: &[f64]) -> [f64; 9] {
    let mut out = [0.0; 9];
    for a in 0..n {
        for b in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += gi[a * n + i] * gi[b * n + j] * t[i * n + j];
                }
            }
            out[a * n + b] = s;
        }
    }
    out
}

/// `Ric(R(X,Y)Z,W) = −R_XYZv M^v_W`.
fn ric_r(n: usize, r: &[f64], m: &[f64; 9], x: usize, y: usize, z: usize, w: usize) -> f64 {
    let mut s = 0.0;
    for v in 0..n {
        s -= r[i4(n, x, y, z, v)] * m[v * n + w];
    }
    s
}

/// `Ric(X, R(Z,W)Y) = −R_ZWYv M^v_X`.
fn ric_op(n: usize, r: &[f64], m: &[f64; 9], x: usize, z: usize, w: usize, y: usize) -> f64 {
    ric_r(n, r, m, z, w, y, x)
}

/// The four `D²Ric` terms of the commutation formula.
fn d4(n: usize, v: &[f64], x: usize, y: usize, z: usize, w: usize) -> f64 {
    v[i4(n, x, z, y, w)] - v[i4(n, x, w, y, z)] - v[i4(n, y, z, x, w)] + v[i4(n, y, w, x, z)]
}

fn for_each4(n: usize, mut f: impl FnMut(usize, usize, usize, usize, usize)) {
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    f(i, j, k, l, i4(n, i, j, k, l));
                }
            }
        }
    }
}
