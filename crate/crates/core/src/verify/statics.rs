//! Identities of a single static metric, checked across a resolution ladder.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{Field, Rank};
use crate::presets::{default_grid, instantiate, MetricPreset};
use crate::tensor::curvature::i4;
use crate::tensor::{covariant_derivative, covariant_derivative_along, MetricField};
use crate::verify::assemble::{Assembly, Reading, RicciSigns, StaticTerms};
use crate::verify::ladder::CommonBox;
use crate::verify::report::{
    judge, Expectation, ReportEntry, ResidualEntry, ResidualSeries, Strictness, VerificationReport,
};

pub const FIRST_BIANCHI_R: &str = "static.first_bianchi.riemann";
pub const FIRST_BIANCHI_Q: &str = "static.first_bianchi.q";
pub const CONTRACTED_BIANCHI: &str = "static.contracted_bianchi";
pub const SUMMED_BIANCHI: &str = "static.summed_second_bianchi";
pub const RICCI_COMMUTATION: &str = "static.ricci_commutation";
pub const RICCI_COMMUTATION_FLIPPED: &str = "static.ricci_commutation.flipped";
pub const RICCI_IDENTITY_STATED: &str = "static.ricci_identity.stated";
pub const RICCI_IDENTITY_STANDARD: &str = "static.ricci_identity.standard";
pub const CONSTANT_CURVATURE_RICCI: &str = "static.constant_curvature.ricci";
pub const CONSTANT_CURVATURE_Q: &str = "static.constant_curvature.q";
pub const CONSTANT_CURVATURE_SCALAR: &str = "static.constant_curvature.scalar";

/// Residual fields of one rung, by identity.
pub type StaticResiduals = Vec<(&'static str, Field)>;

/// First Bianchi residual `T_ijkl + T_jkil + T_kijl`.
pub fn first_bianchi(t: &Field) -> Result<Field> {
    let n = t.dim();
    Field::from_points(*t.grid(), Rank::cov(4), t.region(), |p, out| {
        let v = t.at(p);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        out[i4(n, i, j, k, l)] =
                            v[i4(n, i, j, k, l)] + v[i4(n, j, k, i, l)] + v[i4(n, k, i, j, l)];
                    }
                }
            }
        }
    })
}

/// `g^ij (D_i Ric)_jk − ½ ∂_k Scal`.
pub fn contracted_bianchi(terms: &StaticTerms) -> Result<Field> {
    let n = terms.dim;
    let bd = &terms.bundle;
    let dric = covariant_derivative(&bd.ricci, &bd.christoffel)?;
    let ds = bd.scalar.gradient()?;
    let region = dric.region().intersect(&ds.region());
    Field::from_points(*dric.grid(), Rank::cov(1), region, |p, out| {
        let (d, s, gi) = (dric.at(p), ds.at(p), bd.ginv.at(p));
        for k in 0..n {
            let mut acc = -0.5 * s[k];
            for i in 0..n {
                for j in 0..n {
                    acc += gi[i * n + j] * d[(i * n + j) * n + k];
                }
            }
            out[k] = acc;
        }
    })
}

/// Frame-summed second Bianchi identity differentiated once more:
/// `Σ_k (D²_{X,Z}R)(e_k,Y,e_k,W) − (D²_{X,W}R)(e_k,Y,e_k,Z) − (D²_{X,e_k}R)(e_k,Y,Z,W)`,
/// built from `D²R` one outer direction `X` at a time.
pub fn summed_second_bianchi(terms: &StaticTerms) -> Result<Field> {
    let n = terms.dim;
    let bd = &terms.bundle;
    let dr = covariant_derivative(&bd.riemann, &bd.christoffel)?;
    let n4 = n.pow(4);
    let mut parts = Vec::with_capacity(n);
    for x in 0..n {
        let s = covariant_derivative_along(&dr, &bd.christoffel, x)?;
        let part = Field::from_points(*s.grid(), Rank::cov(3), s.region(), |p, out| {
            let (sv, gi) = (s.at(p), bd.ginv.at(p));
            // sv[b * n4 + ijkl] = (D²_{X,b} R)_ijkl
            for y in 0..n {
                for z in 0..n {
                    for w in 0..n {
                        let mut acc = 0.0;
                        for a in 0..n {
                            for b in 0..n {
                                let gab = gi[a * n + b];
                                acc += gab
                                    * (sv[z * n4 + i4(n, a, y, b, w)] - sv[w * n4 + i4(n, a, y, b, z)]
                                        - sv[a * n4 + i4(n, b, y, z, w)]);
                            }
                        }
                        out[(y * n + z) * n + w] = acc;
                    }
                }
            }
        })?;
        parts.push(part);
    }
    let region = parts.iter().fold(parts[0].region(), |r, f| r.intersect(&f.region()));
    let n3 = n * n * n;
    Field::from_points(*bd.riemann.grid(), Rank::cov(4), region, |p, out| {
        for (x, f) in parts.iter().enumerate() {
            out[x * n3..(x + 1) * n3].copy_from_slice(f.at(p));
        }
    })
}

/// `Ric − (n−1)K g`, `Q(R) − 2(n−1)K²(g∘g)` and `Scal − n(n−1)K` for constant
/// sectional curvature `K`.
pub fn constant_curvature_residuals(terms: &StaticTerms, k: f64) -> Result<(Field, Field, Field)> {
    let n = terms.dim;
    let nm1 = (n - 1) as f64;
    let g = &terms.g;
    let ric = &terms.bundle.ricci;
    let r1 = Field::from_points(*g.grid(), Rank::cov(2), ric.region(), |p, out| {
        let (rv, gv) = (ric.at(p), g.at(p));
        for c in 0..n * n {
            out[c] = rv[c] - nm1 * k * gv[c];
        }
    })?;
    let q = &terms.q;
    let r2 = Field::from_points(*g.grid(), Rank::cov(4), q.region(), |p, out| {
        let (qv, gv) = (q.at(p), g.at(p));
        for i in 0..n {
            for j in 0..n {
                for kk in 0..n {
                    for l in 0..n {
                        let gg = gv[i * n + kk] * gv[j * n + l] - gv[i * n + l] * gv[j * n + kk];
                        out[i4(n, i, j, kk, l)] = qv[i4(n, i, j, kk, l)] - 2.0 * nm1 * k * k * gg;
                    }
                }
            }
        }
    })?;
    let scal = &terms.bundle.scalar;
    let target = n as f64 * nm1 * k;
    let r3 = Field::from_points(*g.grid(), Rank::SCALAR, scal.region(), |p, out| {
        out[0] = scal.at(p)[0] - target;
    })?;
    Ok((r1, r2, r3))
}

/// All static residual fields of one metric. `curvature` adds the
/// constant-curvature closed forms.
pub fn static_residuals(g: &MetricField, asm: &Assembly, curvature: Option<f64>) -> Result<StaticResiduals> {
    let terms = StaticTerms::compute(g, asm)?;
    let mut out: StaticResiduals = Vec::new();
    out.push((FIRST_BIANCHI_R, first_bianchi(&terms.bundle.riemann)?));
    out.push((FIRST_BIANCHI_Q, first_bianchi(&terms.q)?));
    out.push((CONTRACTED_BIANCHI, contracted_bianchi(&terms)?));
    out.push((SUMMED_BIANCHI, summed_second_bianchi(&terms)?));
    let lhs = terms.lemma_lhs()?;
    out.push((RICCI_COMMUTATION, lhs.sub(&terms.lemma_rhs(Reading::Operator)?)?));
    out.push((RICCI_COMMUTATION_FLIPPED, lhs.sub(&terms.lemma_rhs(Reading::Flipped)?)?));
    let comm = terms.ricci_commutator()?;
    out.push((RICCI_IDENTITY_STATED, comm.sub(&terms.ricci_action(RicciSigns::Printed)?)?));
    out.push((RICCI_IDENTITY_STANDARD, comm.sub(&terms.ricci_action(RicciSigns::Standard)?)?));
    if let Some(k) = curvature {
        let (r1, r2, r3) = constant_curvature_residuals(&terms, k)?;
        out.push((CONSTANT_CURVATURE_RICCI, r1));
        out.push((CONSTANT_CURVATURE_Q, r2));
        out.push((CONSTANT_CURVATURE_SCALAR, r3));
    }
    Ok(out)
}

/// Accumulates residual norms of many identities over a ladder.
#[derive(Debug, Clone, Default)]
pub struct LadderAccumulator {
    series: Vec<(ResidualSeries, CommonBox)>,
}

impl LadderAccumulator {
    /// Adds one rung; rungs must arrive coarsest first.
    pub fn add(&mut self, residuals: &[(&'static str, Field)], dt: Option<f64>) -> Result<()> {
        for (id, f) in residuals {
            let idx = match self.series.iter().position(|(s, _)| s.identity == *id) {
                Some(i) => i,
                None => {
                    self.series.push((ResidualSeries::new(id), CommonBox::default()));
                    self.series.len() - 1
                }
            };
            let (series, bx) = &mut self.series[idx];
            let (max, rms) = bx.norms(f);
            let spacing = f.grid().min_spacing();
            series.push(ResidualEntry { spacing, dt, max, rms })?;
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&ResidualSeries> {
        self.series.iter().find(|(s, _)| s.identity == id).map(|(s, _)| s)
    }

    pub fn into_series(self) -> Vec<ResidualSeries> {
        self.series.into_iter().map(|(s, _)| s).collect()
    }
}

/// How strictly a run of `preset` is judged.
pub fn strictness_of(preset: &MetricPreset) -> Strictness {
    match preset {
        MetricPreset::Flat => Strictness::Exact,
        MetricPreset::SphereBand { .. } => Strictness::Oracle,
        MetricPreset::ConformalFamily { base, .. } | MetricPreset::QuadraticFamily { base, .. } => {
            match **base {
                MetricPreset::Flat => Strictness::Exact,
                _ => Strictness::Oracle,
            }
        }
        _ => Strictness::Generic,
    }
}

fn static_expectation(id: &str) -> (Expectation, &'static str, bool) {
    let conv = Expectation::Converges { order: 4.0, tolerance: 1e-2 };
    match id {
        FIRST_BIANCHI_R | FIRST_BIANCHI_Q => (Expectation::Roundoff, "algebraic", false),
        RICCI_COMMUTATION_FLIPPED => (conv, "alternative reading of the curvature operator", true),
        RICCI_IDENTITY_STATED => (conv, "sign pattern as stated", true),
        RICCI_IDENTITY_STANDARD => (conv, "standard sign pattern", true),
        _ => (conv, "", false),
    }
}

/// Runs every static identity on `preset` over the ladder of points per axis.
pub fn check_static_identities(
    preset: &MetricPreset,
    dim: usize,
    ladder: &[usize],
    asm: &Assembly,
) -> Result<VerificationReport> {
    if ladder.len() < 2 {
        return Err(Error::InvalidParameter("a static ladder needs at least two resolutions".into()));
    }
    let mut sorted = ladder.to_vec();
    sorted.sort_unstable();
    let curvature = match preset {
        MetricPreset::SphereBand { radius } => Some(1.0 / (radius * radius)),
        MetricPreset::Flat => Some(0.0),
        _ => None,
    };
    let mut acc = LadderAccumulator::default();
    for &n in &sorted {
        let grid = default_grid(preset, dim, n)?;
        let (g, _) = instantiate(preset, &grid, 0.0)?;
        let res = static_residuals(&g, asm, curvature)?;
        acc.add(&res, None)?;
    }
    Ok(report_from(acc, strictness_of(preset), static_expectation))
}

/// Judges accumulated series. Entries flagged as alternatives are never FAIL.
pub fn report_from(
    acc: LadderAccumulator,
    strict: Strictness,
    expect: fn(&str) -> (Expectation, &'static str, bool),
) -> VerificationReport {
    let mut report = VerificationReport::default();
    for series in acc.into_series() {
        let (e, note, alternative) = expect(&series.identity);
        let s = if alternative && strict == Strictness::Oracle { Strictness::Generic } else { strict };
        let entry: ReportEntry = judge(series, e, s, note);
        report.push(entry);
    }
    report.sort();
    report
}
