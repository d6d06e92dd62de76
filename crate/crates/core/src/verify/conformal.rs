//! Exact scaled-metric families `s(t) g₀` against the flow equation.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{Field, Rank};
use crate::presets::{default_grid, family_scale, instantiate, MetricPreset};
use crate::tensor::CurvatureBundle;
use crate::verify::report::{judge, Expectation, ResidualEntry, ResidualSeries, VerificationReport};
use crate::verify::statics::strictness_of;

/// Identity ids for one time sample.
pub fn family_ids(t: f64) -> (String, String) {
    (format!("family.flow_residual.t={t}"), format!("family.ricci_invariance.t={t}"))
}

/// `s''(t) g₀ + 2 Ric(s(t) g₀)` and `Ric(s(t) g₀) − Ric(g₀)` on one grid.
pub fn family_residual_fields(preset: &MetricPreset, dim: usize, n: usize, t: f64) -> Result<(Field, Field)> {
    let base = match preset {
        MetricPreset::ConformalFamily { base, .. } | MetricPreset::QuadraticFamily { base, .. } => base,
        _ => return Err(Error::InvalidParameter("not a family preset".into())),
    };
    let grid = default_grid(preset, dim, n)?;
    let (_, _, dds) = family_scale(preset, dim, t)?;
    let (g, _) = instantiate(preset, &grid, t)?;
    let (g0, _) = instantiate(base, &grid, 0.0)?;
    let ric = CurvatureBundle::compute(&g)?.ricci;
    let ric0 = CurvatureBundle::compute(&g0)?.ricci;
    let g0f = g0.field();
    let flow = Field::from_points(grid, Rank::cov(2), ric.region(), |p, out| {
        let (r, b) = (ric.at(p), g0f.at(p));
        for c in 0..out.len() {
            out[c] = dds * b[c] + 2.0 * r[c];
        }
    })?;
    let inv = ric.sub(&ric0)?;
    Ok((flow, inv))
}

/// Flow residual of a family preset at each time sample over a spatial ladder.
/// Times at which the metric degenerates abort with `MetricDegenerate`.
pub fn conformal_residual(
    preset: &MetricPreset,
    dim: usize,
    ladder: &[usize],
    times: &[f64],
) -> Result<VerificationReport> {
    let mut sorted = ladder.to_vec();
    sorted.sort_unstable();
    let strict = strictness_of(preset);
    let mut report = VerificationReport::default();
    for &t in times {
        let (id_flow, id_inv) = family_ids(t);
        let mut flow = ResidualSeries::new(&id_flow);
        let mut inv = ResidualSeries::new(&id_inv);
        for &n in &sorted {
            let (f, i) = family_residual_fields(preset, dim, n, t)?;
            let region = f.grid().reporting_region();
            let spacing = f.grid().min_spacing();
            flow.push(ResidualEntry { spacing, dt: None, max: f.max_abs_on(&region), rms: f.rms_on(&region) })?;
            inv.push(ResidualEntry { spacing, dt: None, max: i.max_abs_on(&region), rms: i.rms_on(&region) })?;
        }
        let e = Expectation::Converges { order: 4.0, tolerance: 1e-3 };
        report.push(judge(flow, e, strict, ""));
        report.push(judge(inv, Expectation::Roundoff, strict, "conformal invariance of Ric"));
    }
    report.sort();
    Ok(report)
}

/// Times at which `s(t) ≤ floor` within `times`, for callers that want to skip them.
pub fn degenerate_times(preset: &MetricPreset, dim: usize, times: &[f64], floor: f64) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for &t in times {
        if family_scale(preset, dim, t)?.0 <= floor {
            out.push(t);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::report::{Order, Status};
    use alloc::boxed::Box;

    fn sphere_family() -> MetricPreset {
        MetricPreset::ConformalFamily { base: Box::new(MetricPreset::SphereBand { radius: 1.0 }), lambda: 1.0, v: 0.0 }
    }

    #[test]
    fn sphere_family_residual_is_discretisation_error() {
        let rep = conformal_residual(&sphere_family(), 2, &[32, 64], &[0.0, 0.5, 0.9]).unwrap();
        let s = rep.summary();
        for t in [0.0, 0.5, 0.9] {
            let (a, b) = family_ids(t);
            let e = rep.get(&a).unwrap();
            assert_eq!(e.status, Status::Pass, "{s}");
            assert!(e.series.finest().unwrap().max <= 1e-3, "{s}");
            assert!(matches!(e.order, Some(Order::Value(v)) if v >= 3.5), "{s}");
            assert_eq!(rep.get(&b).unwrap().status, Status::Pass, "{s}");
        }
    }

    #[test]
    fn static_flat_and_linear_flat_families() {
        let flat = MetricPreset::ConformalFamily { base: Box::new(MetricPreset::Flat), lambda: 0.0, v: 0.0 };
        let lin = MetricPreset::QuadraticFamily { base: Box::new(MetricPreset::Flat), kappa: 0.0, c1: 0.3, c2: 1.0 };
        for p in [flat, lin] {
            let rep = conformal_residual(&p, 2, &[16, 32], &[0.0, 0.7]).unwrap();
            for e in &rep.entries {
                assert_eq!(e.status, Status::Pass);
                assert!(e.series.max_residual() <= 1e-12);
            }
        }
    }

    #[test]
    fn root_of_rho_is_degenerate() {
        let err = conformal_residual(&sphere_family(), 2, &[32], &[1.0]).unwrap_err();
        assert!(matches!(err, Error::MetricDegenerate { .. }), "{err:?}");
        assert_eq!(degenerate_times(&sphere_family(), 2, &[0.5, 1.0], 1e-10).unwrap(), [1.0]);
    }
}
