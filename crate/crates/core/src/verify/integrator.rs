//! Checks on the time integrator and on the surface reduction.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::{Field, Rank};
use crate::flow::{step, surface_state_from, surface_step, FlowState, FlowVariant, SurfaceState};
use crate::grid::ChartGrid;
use crate::presets::{default_grid, instantiate, MetricPreset};
use crate::tensor::{MetricField, VelocityField};
use crate::verify::report::{judge, Expectation, ResidualEntry, ResidualSeries, Strictness, VerificationReport};

pub const TIME_REVERSAL: &str = "integrator.time_reversal";
pub const TEMPORAL_ORDER: &str = "integrator.temporal_order";
pub const SURFACE_AGREEMENT: &str = "reduction.tensor_vs_surface";
pub const LINEAR_WAVE: &str = "reduction.linear_wave";

/// Relative tolerance shared by the reversal and reduction checks.
pub const RELATIVE_TOLERANCE: f64 = 1e-8;

fn advance(s0: &FlowState, variant: FlowVariant, dt: f64, steps: usize) -> Result<FlowState> {
    let mut s = s0.clone();
    for _ in 0..steps {
        s = step(&s, variant, dt)?;
    }
    Ok(s)
}

fn single(id: &str, spacing: f64, dt: f64, value: f64) -> Result<ResidualSeries> {
    let mut s = ResidualSeries::new(id);
    s.push(ResidualEntry { spacing, dt: Some(dt), max: value, rms: value })?;
    Ok(s)
}

/// Time reversal after `steps` steps, and the temporal order of `g(steps·dt)`
/// at `dt` and `dt/2` against a `dt/4` reference.
pub fn check_integrator(
    preset: &MetricPreset,
    dim: usize,
    n: usize,
    dt: f64,
    steps: usize,
) -> Result<VerificationReport> {
    if steps == 0 || !(dt > 0.0) {
        return Err(Error::InvalidParameter("integrator check needs dt > 0 and at least one step".into()));
    }
    let grid = default_grid(preset, dim, n)?;
    let (g, h) = instantiate(preset, &grid, 0.0)?;
    let s0 = FlowState::new(g, h)?;
    let h0 = grid.min_spacing();

    let mut back = advance(&s0, FlowVariant::Hgf, dt, steps)?;
    back.h = VelocityField::new(back.h.field().scaled(-1.0))?;
    let back = advance(&back, FlowVariant::Hgf, dt, steps)?;
    let scale = s0.g.field().max_abs().max(s0.h.field().max_abs());
    let dg = back.g.field().sub(s0.g.field())?.max_abs();
    let dh = back.h.field().add(s0.h.field())?.max_abs();
    let reversal = single(TIME_REVERSAL, h0, dt, dg.max(dh) / scale)?;

    let reference = advance(&s0, FlowVariant::Hgf, dt / 4.0, 4 * steps)?;
    let mut order = ResidualSeries::new(TEMPORAL_ORDER);
    for k in [1usize, 2] {
        let s = advance(&s0, FlowVariant::Hgf, dt / k as f64, k * steps)?;
        let e = s.g.field().sub(reference.g.field())?;
        let rms = e.rms_on(&grid.full_region());
        // the refinement variable here is dt
        order.push(ResidualEntry { spacing: dt / k as f64, dt: Some(dt / k as f64), max: e.max_abs(), rms })?;
    }

    let mut report = VerificationReport::default();
    report.push(judge(
        reversal,
        Expectation::ClosedForm { tolerance: RELATIVE_TOLERANCE },
        Strictness::Oracle,
        "relative state error",
    ));
    report.push(judge(
        order,
        Expectation::Converges { order: 4.0, tolerance: 1e-4 },
        Strictness::Oracle,
        "spacing column is dt",
    ));
    report.sort();
    Ok(report)
}

fn conformal_state(grid: ChartGrid, eps: f64) -> Result<FlowState> {
    let g = Field::from_fn(grid, Rank::cov(2), move |x, b| {
        let u = 1.0 + eps * libm::cos(x[0]) + 0.5 * eps * libm::sin(x[1]);
        b[0] = u;
        b[3] = u;
    });
    let g = MetricField::with_default_floor(g)?;
    FlowState::new(g.clone(), VelocityField::zeros_like(&g))
}

/// Tensor flow of `g = u δ` against the scalar equation for `u`, and the
/// small-amplitude scalar solution against the linear wave
/// `1 + ε cos x cos t` at amplitudes `4ε, 2ε, ε`.
pub fn check_surface_reduction(n: usize, eps: f64, dt: f64, steps: usize) -> Result<VerificationReport> {
    if steps == 0 || !(dt > 0.0) || !(eps > 0.0) {
        return Err(Error::InvalidParameter("reduction check needs dt, eps > 0 and at least one step".into()));
    }
    let grid = ChartGrid::periodic_cube(2, n, 2.0 * PI)?;
    let s0 = conformal_state(grid, eps)?;
    let tensor = advance(&s0, FlowVariant::Hgf, dt, steps)?;
    let mut scalar = surface_state_from(&s0)?;
    for _ in 0..steps {
        scalar = surface_step(&scalar, dt)?;
    }
    let u_tensor = surface_state_from(&tensor)?.u;
    let rel = u_tensor.sub(&scalar.u)?.max_abs() / scalar.u.max_abs();
    let agreement = single(SURFACE_AGREEMENT, grid.min_spacing(), dt, rel)?;

    let mut wave = ResidualSeries::new(LINEAR_WAVE);
    let amplitudes: Vec<f64> = [4.0, 2.0, 1.0].iter().map(|k| k * eps).collect();
    for &a in &amplitudes {
        let u = Field::from_fn(grid, Rank::SCALAR, move |x, b| b[0] = 1.0 + a * libm::cos(x[0]));
        let mut s = SurfaceState { t: 0.0, u, ut: Field::zeros(grid, Rank::SCALAR) };
        for _ in 0..steps {
            s = surface_step(&s, dt)?;
        }
        let t = s.t;
        let lin = Field::from_fn(grid, Rank::SCALAR, move |x, b| {
            b[0] = 1.0 + a * libm::cos(x[0]) * libm::cos(t);
        });
        let e = s.u.sub(&lin)?;
        // the refinement variable here is the amplitude
        wave.push(ResidualEntry { spacing: a, dt: Some(dt), max: e.max_abs(), rms: e.rms_on(&grid.full_region()) })?;
    }

    let mut report = VerificationReport::default();
    report.push(judge(
        agreement,
        Expectation::ClosedForm { tolerance: RELATIVE_TOLERANCE },
        Strictness::Oracle,
        "relative difference in u",
    ));
    report.push(judge(
        wave,
        Expectation::Converges { order: 2.0, tolerance: 10.0 * eps * eps },
        Strictness::Oracle,
        "spacing column is the amplitude",
    ));
    report.sort();
    Ok(report)
}
