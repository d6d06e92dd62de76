//! Time integration of the second-order flows on torus charts.
//!
//! The state `(g, h = ∂_t g)` is advanced as a first-order system with the
//! classical four-stage Runge–Kutta scheme.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::diagnostics::ricci_sup_norm;
use crate::error::{Error, Result};
use crate::field::{Field, Rank};
use crate::grid::ChartGrid;
use crate::linalg;
use crate::tensor::{CurvatureBundle, MetricField, VelocityField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowVariant {
    /// `∂²_t g = −2 Ric`.
    Hgf,
    /// `∂²_t g_ij = −2 Ric_ij − ½ g^pq h_ij h_pq + g^pq h_ip h_jq`.
    EinsteinHgf,
    /// The dissipative flow with damping constant `d > 0`.
    DissipativeHgf { d: f64 },
    /// Surfaces with `g = u δ`, evolved through `u_tt = Δ log u`.
    Surface2D,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub g: MetricField,
    pub h: VelocityField,
    pub step_count: usize,
}

impl FlowState {
    pub fn new(g: MetricField, h: VelocityField) -> Result<Self> {
        if !g.field().grid().same_layout(h.field().grid()) {
            return Err(Error::ShapeMismatch("metric and velocity live on different grids".into()));
        }
        Ok(FlowState { t: 0.0, g, h, step_count: 0 })
    }

    pub fn grid(&self) -> &ChartGrid {
        self.g.field().grid()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub cfl_factor: f64,
    pub dt_max: f64,
    pub t_end: f64,
    pub snapshot_stride: usize,
    /// Steps shorter than this end the run with `StepUnderflow`.
    pub dt_min: f64,
    /// Use this step instead of the CFL estimate (the last step is still
    /// shortened to land on `t_end`).
    pub fixed_dt: Option<f64>,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            cfl_factor: 0.25,
            dt_max: f64::INFINITY,
            t_end: 1.0,
            snapshot_stride: 1,
            dt_min: 1e-12,
            fixed_dt: None,
        }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_factor > 0.0 && self.cfl_factor <= 1.0) {
            return Err(Error::InvalidParameter(format!("cfl_factor {} not in (0, 1]", self.cfl_factor)));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::InvalidParameter(format!("t_end {} must be positive", self.t_end)));
        }
        if !(self.dt_max > 0.0) || !(self.dt_min >= 0.0) {
            return Err(Error::InvalidParameter("dt_max must be positive and dt_min non-negative".into()));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::InvalidParameter("snapshot_stride must be at least 1".into()));
        }
        if let Some(dt) = self.fixed_dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(Error::InvalidParameter(format!("fixed_dt {dt} must be positive")));
            }
        }
        Ok(())
    }
}

/// `−2 Ric(g)`.
pub fn hgf_rhs(g: &MetricField) -> Result<Field> {
    let b = CurvatureBundle::compute(g)?;
    Ok(b.ricci.scaled(-2.0))
}

/// Builds `−2 Ric + extra(g, g⁻¹, h)` pointwise.
fn with_quadratic_terms<F>(g: &MetricField, h: &VelocityField, extra: F) -> Result<Field>
where
    F: Fn(usize, &[f64], &[f64], &[f64], &mut [f64]) + Sync + Send,
{
    let b = CurvatureBundle::compute(g)?;
    let n = g.dim();
    let ric = &b.ricci;
    let gi = &b.ginv;
    let gf = g.field();
    let hf = h.field();
    let mut out = Field::from_points(*gf.grid(), Rank::cov(2), ric.region(), |p, o| {
        for (o, r) in o.iter_mut().zip(ric.at(p)) {
            *o = -2.0 * r;
        }
        extra(n, gf.at(p), gi.at(p), hf.at(p), o);
    })?;
    out.symmetrize2();
    Ok(out)
}

fn trace_h(n: usize, gi: &[f64], h: &[f64]) -> f64 {
    (0..n * n).map(|c| gi[c] * h[c]).sum()
}

/// `(g^pq h_ip h_jq)_ij`.
fn h_squared(n: usize, gi: &[f64], h: &[f64]) -> [f64; 9] {
    let mut out = [0.0f64; 9];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for p in 0..n {
                for q in 0..n {
                    s += gi[p * n + q] * h[i * n + p] * h[j * n + q];
                }
            }
            out[i * n + j] = s;
        }
    }
    out
}

/// Einstein's flow: `−2 Ric − ½ (g^pq h_pq) h_ij + g^pq h_ip h_jq`.
pub fn einstein_hgf_rhs(g: &MetricField, h: &VelocityField) -> Result<Field> {
    with_quadratic_terms(g, h, |n, _, gi, hv, o| {
        let tr = trace_h(n, gi, hv);
        let hh = h_squared(n, gi, hv);
        for c in 0..n * n {
            o[c] += -0.5 * tr * hv[c] + hh[c];
        }
    })
}

/// Dissipative flow:
/// `−2 Ric + 2 g^pq h_ip h_jq − (d + 2 g^pq h_pq) h_ij
///  + ((g^pq h_pq)² + ∂_t g^pq h_pq) g_ij / (n − 1)`
/// with `∂_t g^pq = −g^pa g^qb h_ab`.
pub fn dissipative_hgf_rhs(g: &MetricField, h: &VelocityField, d: f64) -> Result<Field> {
    if !(d > 0.0) {
        return Err(Error::InvalidParameter(format!("damping constant {d} must be positive")));
    }
    if g.dim() < 2 {
        return Err(Error::InvalidParameter("dissipative flow needs dimension at least 2".into()));
    }
    with_quadratic_terms(g, h, move |n, gv, gi, hv, o| {
        let tr = trace_h(n, gi, hv);
        let hh = h_squared(n, gi, hv);
        // ∂_t g^pq h_pq = −g^pa g^qb h_ab h_pq = −tr((g⁻¹h)²)
        let mut dinv_h = 0.0;
        for c in 0..n * n {
            let (p, q) = (c / n, c % n);
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    s += gi[p * n + a] * gi[q * n + b] * hv[a * n + b];
                }
            }
            dinv_h -= s * hv[p * n + q];
        }
        let conf = (tr * tr + dinv_h) / (n as f64 - 1.0);
        for c in 0..n * n {
            o[c] += 2.0 * hh[c] - (d + 2.0 * tr) * hv[c] + conf * gv[c];
        }
    })
}

/// `Δ log u` with the flat coordinate Laplacian, for a positive scalar `u` on
/// a 2D grid.
pub fn surface_rhs(u: &Field) -> Result<Field> {
    if u.rank() != Rank::SCALAR || u.dim() != 2 {
        return Err(Error::ShapeMismatch("surface flow needs a scalar on a 2D grid".into()));
    }
    if let Some(p) = u.data().iter().position(|v| !(*v > 0.0)) {
        return Err(Error::NonPositiveConformalFactor(p));
    }
    let mut logu = u.clone();
    for v in logu.data_mut() {
        *v = libm::log(*v);
    }
    logu.partial(0, 2)?.add(&logu.partial(1, 2)?)
}

/// `(Δ log u) δ_ij` for `g = u δ`; rejects metrics that are not exactly of that form.
fn surface_tensor_rhs(g: &MetricField) -> Result<Field> {
    let gf = g.field();
    if g.dim() != 2 {
        return Err(Error::InvalidParameter("surface flow is two-dimensional".into()));
    }
    let mut u = Field::zeros(*gf.grid(), Rank::SCALAR);
    for p in 0..gf.grid().num_points() {
        let b = gf.at(p);
        if b[1] != 0.0 || b[0] != b[3] {
            return Err(Error::InvalidParameter(format!(
                "metric is not conformally flat in these coordinates at point {p}"
            )));
        }
        u.at_mut(p)[0] = b[0];
    }
    let lap = surface_rhs(&u)?;
    Field::from_points(*gf.grid(), Rank::cov(2), lap.region(), |p, o| {
        let l = lap.at(p)[0];
        o[0] = l;
        o[3] = l;
    })
}

/// Acceleration `∂²_t g` for the chosen variant.
pub fn acceleration(variant: FlowVariant, g: &MetricField, h: &VelocityField) -> Result<Field> {
    match variant {
        FlowVariant::Hgf => hgf_rhs(g),
        FlowVariant::EinsteinHgf => einstein_hgf_rhs(g, h),
        FlowVariant::DissipativeHgf { d } => dissipative_hgf_rhs(g, h, d),
        FlowVariant::Surface2D => surface_tensor_rhs(g),
    }
}

/// `cfl · min_x (min spacing) / sqrt(λ_max(g^ij))`, capped by `dt_max`.
pub fn cfl_dt(g: &MetricField, control: &StepControl) -> Result<f64> {
    let f = g.field();
    let n = f.dim();
    let mut lam_min = f64::INFINITY;
    for p in 0..f.grid().num_points() {
        let (lo, _) = linalg::sym_eig_extremes(n, f.at(p));
        if !(lo > g.spd_floor()) {
            return Err(Error::MetricDegenerate { point: p, min_eigenvalue: lo });
        }
        lam_min = lam_min.min(lo);
    }
    // λ_max(g⁻¹) = 1 / λ_min(g)
    let dt = control.cfl_factor * f.grid().min_spacing() * libm::sqrt(lam_min);
    Ok(dt.min(control.dt_max))
}

fn blow_up(t: f64, e: Error) -> Error {
    match e {
        Error::MetricDegenerate { point, min_eigenvalue } => Error::BlowUpDetected {
            t,
            point: Some(point),
            reason: format!("metric lost positivity (min eigenvalue {min_eigenvalue:e})"),
        },
        Error::NonPositiveConformalFactor(p) => Error::BlowUpDetected {
            t,
            point: Some(p),
            reason: "conformal factor reached zero".into(),
        },
        other => other,
    }
}

fn admissible(t: f64, g: Field, floor: f64) -> Result<MetricField> {
    if let Some(p) = g.first_non_finite() {
        return Err(Error::BlowUpDetected { t, point: Some(p), reason: "non-finite metric".into() });
    }
    MetricField::new(g, floor).map_err(|e| blow_up(t, e))
}

fn symmetric(mut f: Field) -> Field {
    f.symmetrize2();
    f
}

/// One classical Runge–Kutta step of `(g' = h, h' = a(g, h))`.
pub fn step(state: &FlowState, variant: FlowVariant, dt: f64) -> Result<FlowState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::StepUnderflow { t: state.t, dt });
    }
    if !state.grid().is_periodic() {
        return Err(Error::InvalidGrid("time integration needs a periodic chart".into()));
    }
    let floor = state.g.spd_floor();
    let t = state.t;
    let g0 = state.g.field();
    let h0 = state.h.field();
    let accel = |g: &MetricField, h: &VelocityField, ts: f64| {
        acceleration(variant, g, h).map_err(|e| blow_up(ts, e))
    };
    let stage = |c: f64, kg: &Field, kh: &Field, ts: f64| -> Result<(MetricField, VelocityField)> {
        let g = admissible(ts, symmetric(g0.lincomb(1.0, kg, c * dt)?), floor)?;
        let h = VelocityField::new(symmetric(h0.lincomb(1.0, kh, c * dt)?))?;
        Ok((g, h))
    };
    let a1 = accel(&state.g, &state.h, t)?;
    let (g2, h2) = stage(0.5, h0, &a1, t + 0.5 * dt)?;
    let a2 = accel(&g2, &h2, t + 0.5 * dt)?;
    let (g3, h3) = stage(0.5, h2.field(), &a2, t + 0.5 * dt)?;
    let a3 = accel(&g3, &h3, t + 0.5 * dt)?;
    let (g4, h4) = stage(1.0, h3.field(), &a3, t + dt)?;
    let a4 = accel(&g4, &h4, t + dt)?;

    let w = dt / 6.0;
    let mut g = g0.clone();
    let mut h = h0.clone();
    for (kg, kh, c) in [
        (h0, &a1, w),
        (h2.field(), &a2, 2.0 * w),
        (h3.field(), &a3, 2.0 * w),
        (h4.field(), &a4, w),
    ] {
        g.axpy(c, kg)?;
        h.axpy(c, kh)?;
    }
    let t_new = t + dt;
    if let Some(p) = h.first_non_finite() {
        return Err(Error::BlowUpDetected { t: t_new, point: Some(p), reason: "non-finite velocity".into() });
    }
    let g = admissible(t_new, symmetric(g), floor)?;
    let h = VelocityField::new(symmetric(h))?;
    Ok(FlowState { t: t_new, g, h, step_count: state.step_count + 1 })
}

#[derive(Debug, Clone, PartialEq)]
pub enum TerminationReason {
    Completed,
    BlowUpDetected { t: f64, point: Option<usize>, reason: String },
    StepUnderflow { t: f64, dt: f64 },
}

/// Per-snapshot summary values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotDiagnostics {
    pub ricci_sup: f64,
    pub scalar_min: f64,
    pub scalar_max: f64,
    pub metric_min_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub g: MetricField,
    pub h: VelocityField,
    pub curvature: CurvatureBundle,
    pub diagnostics: SnapshotDiagnostics,
}

impl Snapshot {
    pub fn capture(state: &FlowState) -> Result<Self> {
        let curvature = CurvatureBundle::compute(&state.g)?;
        let ricci_sup = ricci_sup_norm(&curvature)?;
        let s = &curvature.scalar;
        let region = s.region();
        let mut scalar_min = f64::INFINITY;
        let mut scalar_max = f64::NEG_INFINITY;
        for idx in region.iter() {
            let v = s.at(s.grid().linear_index(idx))[0];
            scalar_min = scalar_min.min(v);
            scalar_max = scalar_max.max(v);
        }
        let f = state.g.field();
        let n = f.dim();
        let metric_min_eigenvalue = (0..f.grid().num_points())
            .map(|p| linalg::sym_eig_extremes(n, f.at(p)).0)
            .fold(f64::INFINITY, f64::min);
        Ok(Snapshot {
            step: state.step_count,
            t: state.t,
            g: state.g.clone(),
            h: state.h.clone(),
            curvature,
            diagnostics: SnapshotDiagnostics { ricci_sup, scalar_min, scalar_max, metric_min_eigenvalue },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub termination: TerminationReason,
    pub final_state: FlowState,
}

/// Integrates to `control.t_end`, collecting every `snapshot_stride`-th state
/// (plus the initial and final ones).
pub fn simulate(initial: FlowState, variant: FlowVariant, control: &StepControl) -> Result<Trajectory> {
    let mut snapshots = Vec::new();
    let (termination, final_state) = simulate_observed(initial, variant, control, |s| {
        snapshots.push(s.clone());
        Ok(())
    })?;
    Ok(Trajectory { snapshots, termination, final_state })
}

/// Like [`simulate`] but hands each snapshot to `observer` instead of
/// keeping it.
pub fn simulate_observed<F>(
    initial: FlowState,
    variant: FlowVariant,
    control: &StepControl,
    mut observer: F,
) -> Result<(TerminationReason, FlowState)>
where
    F: FnMut(&Snapshot) -> Result<()>,
{
    control.validate()?;
    if !initial.grid().is_periodic() {
        return Err(Error::InvalidGrid("time integration needs a periodic chart".into()));
    }
    if let FlowVariant::DissipativeHgf { d } = variant {
        if !(d > 0.0) {
            return Err(Error::InvalidParameter(format!("damping constant {d} must be positive")));
        }
    }
    let mut state = initial;
    observer(&Snapshot::capture(&state)?)?;
    let mut last_emitted = state.step_count;
    // tolerance for landing on t_end
    let eps = 1e-12 * control.t_end.max(1.0);
    let termination = loop {
        if state.t >= control.t_end - eps {
            break TerminationReason::Completed;
        }
        let nominal = match control.fixed_dt {
            Some(dt) => dt,
            None => match cfl_dt(&state.g, control) {
                Ok(dt) => dt,
                Err(Error::MetricDegenerate { point, .. }) => {
                    break TerminationReason::BlowUpDetected {
                        t: state.t,
                        point: Some(point),
                        reason: "metric lost positivity".into(),
                    }
                }
                Err(e) => return Err(e),
            },
        };
        if !(nominal >= control.dt_min) {
            break TerminationReason::StepUnderflow { t: state.t, dt: nominal };
        }
        let remaining = control.t_end - state.t;
        let dt = if nominal >= remaining - eps { remaining } else { nominal };
        match step(&state, variant, dt) {
            Ok(next) => state = next,
            Err(Error::BlowUpDetected { t, point, reason }) => {
                break TerminationReason::BlowUpDetected { t, point, reason }
            }
            Err(Error::StepUnderflow { t, dt }) => break TerminationReason::StepUnderflow { t, dt },
            Err(e) => return Err(e),
        }
        if state.step_count.is_multiple_of(control.snapshot_stride) {
            observer(&Snapshot::capture(&state)?)?;
            last_emitted = state.step_count;
        }
    };
    if last_emitted != state.step_count {
        observer(&Snapshot::capture(&state)?)?;
    }
    Ok((termination, state))
}

/// Scalar state of the surface equation `u_tt = Δ log u`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceState {
    pub t: f64,
    pub u: Field,
    pub ut: Field,
}

/// One Runge–Kutta step of `(u' = u_t, u_t' = Δ log u)`.
pub fn surface_step(state: &SurfaceState, dt: f64) -> Result<SurfaceState> {
    if !(dt > 0.0) {
        return Err(Error::StepUnderflow { t: state.t, dt });
    }
    let (u0, v0) = (&state.u, &state.ut);
    let a1 = surface_rhs(u0)?;
    let u2 = u0.lincomb(1.0, v0, 0.5 * dt)?;
    let v2 = v0.lincomb(1.0, &a1, 0.5 * dt)?;
    let a2 = surface_rhs(&u2)?;
    let u3 = u0.lincomb(1.0, &v2, 0.5 * dt)?;
    let v3 = v0.lincomb(1.0, &a2, 0.5 * dt)?;
    let a3 = surface_rhs(&u3)?;
    let u4 = u0.lincomb(1.0, &v3, dt)?;
    let v4 = v0.lincomb(1.0, &a3, dt)?;
    let a4 = surface_rhs(&u4)?;
    let w = dt / 6.0;
    let mut u = u0.clone();
    let mut ut = v0.clone();
    for (ku, kv, c) in [(v0, &a1, w), (&v2, &a2, 2.0 * w), (&v3, &a3, 2.0 * w), (&v4, &a4, w)] {
        u.axpy(c, ku)?;
        ut.axpy(c, kv)?;
    }
    Ok(SurfaceState { t: state.t + dt, u, ut })
}

/// Splits `g = u δ`, `h = u_t δ` into the scalar surface state.
pub fn surface_state_from(state: &FlowState) -> Result<SurfaceState> {
    let g = state.g.field();
    if g.dim() != 2 {
        return Err(Error::InvalidParameter("surface flow is two-dimensional".into()));
    }
    let mut u = Field::zeros(*g.grid(), Rank::SCALAR);
    let mut ut = Field::zeros(*g.grid(), Rank::SCALAR);
    for p in 0..g.grid().num_points() {
        let (gb, hb) = (g.at(p), state.h.field().at(p));
        if gb[1] != 0.0 || gb[0] != gb[3] || hb[1] != 0.0 || hb[0] != hb[3] {
            return Err(Error::InvalidParameter(format!("state is not conformally flat at point {p}")));
        }
        u.at_mut(p)[0] = gb[0];
        ut.at_mut(p)[0] = hb[0];
    }
    Ok(SurfaceState { t: state.t, u, ut })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{default_grid, instantiate, MetricPreset};
    use core::f64::consts::PI;

    fn flat(dim: usize, n: usize) -> MetricField {
        let grid = default_grid(&MetricPreset::Flat, dim, n).unwrap();
        instantiate(&MetricPreset::Flat, &grid, 0.0).unwrap().0
    }

    fn random_state(n: usize, eps: f64) -> FlowState {
        let p = MetricPreset::RandomSmooth { epsilon: eps, seed: 7 };
        let grid = default_grid(&p, 2, n).unwrap();
        let (g, h) = instantiate(&p, &grid, 0.0).unwrap();
        FlowState::new(g, h).unwrap()
    }

    fn rel_diff(a: &Field, b: &Field) -> f64 {
        a.sub(b).unwrap().max_abs() / b.max_abs()
    }

    #[test]
    fn flat_torus_is_stationary() {
        let g = flat(3, 8);
        let s0 = FlowState::new(g.clone(), VelocityField::zeros_like(&g)).unwrap();
        let s1 = step(&s0, FlowVariant::Hgf, 0.1).unwrap();
        assert_eq!(s1.g, s0.g);
        assert_eq!(s1.h, s0.h);
        assert_eq!((s1.t, s1.step_count), (0.1, 1));
    }

    #[test]
    fn linear_flat_family_is_exact() {
        let g = flat(2, 8);
        let c = 0.3;
        let h = VelocityField::new(g.field().scaled(c)).unwrap();
        let mut s = FlowState::new(g.clone(), h).unwrap();
        for _ in 0..10 {
            s = step(&s, FlowVariant::Hgf, 0.05).unwrap();
        }
        let want = g.field().scaled(1.0 + c * s.t);
        assert!(s.g.field().sub(&want).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn cfl_formula() {
        let grid = ChartGrid::periodic_cube(2, 10, 1.0).unwrap();
        let (g, _) = instantiate(&MetricPreset::Flat, &grid, 0.0).unwrap();
        let control = StepControl { cfl_factor: 0.5, ..StepControl::default() };
        let dt = cfl_dt(&g, &control).unwrap();
        assert!((dt - 0.05).abs() < 1e-15);
        let quarter = MetricField::with_default_floor(g.field().scaled(0.25)).unwrap();
        assert!((cfl_dt(&quarter, &control).unwrap() - 0.025).abs() < 1e-15);
        let capped = StepControl { dt_max: 0.01, ..control };
        assert_eq!(cfl_dt(&g, &capped).unwrap(), 0.01);
    }

    #[test]
    fn sphere_band_acceleration() {
        let p = MetricPreset::SphereBand { radius: 1.0 };
        let grid = default_grid(&p, 2, 64).unwrap();
        let (g, h) = instantiate(&p, &grid, 0.0).unwrap();
        for v in [FlowVariant::Hgf, FlowVariant::DissipativeHgf { d: 1.0 }, FlowVariant::EinsteinHgf] {
            let a = acceleration(v, &g, &h).unwrap();
            let want = g.field().scaled(-2.0);
            for idx in a.region().iter() {
                let q = grid.linear_index(idx);
                for (x, y) in a.at(q).iter().zip(want.at(q)) {
                    assert!((x - y).abs() < 2e-3);
                }
            }
        }
    }

    // direct index loops over the definitions, used as the oracle
    fn brute_extra(n: usize, g: &[f64], h: &[f64], d: Option<f64>) -> [f64; 9] {
        let mut gi = [0.0; 9];
        assert!(linalg::invert(n, g, &mut gi));
        let mut tr = 0.0;
        for p in 0..n {
            for q in 0..n {
                tr += gi[p * n + q] * h[p * n + q];
            }
        }
        let mut dgi = [0.0; 9];
        for p in 0..n {
            for q in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        dgi[p * n + q] -= gi[p * n + a] * gi[q * n + b] * h[a * n + b];
                    }
                }
            }
        }
        let mut dgi_h = 0.0;
        for c in 0..n * n {
            dgi_h += dgi[c] * h[c];
        }
        let mut out = [0.0; 9];
        for i in 0..n {
            for j in 0..n {
                let mut hh = 0.0;
                for p in 0..n {
                    for q in 0..n {
                        hh += gi[p * n + q] * h[i * n + p] * h[j * n + q];
                    }
                }
                out[i * n + j] = match d {
                    None => -0.5 * tr * h[i * n + j] + hh,
                    Some(d) => {
                        2.0 * hh - (d + 2.0 * tr) * h[i * n + j]
                            + (tr * tr + dgi_h) / (n as f64 - 1.0) * g[i * n + j]
                    }
                };
            }
        }
        out
    }

    #[test]
    fn quadratic_velocity_terms_match_index_loops() {
        for n in [2usize, 3] {
            let g = flat(n, 8);
            let h = VelocityField::new(g.field().clone()).unwrap();
            let e = einstein_hgf_rhs(&g, &h).unwrap();
            let dis = dissipative_hgf_rhs(&g, &h, 1.0).unwrap();
            let gb = g.field().at(0);
            let we = brute_extra(n, gb, gb, None);
            let wd = brute_extra(n, gb, gb, Some(1.0));
            for c in 0..n * n {
                assert!((e.at(0)[c] - we[c]).abs() < 1e-14);
                assert!((dis.at(0)[c] - wd[c]).abs() < 1e-14);
                // h = g: Einstein extra terms are (1 − n/2) g
                assert!((we[c] - (1.0 - n as f64 / 2.0) * gb[c]).abs() < 1e-14);
            }
            // dissipative with h = g, d = 1: 2 − (1 + 2n) + (n² − n)/(n − 1) = 1 − n... times g
            for c in 0..n * n {
                assert!((wd[c] - (1.0 - n as f64) * gb[c]).abs() < 1e-14, "n={n}");
            }
        }
        // random SPD point with a generic velocity
        let grid = ChartGrid::periodic_cube(3, 5, 1.0).unwrap();
        let gb = [2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 1.0];
        let hb = [0.4, -0.1, 0.2, -0.1, 0.3, 0.05, 0.2, 0.05, -0.6];
        let g = MetricField::with_default_floor(Field::from_fn(grid, Rank::cov(2), |_, b| b.copy_from_slice(&gb))).unwrap();
        let h = VelocityField::new(Field::from_fn(grid, Rank::cov(2), |_, b| b.copy_from_slice(&hb))).unwrap();
        let e = einstein_hgf_rhs(&g, &h).unwrap();
        let dis = dissipative_hgf_rhs(&g, &h, 0.7).unwrap();
        let we = brute_extra(3, &gb, &hb, None);
        let wd = brute_extra(3, &gb, &hb, Some(0.7));
        for c in 0..9 {
            assert!((e.at(3)[c] - we[c]).abs() < 1e-13);
            assert!((dis.at(3)[c] - wd[c]).abs() < 1e-13);
        }
    }

    #[test]
    fn variants_agree_without_velocity() {
        let s = random_state(16, 0.05);
        let s = FlowState { h: VelocityField::zeros_like(&s.g), ..s };
        let hgf = hgf_rhs(&s.g).unwrap();
        assert_eq!(einstein_hgf_rhs(&s.g, &s.h).unwrap(), hgf);
        let dt = 0.01;
        let base = step(&s, FlowVariant::Hgf, dt).unwrap();
        for v in [FlowVariant::EinsteinHgf, FlowVariant::DissipativeHgf { d: 0.5 }] {
            let other = step(&s, v, dt).unwrap();
            let diff = other.g.field().sub(base.g.field()).unwrap().max_abs();
            assert!(diff < dt * dt * hgf.max_abs(), "{v:?}: {diff}");
        }
        assert!(matches!(dissipative_hgf_rhs(&s.g, &s.h, 0.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn surface_rhs_values() {
        let grid = ChartGrid::periodic_cube(2, 32, 2.0 * PI).unwrap();
        let c = Field::from_fn(grid, Rank::SCALAR, |_, b| b[0] = 1.7);
        assert_eq!(surface_rhs(&c).unwrap().max_abs(), 0.0);
        let eps = 1e-3;
        let k = 2.0;
        let u = Field::from_fn(grid, Rank::SCALAR, |x, b| b[0] = 1.0 + eps * libm::cos(k * x[0]));
        let r = surface_rhs(&u).unwrap();
        for p in 0..grid.num_points() {
            let x = grid.coord_of(p)[0];
            let (cs, sn) = (libm::cos(k * x), libm::sin(k * x));
            let w = 1.0 + eps * cs;
            let exact = -eps * k * k * cs / w - eps * eps * k * k * sn * sn / (w * w);
            assert!((r.at(p)[0] - exact).abs() < 2e-3 * eps);
            assert!((r.at(p)[0] + eps * k * k * cs).abs() < 10.0 * eps * eps);
        }
        let bad = Field::from_fn(grid, Rank::SCALAR, |x, b| b[0] = libm::cos(x[0]));
        assert!(matches!(surface_rhs(&bad), Err(Error::NonPositiveConformalFactor(_))));
    }

    #[test]
    fn time_reversal_returns_initial_state() {
        let s0 = random_state(32, 0.05);
        let dt = 0.01;
        let mut s = s0.clone();
        for _ in 0..50 {
            s = step(&s, FlowVariant::Hgf, dt).unwrap();
        }
        s.h = VelocityField::new(s.h.field().scaled(-1.0)).unwrap();
        for _ in 0..50 {
            s = step(&s, FlowVariant::Hgf, dt).unwrap();
        }
        assert!(rel_diff(s.g.field(), s0.g.field()) < 1e-8);
        assert!(rel_diff(&s.h.field().scaled(-1.0), s0.h.field()) < 1e-8);
    }

    fn run_to(s0: &FlowState, dt: f64, steps: usize) -> Field {
        let mut s = s0.clone();
        for _ in 0..steps {
            s = step(&s, FlowVariant::Hgf, dt).unwrap();
        }
        s.g.into_field()
    }

    #[test]
    fn fourth_order_in_time() {
        let s0 = random_state(16, 0.05);
        let dt = 0.1;
        let reference = run_to(&s0, dt / 4.0, 40);
        let e1 = run_to(&s0, dt, 10).sub(&reference).unwrap().max_abs();
        let e2 = run_to(&s0, dt / 2.0, 20).sub(&reference).unwrap().max_abs();
        assert!(libm::log2(e1 / e2) > 3.7, "{e1} {e2}");
    }

    #[test]
    fn degenerating_family_stops_near_singular_time() {
        let g = flat(2, 8);
        let c = 2.0;
        let h = VelocityField::new(g.field().scaled(-c)).unwrap();
        let control = StepControl { t_end: 10.0, ..StepControl::default() };
        let traj = simulate(FlowState::new(g, h).unwrap(), FlowVariant::Hgf, &control).unwrap();
        let last_dt = {
            let n = traj.snapshots.len();
            traj.snapshots[n - 1].t - traj.snapshots[n - 2].t
        };
        match traj.termination {
            TerminationReason::BlowUpDetected { t, .. } => {
                assert!((t - 1.0 / c).abs() <= 2.0 * last_dt.max(1e-12), "{t}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn damping_reduces_velocity() {
        let g = flat(2, 8);
        let h = VelocityField::new(g.field().scaled(0.1)).unwrap();
        let mut s = FlowState::new(g, h).unwrap();
        let mut last = s.h.field().max_abs();
        for _ in 0..10 {
            s = step(&s, FlowVariant::DissipativeHgf { d: 1.0 }, 0.05).unwrap();
            let now = s.h.field().max_abs();
            assert!(now <= last);
            last = now;
        }
    }

    #[test]
    fn simulate_flat_completes_with_zero_curvature() {
        let g = flat(2, 8);
        let s = FlowState::new(g.clone(), VelocityField::zeros_like(&g)).unwrap();
        let control = StepControl { t_end: 10.0, snapshot_stride: 50, ..StepControl::default() };
        let traj = simulate(s, FlowVariant::Hgf, &control).unwrap();
        assert_eq!(traj.termination, TerminationReason::Completed);
        assert!((traj.final_state.t - 10.0).abs() < 1e-12);
        assert!(traj.snapshots.iter().all(|s| s.diagnostics.ricci_sup == 0.0));
    }

    #[test]
    fn patch_charts_are_rejected() {
        let p = MetricPreset::SphereBand { radius: 1.0 };
        let grid = default_grid(&p, 2, 32).unwrap();
        let (g, h) = instantiate(&p, &grid, 0.0).unwrap();
        let s = FlowState::new(g, h).unwrap();
        assert!(matches!(step(&s, FlowVariant::Hgf, 0.01), Err(Error::InvalidGrid(_))));
    }

    fn conformal_state(n: usize, eps: f64) -> FlowState {
        let grid = ChartGrid::periodic_cube(2, n, 2.0 * PI).unwrap();
        let g = Field::from_fn(grid, Rank::cov(2), |x, b| {
            let u = 1.0 + eps * libm::cos(x[0]) + 0.5 * eps * libm::sin(x[1]);
            b[0] = u;
            b[3] = u;
        });
        let g = MetricField::with_default_floor(g).unwrap();
        FlowState::new(g.clone(), VelocityField::zeros_like(&g)).unwrap()
    }

    #[test]
    fn surface_paths_agree() {
        let s0 = conformal_state(32, 1e-3);
        let dt = 0.02;
        let mut tensor = s0.clone();
        let mut surf = s0.clone();
        let mut scalar = surface_state_from(&s0).unwrap();
        for _ in 0..20 {
            tensor = step(&tensor, FlowVariant::Hgf, dt).unwrap();
            surf = step(&surf, FlowVariant::Surface2D, dt).unwrap();
            scalar = surface_step(&scalar, dt).unwrap();
        }
        let from_surf = surface_state_from(&surf).unwrap();
        assert_eq!(from_surf.u, scalar.u);
        let from_tensor = surface_state_from(&tensor).unwrap();
        assert!(rel_diff(&from_tensor.u, &scalar.u) < 1e-8);
    }

    #[test]
    fn small_amplitude_surface_is_a_linear_wave() {
        let eps = 1e-3;
        let grid = ChartGrid::periodic_cube(2, 32, 2.0 * PI).unwrap();
        let u = Field::from_fn(grid, Rank::SCALAR, |x, b| b[0] = 1.0 + eps * libm::cos(x[0]));
        let mut s = SurfaceState { t: 0.0, u, ut: Field::zeros(grid, Rank::SCALAR) };
        for _ in 0..50 {
            s = surface_step(&s, 0.02).unwrap();
        }
        let t = s.t;
        let lin = Field::from_fn(grid, Rank::SCALAR, |x, b| b[0] = 1.0 + eps * libm::cos(x[0]) * libm::cos(t));
        assert!(s.u.sub(&lin).unwrap().max_abs() < 10.0 * eps * eps);
    }
}
