//! Command execution. Every command writes `<command>.ndjson` into the output
//! directory; its first record names the format and the run.

use std::cell::RefCell;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use hgf_core::diagnostics::{
    blowup_monitor, pinching_ratio, ricci_sup_norm, BlowUpFit, BlowUpStatus, PinchingSample, PlaneSampling, RunEnd,
};
use hgf_core::flow::{simulate_observed, FlowState, Snapshot, TerminationReason};
use hgf_core::presets::{default_grid, instantiate};
use hgf_core::tensor::CurvatureBundle;
use hgf_core::verify::{
    check_evolution_ladder, check_family_evolution, check_integrator, check_static_identities,
    check_surface_reduction, conformal_residual, Assembly, Order, ReportEntry, Status, VerificationReport,
};
use serde_json::{json, Value};

use crate::config::{Check, Command, DiagnoseSource, RunConfig};
use crate::format::{write_columns, Ndjson, SnapshotWriter, FORMAT_VERSION};
use crate::CliError;

pub const RECORD_FORMAT: &str = "hgf-records";

/// Result of a finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// Process exit status: 0 when nothing failed.
    pub status: u8,
    pub summary: String,
}

pub fn error_kind(e: &hgf_core::Error) -> &'static str {
    use hgf_core::Error as E;
    match e {
        E::InvalidGrid(_) => "InvalidGrid",
        E::RegionExhausted => "RegionExhausted",
        E::MetricDegenerate { .. } => "MetricDegenerate",
        E::DegeneratePlane(_) => "DegeneratePlane",
        E::NonPositiveConformalFactor(_) => "NonPositiveConformalFactor",
        E::BlowUpDetected { .. } => "BlowUpDetected",
        E::StepUnderflow { .. } => "StepUnderflow",
        E::InsufficientSnapshots { .. } => "InsufficientSnapshots",
        E::DegenerateSeries => "DegenerateSeries",
        E::ShapeMismatch(_) => "ShapeMismatch",
        E::InvalidParameter(_) => "InvalidParameter",
    }
}

/// Validates `config`, runs it and writes all artifacts. Numerical failures
/// are recorded in the output and reported as status 1.
pub fn run(config: &RunConfig) -> Result<Outcome, CliError> {
    config.validate()?;
    let out = config.out_dir();
    fs::create_dir_all(&out)?;
    let mut records = Ndjson::default();
    records.push(&json!({
        "record": "run",
        "format": RECORD_FORMAT,
        "version": FORMAT_VERSION,
        "command": config.command.name(),
        "preset": config.preset.name(),
        "dim": config.grid.dim,
        "n": config.grid.n,
        "seed": config.seed,
    }));
    let result = match config.command {
        Command::Simulate => simulate(config, &out, &mut records),
        Command::Verify => verify(config, &out, &mut records),
        Command::Oracle => oracle(config, &out, &mut records),
        Command::Diagnose => diagnose(config, &out, &mut records),
    };
    let outcome = match result {
        Ok(o) => o,
        Err(CliError::Numerical(e)) => {
            records.push(&json!({ "record": "error", "kind": error_kind(&e), "message": e.to_string() }));
            Outcome { status: 1, summary: format!("numerical failure: {e}\n") }
        }
        Err(e) => return Err(e),
    };
    records.write_to(&out.join(format!("{}.ndjson", config.command.name())))?;
    Ok(outcome)
}

fn termination_record(t: &TerminationReason, final_t: f64) -> Value {
    match t {
        TerminationReason::Completed => json!({ "record": "termination", "reason": "Completed", "t": final_t }),
        TerminationReason::BlowUpDetected { t, point, reason } => json!({
            "record": "termination", "reason": "BlowUpDetected", "t": t, "point": point, "detail": reason,
        }),
        TerminationReason::StepUnderflow { t, dt } => {
            json!({ "record": "termination", "reason": "StepUnderflow", "t": t, "dt": dt })
        }
    }
}

/// Runs the configured flow, handing every snapshot to `each`. Output errors
/// raised inside the observer are carried out separately.
fn run_flow<F>(config: &RunConfig, mut each: F) -> Result<(TerminationReason, FlowState), CliError>
where
    F: FnMut(&Snapshot) -> Result<(), CliError>,
{
    let preset = config.preset.to_preset(config.seed);
    let grid = default_grid(&preset, config.grid.dim, config.grid.n)?;
    let (g, h) = instantiate(&preset, &grid, 0.0)?;
    let variant = config.flow.to_variant()?;
    let failure = RefCell::new(None);
    let res = simulate_observed(FlowState::new(g, h)?, variant, &config.step.to_control(), |s| {
        each(s).map_err(|e| {
            *failure.borrow_mut() = Some(e);
            hgf_core::Error::InvalidParameter("observer failed".into())
        })
    });
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(res?)
}

fn simulate(config: &RunConfig, out: &Path, records: &mut Ndjson) -> Result<Outcome, CliError> {
    let mut writer = SnapshotWriter::create(&out.join("snapshots"))?;
    let mut sup = Vec::new();
    let (termination, last) = run_flow(config, |s| {
        writer.write(s)?;
        let d = &s.diagnostics;
        records.push(&json!({
            "record": "snapshot",
            "step": s.step,
            "t": s.t,
            "ricci_sup": d.ricci_sup,
            "scalar_min": d.scalar_min,
            "scalar_max": d.scalar_max,
            "metric_min_eigenvalue": d.metric_min_eigenvalue,
            "file": crate::format::snapshot_name(s.step),
        }));
        sup.push(vec![s.t, d.ricci_sup]);
        Ok(())
    })?;
    writer.finish()?;
    write_columns(&out.join("ricci_sup.dat"), &["t", "ricci_sup"], &sup)?;
    records.push(&termination_record(&termination, last.t));
    let status = if termination == TerminationReason::Completed { 0 } else { 1 };
    Ok(Outcome {
        status,
        summary: format!("{} snapshots, {:?} at t = {}\n", sup.len(), termination, last.t),
    })
}

fn order_value(o: &Option<Order>) -> Value {
    match o {
        Some(Order::Value(v)) => json!(v),
        Some(Order::Saturated) => json!("saturated"),
        None => Value::Null,
    }
}

fn identity_record(check: &str, dim: usize, resolutions: &[usize], e: &ReportEntry) -> Value {
    let residuals: Vec<Value> = e
        .series
        .entries
        .iter()
        .map(|r| json!({ "spacing": r.spacing, "dt": r.dt, "max": r.max, "rms": r.rms }))
        .collect();
    json!({
        "record": "identity",
        "check": check,
        "dim": dim,
        "id": e.identity,
        "status": e.status.label(),
        "order": order_value(&e.order),
        "resolutions": resolutions,
        "residuals": residuals,
        "notes": e.notes,
    })
}

#[derive(Default)]
struct Tally {
    counts: [usize; 3],
    text: String,
}

impl Tally {
    fn emit(
        &mut self,
        records: &mut Ndjson,
        out: &Path,
        check: &str,
        dim: usize,
        resolutions: &[usize],
        report: &VerificationReport,
    ) -> io::Result<()> {
        for e in &report.entries {
            records.push(&identity_record(check, dim, resolutions, e));
            let rows: Vec<Vec<f64>> = e.series.entries.iter().map(|r| vec![r.spacing, r.max]).collect();
            let file = out.join("series").join(format!("d{dim}")).join(format!("{}.dat", e.identity));
            write_columns(&file, &["spacing", "max_residual"], &rows)?;
            self.counts[match e.status {
                Status::Pass => 0,
                Status::Flag => 1,
                Status::Fail => 2,
            }] += 1;
        }
        writeln!(self.text, "[{check}, dim {dim}]").unwrap();
        self.text.push_str(&report.summary());
        Ok(())
    }

    fn finish(self, records: &mut Ndjson, out: &Path) -> io::Result<Outcome> {
        let [pass, flag, fail] = self.counts;
        records.push(&json!({ "record": "summary", "pass": pass, "flag": flag, "fail": fail }));
        let mut text = self.text;
        writeln!(text, "PASS {pass}  FLAG {flag}  FAIL {fail}").unwrap();
        fs::write(out.join("report.txt"), &text)?;
        Ok(Outcome { status: u8::from(fail > 0), summary: text })
    }
}

fn verify(config: &RunConfig, out: &Path, records: &mut Ndjson) -> Result<Outcome, CliError> {
    let spec = config.verify.as_ref().expect("validated");
    let preset = config.preset.to_preset(config.seed);
    let asm = Assembly::default();
    let mut ladder = spec.ladder.clone();
    ladder.sort_unstable();
    let mut tally = Tally::default();
    for dim in config.dims() {
        let mut dynamic: Option<VerificationReport> = None;
        for &check in &spec.checks {
            let (report, resolutions) = match check {
                Check::Static => (check_static_identities(&preset, dim, &ladder, &asm)?, ladder.clone()),
                Check::Local | Check::Global | Check::Connection => {
                    if dynamic.is_none() {
                        dynamic = Some(check_evolution_ladder(&preset, dim, &spec.dynamic_ladder(), &asm)?);
                    }
                    let prefix = format!("{}.", check.name());
                    let mut sub = VerificationReport::default();
                    for e in &dynamic.as_ref().unwrap().entries {
                        if e.identity.starts_with(&prefix) {
                            sub.push(e.clone());
                        }
                    }
                    (sub, ladder.clone())
                }
                Check::Family => (check_family_evolution(&preset, dim, &ladder, spec.family_time)?, ladder.clone()),
                Check::Integrator => {
                    (check_integrator(&preset, dim, config.grid.n, spec.dt, spec.steps)?, vec![config.grid.n])
                }
                Check::Reduction => {
                    if dim != 2 {
                        continue;
                    }
                    (check_surface_reduction(config.grid.n, spec.amplitude, spec.dt, spec.steps)?, vec![config.grid.n])
                }
            };
            tally.emit(records, out, check.name(), dim, &resolutions, &report)?;
        }
    }
    Ok(tally.finish(records, out)?)
}

fn oracle(config: &RunConfig, out: &Path, records: &mut Ndjson) -> Result<Outcome, CliError> {
    let spec = config.oracle.as_ref().expect("validated");
    let preset = config.preset.to_preset(config.seed);
    let mut ladder = spec.ladder.clone();
    ladder.sort_unstable();
    let mut tally = Tally::default();
    let dim = config.grid.dim;
    let report = conformal_residual(&preset, dim, &ladder, &spec.times)?;
    let mut by_time = Vec::new();
    for &t in &spec.times {
        let (id, _) = hgf_core::verify::conformal::family_ids(t);
        if let Some(fin) = report.get(&id).and_then(|e| e.series.finest()) {
            by_time.push(vec![t, fin.max]);
        }
    }
    write_columns(&out.join("residual_vs_time.dat"), &["t", "finest_flow_residual"], &by_time)?;
    tally.emit(records, out, "conformal", dim, &ladder, &report)?;
    Ok(tally.finish(records, out)?)
}

fn sample_record(t: f64, sup: f64, p: &PinchingSample) -> Value {
    json!({ "record": "sample", "t": t, "ricci_sup": sup, "k_min": p.k_min, "k_max": p.k_max, "ratio": p.ratio })
}

fn diagnose(config: &RunConfig, out: &Path, records: &mut Ndjson) -> Result<Outcome, CliError> {
    let spec = config.diagnose.as_ref().expect("validated");
    let planes = PlaneSampling { random_planes: spec.random_planes, seed: spec.plane_seed };
    let mut series: Vec<(f64, f64)> = Vec::new();
    let mut pinching: Vec<Vec<f64>> = Vec::new();
    let mut sample = |records: &mut Ndjson, t: f64, bundle: &CurvatureBundle, g: &hgf_core::Field| {
        let sup = ricci_sup_norm(bundle)?;
        let p = pinching_ratio(bundle, g, &planes)?;
        records.push(&sample_record(t, sup, &p));
        series.push((t, sup));
        pinching.push(vec![t, p.ratio.unwrap_or(f64::NAN)]);
        Ok::<(), CliError>(())
    };
    let end = match spec.source {
        DiagnoseSource::Analytic => {
            let preset = config.preset.to_preset(config.seed);
            let grid = default_grid(&preset, config.grid.dim, config.grid.n)?;
            for &t in &spec.times {
                let (g, _) = instantiate(&preset, &grid, t)?;
                sample(records, t, &CurvatureBundle::compute(&g)?, g.field())?;
            }
            RunEnd::Open { horizon: spec.horizon }
        }
        DiagnoseSource::Simulate => {
            let (termination, last) = run_flow(config, |s| sample(records, s.t, &s.curvature, s.g.field()))?;
            records.push(&termination_record(&termination, last.t));
            match termination {
                TerminationReason::BlowUpDetected { t, point, reason } => RunEnd::Degenerate { t, point, reason },
                _ => RunEnd::Open { horizon: spec.horizon },
            }
        }
    };
    let report = blowup_monitor(&series, &end, &BlowUpFit::default())?;
    let monitor = match &report.status {
        BlowUpStatus::Bounded => json!({ "record": "monitor", "status": "Bounded" }),
        BlowUpStatus::Growing { exponent, r_squared, t_blowup } => json!({
            "record": "monitor", "status": "Growing", "exponent": exponent,
            "r_squared": r_squared, "t_blowup": t_blowup,
        }),
        BlowUpStatus::Degenerate { t, point, reason } => json!({
            "record": "monitor", "status": "Degenerate", "t": t, "point": point, "detail": reason,
        }),
    };
    records.push(&monitor);
    let rows: Vec<Vec<f64>> = series.iter().map(|&(t, s)| vec![t, s]).collect();
    write_columns(&out.join("blowup.dat"), &["t", "ricci_sup"], &rows)?;
    write_columns(&out.join("pinching.dat"), &["t", "k_min_over_k_max"], &pinching)?;
    Ok(Outcome { status: 0, summary: format!("{} samples, monitor {:?}\n", series.len(), report.status) })
}
