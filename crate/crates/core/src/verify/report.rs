//! Residual series, convergence orders and report records.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Residuals below this are treated as exact zeros.
pub const ROUNDOFF_FLOOR: f64 = 1e-13;
/// Absolute tolerance for checks that must hold to roundoff.
pub const ROUNDOFF_TOLERANCE: f64 = 1e-10;
/// Observed order must reach this fraction of the theoretical order.
pub const ORDER_FRACTION: f64 = 0.85;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Status {
    Pass,
    Flag,
    Fail,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Flag => "FLAG",
            Status::Fail => "FAIL",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualEntry {
    pub spacing: f64,
    pub dt: Option<f64>,
    pub max: f64,
    pub rms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Order {
    Value(f64),
    Saturated,
}

impl Order {
    pub fn value(self) -> Option<f64> {
        match self {
            Order::Value(v) => Some(v),
            Order::Saturated => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSeries {
    pub identity: String,
    pub entries: Vec<ResidualEntry>,
}

impl ResidualSeries {
    pub fn new(identity: &str) -> Self {
        ResidualSeries { identity: identity.into(), entries: Vec::new() }
    }

    /// Inserts keeping entries sorted by decreasing spacing.
    pub fn push(&mut self, e: ResidualEntry) -> Result<()> {
        if !(e.max >= 0.0 && e.rms >= 0.0) {
            return Err(Error::InvalidParameter(alloc::format!(
                "{}: residual norm {} is negative or not finite",
                self.identity,
                e.max
            )));
        }
        let at = self.entries.iter().position(|x| x.spacing < e.spacing).unwrap_or(self.entries.len());
        self.entries.insert(at, e);
        Ok(())
    }

    pub fn finest(&self) -> Option<&ResidualEntry> {
        self.entries.last()
    }

    pub fn max_residual(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.max))
    }

    /// Order between each successive pair of entries.
    pub fn pairwise_orders(&self) -> Vec<Option<f64>> {
        self.entries
            .windows(2)
            .map(|w| {
                if w[0].max < ROUNDOFF_FLOOR || w[1].max < ROUNDOFF_FLOOR {
                    None
                } else {
                    Some(libm::log(w[0].max / w[1].max) / libm::log(w[0].spacing / w[1].spacing))
                }
            })
            .collect()
    }
}

/// Observed order of the max-norm residual against spacing.
///
/// Entries at the roundoff floor are dropped; if fewer than two remain the
/// series is saturated and `DegenerateSeries` is returned.
pub fn convergence_order(series: &ResidualSeries) -> Result<f64> {
    if series.entries.len() < 2 {
        return Err(Error::InsufficientSnapshots { needed: 2, got: series.entries.len() });
    }
    let pts: Vec<(f64, f64)> = series
        .entries
        .iter()
        .filter(|e| e.max >= ROUNDOFF_FLOOR)
        .map(|e| (libm::log(e.spacing), libm::log(e.max)))
        .collect();
    if pts.len() < 2 {
        return Err(Error::DegenerateSeries);
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidParameter("all entries share one spacing".into()));
    }
    Ok(sxy / sxx)
}

pub fn order_of(series: &ResidualSeries) -> Result<Order> {
    match convergence_order(series) {
        Ok(v) => Ok(Order::Value(v)),
        Err(Error::DegenerateSeries) => Ok(Order::Saturated),
        Err(e) => Err(e),
    }
}

/// How a check is judged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Expectation {
    /// Must vanish to roundoff at every resolution.
    Roundoff,
    /// Must converge at the given order; `tolerance` bounds the finest residual.
    Converges { order: f64, tolerance: f64 },
    /// Must reproduce a closed-form value to `tolerance` at the finest resolution.
    ClosedForm { tolerance: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportEntry {
    pub identity: String,
    pub status: Status,
    pub series: ResidualSeries,
    pub order: Option<Order>,
    pub notes: String,
}

/// How hard a mismatch counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strictness {
    /// The exact residual is zero and the discretisation is exact (flat torus).
    Exact,
    /// The answer is known in closed form; a mismatch is FAIL.
    Oracle,
    /// Generic run; a mismatch is FLAG.
    Generic,
}

/// Classifies a series.
pub fn judge(series: ResidualSeries, expect: Expectation, strict: Strictness, notes: &str) -> ReportEntry {
    let bad = match strict {
        Strictness::Generic => Status::Flag,
        _ => Status::Fail,
    };
    let mut notes = String::from(notes);
    let finest = series.finest().map(|e| e.max).unwrap_or(f64::NAN);
    let order = if series.entries.len() >= 2 { order_of(&series).ok() } else { None };
    let status = if series.entries.is_empty() || !finest.is_finite() {
        push_note(&mut notes, "no usable residual");
        bad
    } else if series.max_residual() <= ROUNDOFF_TOLERANCE {
        if matches!(order, Some(Order::Saturated)) {
            push_note(&mut notes, "saturated");
        }
        Status::Pass
    } else if strict == Strictness::Exact {
        push_note(&mut notes, "residual above roundoff tolerance");
        bad
    } else {
        match expect {
            Expectation::Roundoff => {
                push_note(&mut notes, "residual above roundoff tolerance");
                bad
            }
            Expectation::ClosedForm { tolerance } => {
                if finest <= tolerance {
                    Status::Pass
                } else {
                    push_note(&mut notes, "closed-form mismatch");
                    bad
                }
            }
            Expectation::Converges { order: p, tolerance } => match order {
                Some(Order::Saturated) => {
                    push_note(&mut notes, "saturated");
                    Status::Pass
                }
                Some(Order::Value(v)) if v >= ORDER_FRACTION * p && finest <= tolerance => Status::Pass,
                Some(Order::Value(v)) => {
                    if v < ORDER_FRACTION * p {
                        push_note(&mut notes, &alloc::format!("order {v:.3} below {:.3}", ORDER_FRACTION * p));
                    }
                    if finest > tolerance {
                        push_note(&mut notes, &alloc::format!("finest residual {finest:.3e} above {tolerance:.1e}"));
                    }
                    bad
                }
                None => {
                    push_note(&mut notes, "order unavailable");
                    bad
                }
            },
        }
    };
    ReportEntry { identity: series.identity.clone(), status, series, order, notes }
}

fn push_note(notes: &mut String, s: &str) {
    if !notes.is_empty() {
        notes.push_str("; ");
    }
    notes.push_str(s);
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerificationReport {
    pub entries: Vec<ReportEntry>,
}

impl VerificationReport {
    pub fn push(&mut self, e: ReportEntry) {
        self.entries.push(e);
    }

    pub fn extend(&mut self, other: VerificationReport) {
        self.entries.extend(other.entries);
    }

    /// Orders entries by identity id.
    pub fn sort(&mut self) {
        self.entries.sort_by(|a, b| a.identity.cmp(&b.identity));
    }

    pub fn get(&self, id: &str) -> Option<&ReportEntry> {
        self.entries.iter().find(|e| e.identity == id)
    }

    pub fn worst(&self) -> Status {
        self.entries.iter().map(|e| e.status).max().unwrap_or(Status::Pass)
    }

    pub fn has_failure(&self) -> bool {
        self.worst() == Status::Fail
    }

    /// One line per entry: id, status, order, finest residual, notes.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            let order = match e.order {
                Some(Order::Value(v)) => alloc::format!("{v:.3}"),
                Some(Order::Saturated) => "saturated".into(),
                None => "-".into(),
            };
            let finest = e.series.finest().map(|x| x.max).unwrap_or(f64::NAN);
            s.push_str(&alloc::format!(
                "{:<40} {} order={} finest={:.3e} {}\n",
                e.identity,
                e.status.label(),
                order,
                finest,
                e.notes
            ));
        }
        s
    }
}
