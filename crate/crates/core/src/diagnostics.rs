//! Runtime monitors: Ricci sup-norm, blow-up fitting and sectional pinching.

use alloc::string::String;
use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{Field, Rank};
use crate::tensor::{sectional_curvature, CurvatureBundle};

/// Pointwise `|Ric|_g = sqrt(Ric_ij Ric_kl g^ik g^jl)`.
pub fn ricci_norm_field(bundle: &CurvatureBundle) -> Result<Field> {
    let n = bundle.dim();
    let ric = &bundle.ricci;
    let gi = &bundle.ginv;
    Field::from_points(*ric.grid(), Rank::SCALAR, ric.region().intersect(&gi.region()), |p, out| {
        let r = ric.at(p);
        let g = gi.at(p);
        // M^i_j = g^ik Ric_kj, |Ric|² = tr(M M)
        let mut m = [0.0f64; 9];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = (0..n).map(|k| g[i * n + k] * r[k * n + j]).sum();
            }
        }
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += m[i * n + j] * m[j * n + i];
            }
        }
        out[0] = libm::sqrt(s.max(0.0));
    })
}

/// `sup |Ric|_g` over the reported region of the chart.
pub fn ricci_sup_norm(bundle: &CurvatureBundle) -> Result<f64> {
    let f = ricci_norm_field(bundle)?;
    let region = f.region().intersect(&f.grid().reporting_region());
    if region.is_empty() {
        return Err(Error::RegionExhausted);
    }
    Ok(f.max_abs_on(&region))
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlowUpStatus {
    Bounded,
    /// `sup |Ric| ~ (T − t)^exponent` with the given fit quality.
    Growing { exponent: f64, r_squared: f64, t_blowup: f64 },
    /// The flow itself stopped on a degenerate metric or non-finite state.
    Degenerate { t: f64, point: Option<usize>, reason: String },
}

/// Fit settings for [`blowup_monitor`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowUpFit {
    /// Fraction of trailing samples used by the fit.
    pub window_fraction: f64,
    pub min_window: usize,
    pub min_r_squared: f64,
    /// A fitted exponent at or below this counts as growth.
    pub exponent_threshold: f64,
}

impl Default for BlowUpFit {
    fn default() -> Self {
        BlowUpFit { window_fraction: 0.25, min_window: 8, min_r_squared: 0.9, exponent_threshold: -0.25 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowUpReport {
    /// `(t, sup |Ric|)` samples, strictly increasing in `t`.
    pub series: Vec<(f64, f64)>,
    pub status: BlowUpStatus,
    pub threshold: f64,
}

/// What the monitor knows about how the sampled run ended.
#[derive(Debug, Clone, PartialEq)]
pub enum RunEnd {
    /// Samples of an analytic family or a run that completed; `horizon` is the
    /// singular time if known.
    Open { horizon: Option<f64> },
    /// The run terminated on a degenerate state at `t`.
    Degenerate { t: f64, point: Option<usize>, reason: String },
}

/// Least-squares line `y = a + b x`; returns `(b, a, r²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Some((slope, my - slope * mx, r2))
}

/// Classifies a `sup |Ric|` series. The singular time is the known horizon,
/// else the termination time, else the zero of a linear fit of `1/sup` over
/// the fitting window.
pub fn blowup_monitor(series: &[(f64, f64)], end: &RunEnd, fit: &BlowUpFit) -> Result<BlowUpReport> {
    if series.len() < 3 {
        return Err(Error::InsufficientSnapshots { needed: 3, got: series.len() });
    }
    if series.windows(2).any(|w| !(w[1].0 > w[0].0)) || series.iter().any(|s| !(s.1 >= 0.0)) {
        return Err(Error::InvalidParameter("series must be increasing in t with sup >= 0".into()));
    }
    let report = |status| BlowUpReport { series: series.to_vec(), status, threshold: fit.exponent_threshold };
    let horizon = match end {
        RunEnd::Degenerate { t, point, reason } => {
            return Ok(report(BlowUpStatus::Degenerate { t: *t, point: *point, reason: reason.clone() }))
        }
        RunEnd::Open { horizon } => *horizon,
    };
    let len = series.len();
    let w = (libm::ceil(fit.window_fraction * len as f64) as usize).max(fit.min_window).min(len);
    let tail = &series[len - w..];
    if tail.iter().any(|s| !(s.1 > 0.0)) {
        return Ok(report(BlowUpStatus::Bounded));
    }
    let t_blow = match horizon {
        Some(t) => t,
        None => {
            let t: Vec<f64> = tail.iter().map(|s| s.0).collect();
            let inv: Vec<f64> = tail.iter().map(|s| 1.0 / s.1).collect();
            match linear_fit(&t, &inv) {
                Some((slope, icpt, _)) if slope < 0.0 => -icpt / slope,
                _ => return Ok(report(BlowUpStatus::Bounded)),
            }
        }
    };
    let last = tail[tail.len() - 1].0;
    if !(t_blow > last) {
        return Ok(report(BlowUpStatus::Bounded));
    }
    let x: Vec<f64> = tail.iter().map(|s| libm::log(t_blow - s.0)).collect();
    let y: Vec<f64> = tail.iter().map(|s| libm::log(s.1)).collect();
    match linear_fit(&x, &y) {
        Some((exponent, _, r2)) if r2 >= fit.min_r_squared && exponent <= fit.exponent_threshold => {
            Ok(report(BlowUpStatus::Growing { exponent, r_squared: r2, t_blowup: t_blow }))
        }
        _ => Ok(report(BlowUpStatus::Bounded)),
    }
}

/// Planes examined at each point: every coordinate plane plus
/// `random_planes` seeded random planes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneSampling {
    pub random_planes: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinchingSample {
    pub k_max: f64,
    pub k_min: f64,
    /// `K_min / K_max`, absent when `K_max` is not above [`PINCHING_TOLERANCE`].
    pub ratio: Option<f64>,
}

pub const PINCHING_TOLERANCE: f64 = 1e-10;

/// `(t, K_max, K_min, ratio)` rows.
pub type PinchingSeries = Vec<(f64, PinchingSample)>;

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> [f64; 3] {
    let mut v = [0.0f64; 3];
    for x in v.iter_mut().take(n) {
        *x = 2.0 * ((rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64) - 1.0;
    }
    v
}

/// Sampled extrema of the sectional curvature over the reported region.
/// Each point draws its random planes from its own stream, so adding planes
/// only extends the sample.
pub fn pinching_ratio(bundle: &CurvatureBundle, g: &Field, spec: &PlaneSampling) -> Result<PinchingSample> {
    let n = bundle.dim();
    let r = &bundle.riemann;
    let region = r.region().intersect(&r.grid().reporting_region());
    if region.is_empty() {
        return Err(Error::RegionExhausted);
    }
    let mut k_max = f64::NEG_INFINITY;
    let mut k_min = f64::INFINITY;
    for idx in region.iter() {
        let p = r.grid().linear_index(idx);
        let mut take = |k: f64| {
            k_max = k_max.max(k);
            k_min = k_min.min(k);
        };
        for i in 0..n {
            for j in (i + 1)..n {
                let (mut u, mut v) = ([0.0; 3], [0.0; 3]);
                u[i] = 1.0;
                v[j] = 1.0;
                take(sectional_curvature(r, g, p, &u[..n], &v[..n])?);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(p as u64);
        for _ in 0..spec.random_planes {
            loop {
                let u = random_vector(&mut rng, n);
                let v = random_vector(&mut rng, n);
                match sectional_curvature(r, g, p, &u[..n], &v[..n]) {
                    Ok(k) => {
                        take(k);
                        break;
                    }
                    Err(Error::DegeneratePlane(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
        }
    }
    let ratio = if k_max > PINCHING_TOLERANCE { Some(k_min / k_max) } else { None };
    Ok(PinchingSample { k_max, k_min, ratio })
}
