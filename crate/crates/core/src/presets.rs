//! Initial metrics, velocities and exact analytic families.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{Field, Rank};
use crate::grid::{BoundaryMode, ChartGrid};
use crate::tensor::{MetricField, VelocityField, DEFAULT_SPD_FLOOR};

#[derive(Debug, Clone, PartialEq)]
pub enum MetricPreset {
    /// Euclidean metric on the torus chart.
    Flat,
    /// Round sphere of the given radius in polar coordinates. The chart
    /// (polar-angle range) is carried by the grid.
    SphereBand { radius: f64 },
    /// `e^{2φ} δ` with `φ = amplitude · cos(k·x + phase)`, the phase drawn from `seed`.
    ConformalTorus { amplitude: f64, mode: [i32; 3], seed: u64 },
    /// `δ + ε · (low-frequency symmetric trigonometric modes)`, with an
    /// independent smooth velocity of the same size.
    RandomSmooth { epsilon: f64, seed: u64 },
    /// `ρ(t) g₀` with `ρ = −λt² + vt + 1` over an Einstein base with constant `λ`.
    ConformalFamily { base: Box<MetricPreset>, lambda: f64, v: f64 },
    /// `(−2κt² + c₁t + c₂) g₀` over an Einstein base with constant `2κ`.
    QuadraticFamily { base: Box<MetricPreset>, kappa: f64, c1: f64, c2: f64 },
}

/// Number of trigonometric modes in a [`MetricPreset::RandomSmooth`] field.
pub const RANDOM_MODES: usize = 3;

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn symmetric_unit(rng: &mut ChaCha8Rng) -> f64 {
    2.0 * unit(rng) - 1.0
}

/// Grid on which a preset is naturally posed: the `[0, 2π)` torus, or for
/// the sphere the band `θ ∈ [0.3π, 0.7π]` (all polar angles) times `φ ∈ [0, 2π)`.
pub fn default_grid(preset: &MetricPreset, dim: usize, n: usize) -> Result<ChartGrid> {
    match preset {
        MetricPreset::SphereBand { .. } => sphere_band_grid(dim, n, 0.3 * PI, 0.7 * PI),
        MetricPreset::ConformalFamily { base, .. } | MetricPreset::QuadraticFamily { base, .. } => {
            default_grid(base, dim, n)
        }
        _ => ChartGrid::periodic_cube(dim, n, 2.0 * PI),
    }
}

/// Interior-patch chart on a sphere band with margin 4.
pub fn sphere_band_grid(dim: usize, n: usize, theta_lo: f64, theta_hi: f64) -> Result<ChartGrid> {
    if !(0.0 < theta_lo && theta_lo < theta_hi && theta_hi < PI) {
        return Err(Error::InvalidGrid(format!(
            "polar range [{theta_lo}, {theta_hi}] must lie inside (0, π)"
        )));
    }
    let ht = (theta_hi - theta_lo) / n as f64;
    let hp = 2.0 * PI / n as f64;
    let mode = BoundaryMode::InteriorPatch { margin: 4 };
    match dim {
        2 => ChartGrid::with_origin(2, &[n, n], &[ht, hp], &[theta_lo, 0.0], mode),
        3 => ChartGrid::with_origin(
            3,
            &[n, n, n],
            &[ht, ht, hp],
            &[theta_lo, theta_lo, 0.0],
            mode,
        ),
        _ => Err(Error::InvalidGrid(format!("dimension {dim} not in {{2,3}}"))),
    }
}

impl MetricPreset {
    /// Einstein constant `λ` with `Ric(g₀) = λ g₀`, if the preset is Einstein.
    pub fn einstein_constant(&self, dim: usize) -> Option<f64> {
        match self {
            MetricPreset::Flat => Some(0.0),
            MetricPreset::SphereBand { radius } => Some((dim as f64 - 1.0) / (radius * radius)),
            _ => None,
        }
    }

    /// Scale factor `s(t)` with `g(t) = s(t) g₀`, and its derivative.
    fn family_scale(&self, dim: usize, t: f64) -> Result<Option<(f64, f64)>> {
        match self {
            MetricPreset::ConformalFamily { base, lambda, v } => {
                check_einstein(base, dim, *lambda)?;
                Ok(Some((-lambda * t * t + v * t + 1.0, -2.0 * lambda * t + v)))
            }
            MetricPreset::QuadraticFamily { base, kappa, c1, c2 } => {
                check_einstein(base, dim, 2.0 * kappa)?;
                Ok(Some((-2.0 * kappa * t * t + c1 * t + c2, -4.0 * kappa * t + c1)))
            }
            _ => Ok(None),
        }
    }
}

fn check_einstein(base: &MetricPreset, dim: usize, lambda: f64) -> Result<()> {
    match base.einstein_constant(dim) {
        Some(l) if (l - lambda).abs() <= 1e-12 * (1.0 + l.abs()) => Ok(()),
        Some(l) => Err(Error::InvalidParameter(format!(
            "base metric has Einstein constant {l}, family declares {lambda}"
        ))),
        None => Err(Error::InvalidParameter("family base must be an Einstein preset".into())),
    }
}

fn diagonal(grid: ChartGrid, f: impl Fn([f64; 3], &mut [f64]) + Sync + Send) -> Field {
    Field::from_fn(grid, Rank::cov(2), f)
}

fn sphere_metric(grid: ChartGrid, radius: f64) -> Field {
    let n = grid.dim();
    let r2 = radius * radius;
    diagonal(grid, move |x, b| {
        if n == 2 {
            b[0] = r2;
            b[3] = r2 * libm::pow(libm::sin(x[0]), 2.0);
        } else {
            let s1 = libm::pow(libm::sin(x[0]), 2.0);
            b[0] = r2;
            b[4] = r2 * s1;
            b[8] = r2 * s1 * libm::pow(libm::sin(x[1]), 2.0);
        }
    })
}

/// Symmetric trigonometric perturbation `Σ_m a^m_ij cos(k_m·x) + b^m_ij sin(k_m·x)`,
/// normalised so every component stays within `[−1, 1]`.
#[derive(Debug, Clone)]
struct TrigModes {
    dim: usize,
    waves: Vec<[f64; 3]>,
    cos: Vec<[f64; 9]>,
    sin: Vec<[f64; 9]>,
}

impl TrigModes {
    fn draw(dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut waves = Vec::new();
        let mut cos = Vec::new();
        let mut sin = Vec::new();
        for _ in 0..RANDOM_MODES {
            let mut k = [0.0f64; 3];
            while k[..dim].iter().all(|&v| v == 0.0) {
                for kk in k.iter_mut().take(dim) {
                    *kk = (rng.next_u32() % 3) as f64 - 1.0;
                }
                // frequencies in {−1, 0, 1}, promoted to 2 on one axis half the time
                if unit(rng) < 0.5 {
                    let a = (rng.next_u32() as usize) % dim;
                    if k[a] != 0.0 {
                        k[a] *= 2.0;
                    }
                }
            }
            let mut a = [0.0f64; 9];
            let mut b = [0.0f64; 9];
            for i in 0..dim {
                for j in i..dim {
                    let (ca, cb) = (symmetric_unit(rng), symmetric_unit(rng));
                    a[i * dim + j] = ca;
                    a[j * dim + i] = ca;
                    b[i * dim + j] = cb;
                    b[j * dim + i] = cb;
                }
            }
            waves.push(k);
            cos.push(a);
            sin.push(b);
        }
        TrigModes { dim, waves, cos, sin }
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim;
        let norm = 1.0 / (2.0 * self.waves.len() as f64);
        for (m, k) in self.waves.iter().enumerate() {
            let phase: f64 = (0..n).map(|a| k[a] * x[a]).sum();
            let (s, c) = (libm::sin(phase), libm::cos(phase));
            for ij in 0..n * n {
                out[ij] += norm * (self.cos[m][ij] * c + self.sin[m][ij] * s);
            }
        }
    }
}

/// Metric and velocity of a preset at time `t`. Static presets ignore `t`;
/// families carry their exact velocity, `RandomSmooth` a seeded one.
pub fn instantiate(
    preset: &MetricPreset,
    grid: &ChartGrid,
    t: f64,
) -> Result<(MetricField, VelocityField)> {
    let n = grid.dim();
    let grid = *grid;
    if !t.is_finite() {
        return Err(Error::InvalidParameter("non-finite instantiation time".into()));
    }
    match preset {
        MetricPreset::Flat => {
            let g = diagonal(grid, |_, b| {
                for i in 0..n {
                    b[i * n + i] = 1.0;
                }
            });
            let g = MetricField::with_default_floor(g)?;
            let h = VelocityField::zeros_like(&g);
            Ok((g, h))
        }
        MetricPreset::SphereBand { radius } => {
            if !(*radius > 0.0) {
                return Err(Error::InvalidParameter("sphere radius must be positive".into()));
            }
            if grid.is_periodic() {
                return Err(Error::InvalidGrid("the sphere needs an interior-patch chart".into()));
            }
            let g = MetricField::with_default_floor(sphere_metric(grid, *radius))?;
            let h = VelocityField::zeros_like(&g);
            Ok((g, h))
        }
        MetricPreset::ConformalTorus { amplitude, mode, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let phase0 = 2.0 * PI * unit(&mut rng);
            let (amp, k) = (*amplitude, *mode);
            let g = diagonal(grid, move |x, b| {
                let arg: f64 = (0..n).map(|a| k[a] as f64 * x[a]).sum::<f64>() + phase0;
                let e = libm::exp(2.0 * amp * libm::cos(arg));
                for i in 0..n {
                    b[i * n + i] = e;
                }
            });
            let g = MetricField::with_default_floor(g)?;
            let h = VelocityField::zeros_like(&g);
            Ok((g, h))
        }
        MetricPreset::RandomSmooth { epsilon, seed } => {
            if !(epsilon.abs() < 1.0 / n as f64) {
                return Err(Error::InvalidParameter(format!(
                    "epsilon {epsilon} too large to guarantee a positive metric"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let gm = TrigModes::draw(n, &mut rng);
            let hm = TrigModes::draw(n, &mut rng);
            let eps = *epsilon;
            let g = Field::from_fn(grid, Rank::cov(2), |x, b| {
                gm.eval(&x, b);
                for v in b.iter_mut() {
                    *v *= eps;
                }
                for i in 0..n {
                    b[i * n + i] += 1.0;
                }
            });
            let h = Field::from_fn(grid, Rank::cov(2), |x, b| {
                hm.eval(&x, b);
                for v in b.iter_mut() {
                    *v *= eps;
                }
            });
            Ok((MetricField::with_default_floor(g)?, VelocityField::new(h)?))
        }
        MetricPreset::ConformalFamily { base, .. } | MetricPreset::QuadraticFamily { base, .. } => {
            let (s, ds) = preset.family_scale(n, t)?.expect("family preset");
            let (g0, _) = instantiate(base, &grid, 0.0)?;
            let g = MetricField::new(g0.field().scaled(s), DEFAULT_SPD_FLOOR)?;
            let h = VelocityField::new(g0.field().scaled(ds))?;
            Ok((g, h))
        }
    }
}

/// Scale factor `s(t)` of a family preset (`g(t) = s(t) g₀`) together with
/// `s'(t)` and `s''(t)`.
pub fn family_scale(preset: &MetricPreset, dim: usize, t: f64) -> Result<(f64, f64, f64)> {
    let (s, ds) = preset
        .family_scale(dim, t)?
        .ok_or_else(|| Error::InvalidParameter("not a family preset".into()))?;
    let dds = match preset {
        MetricPreset::ConformalFamily { lambda, .. } => -2.0 * lambda,
        MetricPreset::QuadraticFamily { kappa, .. } => -4.0 * kappa,
        _ => unreachable!(),
    };
    Ok((s, ds, dds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::CurvatureBundle;

    fn sphere_family(lambda: f64) -> MetricPreset {
        MetricPreset::ConformalFamily {
            base: Box::new(MetricPreset::SphereBand { radius: 1.0 }),
            lambda,
            v: 0.0,
        }
    }

    #[test]
    fn conformal_family_values() {
        let p = sphere_family(1.0);
        let grid = default_grid(&p, 2, 16).unwrap();
        let (g0, h0) = instantiate(&p, &grid, 0.0).unwrap();
        assert_eq!(h0.field().max_abs(), 0.0);
        let (g, h) = instantiate(&p, &grid, 0.5).unwrap();
        for (a, b) in g.field().data().iter().zip(g0.field().data()) {
            assert!((a - 0.75 * b).abs() < 1e-15);
        }
        for (a, b) in h.field().data().iter().zip(g0.field().data()) {
            assert_eq!(*a, -b);
        }
        assert!(matches!(instantiate(&p, &grid, 1.0), Err(Error::MetricDegenerate { .. })));
    }

    #[test]
    fn flat_family_is_static() {
        let p = MetricPreset::ConformalFamily { base: Box::new(MetricPreset::Flat), lambda: 0.0, v: 0.0 };
        let grid = default_grid(&p, 3, 8).unwrap();
        let (g, h) = instantiate(&p, &grid, 7.3).unwrap();
        let (g0, _) = instantiate(&MetricPreset::Flat, &grid, 0.0).unwrap();
        assert_eq!(g.field().data(), g0.field().data());
        assert_eq!(h.field().max_abs(), 0.0);
    }

    #[test]
    fn quadratic_family_values() {
        let p = MetricPreset::QuadraticFamily {
            base: Box::new(MetricPreset::Flat),
            kappa: 0.0,
            c1: 1.0,
            c2: 1.0,
        };
        let grid = default_grid(&p, 2, 8).unwrap();
        let (g, h) = instantiate(&p, &grid, 2.0).unwrap();
        assert_eq!(g.field().at(5), &[3.0, 0.0, 0.0, 3.0]);
        assert_eq!(h.field().at(5), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn family_rejects_wrong_einstein_constant() {
        let p = MetricPreset::ConformalFamily { base: Box::new(MetricPreset::Flat), lambda: 1.0, v: 0.0 };
        let grid = default_grid(&p, 2, 8).unwrap();
        assert!(matches!(instantiate(&p, &grid, 0.1), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn random_smooth_is_deterministic_and_spd() {
        let p = MetricPreset::RandomSmooth { epsilon: 0.05, seed: 9 };
        let grid = default_grid(&p, 3, 8).unwrap();
        let (g1, h1) = instantiate(&p, &grid, 0.0).unwrap();
        let (g2, h2) = instantiate(&p, &grid, 0.0).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(h1, h2);
        assert!(h1.field().max_abs() > 0.0 && h1.field().max_abs() <= 0.05);
        let other = instantiate(&MetricPreset::RandomSmooth { epsilon: 0.05, seed: 10 }, &grid, 0.0).unwrap();
        assert_ne!(other.0, g1);
    }

    #[test]
    fn einstein_presets_self_validate() {
        for dim in [2usize, 3] {
            let p = MetricPreset::SphereBand { radius: 1.0 };
            let grid = default_grid(&p, dim, 32).unwrap();
            let (g, _) = instantiate(&p, &grid, 0.0).unwrap();
            let b = CurvatureBundle::compute(&g).unwrap();
            let lambda = p.einstein_constant(dim).unwrap();
            let mut err = 0.0f64;
            for idx in b.ricci.region().iter() {
                let q = grid.linear_index(idx);
                for (r, gv) in b.ricci.at(q).iter().zip(g.field().at(q)) {
                    err = err.max((r - lambda * gv).abs());
                }
            }
            assert!(err < 1e-3, "dim {dim}: {err}");
        }
    }
}
