//! Run configuration: a TOML file with one table per concern.
//!
//! ```toml
//! command = "verify"          # simulate | verify | oracle | diagnose
//! seed = 11                   # random presets only
//! out = "out/flat"
//!
//! [grid]
//! dim = 2
//! n = 32
//!
//! [preset]
//! kind = "random_smooth"
//! epsilon = 0.05
//!
//! [verify]
//! checks = ["static", "local", "global", "connection"]
//! ladder = [64, 128, 256]
//! ```
//!
//! Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use hgf_core::flow::{FlowVariant, StepControl};
use hgf_core::presets::MetricPreset;
use hgf_core::verify::DynamicLadder;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Simulate,
    Verify,
    Oracle,
    Diagnose,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Verify => "verify",
            Command::Oracle => "oracle",
            Command::Diagnose => "diagnose",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default)]
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub grid: GridSpec,
    pub preset: PresetSpec,
    #[serde(default)]
    pub flow: FlowSpec,
    #[serde(default)]
    pub step: StepSpec,
    pub verify: Option<VerifySpec>,
    pub oracle: Option<OracleSpec>,
    pub diagnose: Option<DiagnoseSpec>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    /// Points per axis.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PresetSpec {
    Flat,
    SphereBand {
        #[serde(default = "one")]
        radius: f64,
    },
    ConformalTorus {
        amplitude: f64,
        mode: [i32; 3],
    },
    RandomSmooth {
        epsilon: f64,
    },
    ConformalFamily {
        base: Box<PresetSpec>,
        lambda: f64,
        #[serde(default)]
        v: f64,
    },
    QuadraticFamily {
        base: Box<PresetSpec>,
        kappa: f64,
        c1: f64,
        #[serde(default = "one")]
        c2: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl PresetSpec {
    pub fn to_preset(&self, seed: u64) -> MetricPreset {
        match self {
            PresetSpec::Flat => MetricPreset::Flat,
            PresetSpec::SphereBand { radius } => MetricPreset::SphereBand { radius: *radius },
            PresetSpec::ConformalTorus { amplitude, mode } => {
                MetricPreset::ConformalTorus { amplitude: *amplitude, mode: *mode, seed }
            }
            PresetSpec::RandomSmooth { epsilon } => MetricPreset::RandomSmooth { epsilon: *epsilon, seed },
            PresetSpec::ConformalFamily { base, lambda, v } => MetricPreset::ConformalFamily {
                base: Box::new(base.to_preset(seed)),
                lambda: *lambda,
                v: *v,
            },
            PresetSpec::QuadraticFamily { base, kappa, c1, c2 } => MetricPreset::QuadraticFamily {
                base: Box::new(base.to_preset(seed)),
                kappa: *kappa,
                c1: *c1,
                c2: *c2,
            },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PresetSpec::Flat => "flat",
            PresetSpec::SphereBand { .. } => "sphere_band",
            PresetSpec::ConformalTorus { .. } => "conformal_torus",
            PresetSpec::RandomSmooth { .. } => "random_smooth",
            PresetSpec::ConformalFamily { .. } => "conformal_family",
            PresetSpec::QuadraticFamily { .. } => "quadratic_family",
        }
    }

    fn is_family(&self) -> bool {
        matches!(self, PresetSpec::ConformalFamily { .. } | PresetSpec::QuadraticFamily { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantName {
    #[default]
    Hgf,
    EinsteinHgf,
    DissipativeHgf,
    Surface2d,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    #[serde(default)]
    pub variant: VariantName,
    /// Damping constant of the dissipative flow.
    pub damping: Option<f64>,
}

impl FlowSpec {
    pub fn to_variant(&self) -> Result<FlowVariant, CliError> {
        match (self.variant, self.damping) {
            (VariantName::DissipativeHgf, Some(d)) => Ok(FlowVariant::DissipativeHgf { d }),
            (VariantName::DissipativeHgf, None) => Err(CliError::Config("flow.damping is required".into())),
            (_, Some(_)) => Err(CliError::Config("flow.damping only applies to dissipative_hgf".into())),
            (VariantName::Hgf, None) => Ok(FlowVariant::Hgf),
            (VariantName::EinsteinHgf, None) => Ok(FlowVariant::EinsteinHgf),
            (VariantName::Surface2d, None) => Ok(FlowVariant::Surface2D),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepSpec {
    pub cfl_factor: f64,
    pub dt_max: Option<f64>,
    pub t_end: f64,
    pub snapshot_stride: usize,
    pub dt_min: f64,
    pub fixed_dt: Option<f64>,
}

impl Default for StepSpec {
    fn default() -> Self {
        let c = StepControl::default();
        StepSpec {
            cfl_factor: c.cfl_factor,
            dt_max: None,
            t_end: c.t_end,
            snapshot_stride: c.snapshot_stride,
            dt_min: c.dt_min,
            fixed_dt: None,
        }
    }
}

impl StepSpec {
    pub fn to_control(&self) -> StepControl {
        StepControl {
            cfl_factor: self.cfl_factor,
            dt_max: self.dt_max.unwrap_or(f64::INFINITY),
            t_end: self.t_end,
            snapshot_stride: self.snapshot_stride,
            dt_min: self.dt_min,
            fixed_dt: self.fixed_dt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Static,
    Local,
    Global,
    Connection,
    Family,
    Integrator,
    Reduction,
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Check::Static => "static",
            Check::Local => "local",
            Check::Global => "global",
            Check::Connection => "connection",
            Check::Family => "family",
            Check::Integrator => "integrator",
            Check::Reduction => "reduction",
        }
    }

    fn dynamic(self) -> bool {
        matches!(self, Check::Local | Check::Global | Check::Connection)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    pub checks: Vec<Check>,
    #[serde(default)]
    pub ladder: Vec<usize>,
    /// Run the checks once per dimension instead of only `grid.dim`.
    pub dims: Option<Vec<usize>>,
    /// `dt / Δx` on every rung of a dynamic ladder.
    pub dt_ratio: Option<f64>,
    /// Time at which the dynamic window is centred.
    pub t_centre: Option<f64>,
    /// Family sample time.
    #[serde(default = "family_time")]
    pub family_time: f64,
    /// Step size and step count of the integrator and reduction checks.
    #[serde(default = "check_dt")]
    pub dt: f64,
    #[serde(default = "check_steps")]
    pub steps: usize,
    /// Conformal-factor amplitude of the reduction check.
    #[serde(default = "amplitude")]
    pub amplitude: f64,
}

fn family_time() -> f64 {
    0.3
}
fn check_dt() -> f64 {
    0.02
}
fn check_steps() -> usize {
    50
}
fn amplitude() -> f64 {
    1e-2
}

impl VerifySpec {
    pub fn dynamic_ladder(&self) -> DynamicLadder {
        let mut d = DynamicLadder::new(&self.ladder);
        if let Some(r) = self.dt_ratio {
            d.dt_ratio = r;
        }
        if let Some(t) = self.t_centre {
            d.t_centre = t;
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub ladder: Vec<usize>,
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnoseSource {
    /// Monitor a simulation of the preset.
    #[default]
    Simulate,
    /// Sample an analytic family at `times`.
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseSpec {
    #[serde(default)]
    pub source: DiagnoseSource,
    #[serde(default)]
    pub times: Vec<f64>,
    /// Known singular time handed to the monitor.
    pub horizon: Option<f64>,
    #[serde(default)]
    pub random_planes: usize,
    #[serde(default)]
    pub plane_seed: u64,
}

/// Overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub ladder: Option<Vec<usize>>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(l) = &o.ladder {
            if let Some(v) = &mut self.verify {
                v.ladder = l.clone();
            }
            if let Some(v) = &mut self.oracle {
                v.ladder = l.clone();
            }
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn dims(&self) -> Vec<usize> {
        match self.verify.as_ref().and_then(|v| v.dims.clone()) {
            Some(d) => d,
            None => vec![self.grid.dim],
        }
    }

    /// Schema checks that need more than one key.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.into()));
        for &d in &self.dims() {
            if !(2..=3).contains(&d) {
                return bad("dimensions must be 2 or 3");
            }
        }
        if self.grid.n < 5 {
            return bad("grid.n must be at least 5");
        }
        self.flow.to_variant()?;
        self.step.to_control().validate().map_err(|e| CliError::Config(e.to_string()))?;
        let section = |present: bool, name: &str| -> Result<(), CliError> {
            if present {
                Ok(())
            } else {
                Err(CliError::Config(format!("command {} needs a [{name}] table", self.command.name())))
            }
        };
        match self.command {
            Command::Verify => section(self.verify.is_some(), "verify")?,
            Command::Oracle => section(self.oracle.is_some(), "oracle")?,
            Command::Diagnose => section(self.diagnose.is_some(), "diagnose")?,
            Command::Simulate => {}
        }
        if let Some(v) = &self.verify {
            if v.checks.is_empty() {
                return bad("verify.checks is empty");
            }
            let needs_ladder = v.checks.iter().any(|c| c.dynamic() || matches!(c, Check::Static | Check::Family));
            if needs_ladder && (v.ladder.len() < 2 || v.ladder.iter().any(|&n| n < 5)) {
                return bad("verify.ladder needs at least two resolutions of 5 or more points");
            }
            if v.checks.contains(&Check::Family) && !self.preset.is_family() {
                return bad("the family check needs a family preset");
            }
            if v.dt_ratio.is_some_and(|r| !(r > 0.0)) || !(v.dt > 0.0) || v.steps == 0 || !(v.amplitude > 0.0) {
                return bad("verify step parameters must be positive");
            }
        }
        if let Some(o) = &self.oracle {
            if o.ladder.len() < 2 || o.times.is_empty() {
                return bad("oracle needs at least two resolutions and one time");
            }
            if !self.preset.is_family() {
                return bad("oracle needs a family preset");
            }
        }
        if let Some(d) = &self.diagnose {
            if d.source == DiagnoseSource::Analytic && (d.times.len() < 3 || !self.preset.is_family()) {
                return bad("analytic diagnosis needs a family preset and at least three times");
            }
        }
        Ok(())
    }
}
