//! Run configuration: one JSON document per run, scalar fields overridable
//! from the command line.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use polling_core::{ServiceDistribution, SystemParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: SystemParams,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub saturate: SaturateConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub demo: DemoConfig,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub horizon: f64,
    pub sample_every: u64,
    pub initial_q1: u64,
    pub initial_q2: u64,
    pub explosion_cap: u64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            horizon: 1e5,
            sample_every: 1,
            initial_q1: 0,
            initial_q2: 0,
            explosion_cap: polling_core::simulator::DEFAULT_EXPLOSION_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaturateConfig {
    pub n_regenerations: u64,
}

impl Default for SaturateConfig {
    fn default() -> Self {
        Self {
            n_regenerations: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Evenly spaced `lambda1` values in `[lo, hi]`.
    Grid,
    /// Bisection on the sign of the drift.
    Bisect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub mode: SweepMode,
    /// Defaults to half the analytic rate.
    pub lo: Option<f64>,
    /// Defaults to 1.5 times the analytic rate.
    pub hi: Option<f64>,
    /// Grid size.
    pub points: usize,
    /// Bisection steps.
    pub iterations: u32,
    pub horizon: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            mode: SweepMode::Bisect,
            lo: None,
            hi: None,
            points: 11,
            iterations: 6,
            horizon: 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoConfig {
    pub k_matched: u32,
    /// Defaults to `params.b1`.
    pub base: Option<ServiceDistribution>,
    /// Defaults to the midpoint of the two service rates.
    pub lambda1: Option<f64>,
    pub horizon: f64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            k_matched: 2,
            base: None,
            lambda1: None,
            horizon: 1e7,
        }
    }
}

/// Command-line values that replace config fields.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub lambda1: Option<f64>,
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Analyze,
    Simulate,
    Saturate,
    Sweep,
    DemoMoments,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Simulate => "simulate",
            Command::Saturate => "saturate",
            Command::Sweep => "sweep",
            Command::DemoMoments => "demo-moments",
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// `horizon` applies to the section of `command`; `lambda1` also sets
    /// the demo's separating rate.
    pub fn apply(&mut self, command: Command, o: &Overrides) -> Result<()> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(l) = o.lambda1 {
            self.params.lambda1 = l;
            if command == Command::DemoMoments {
                self.demo.lambda1 = Some(l);
            }
        }
        if let Some(h) = o.horizon {
            match command {
                Command::Simulate => self.simulate.horizon = h,
                Command::Sweep => self.sweep.horizon = h,
                Command::DemoMoments => self.demo.horizon = h,
                Command::Analyze | Command::Saturate => {
                    bail!("--horizon does not apply to {}", command.name())
                }
            }
        }
        Ok(())
    }

    /// Checks every field the given command reads; messages name the field.
    pub fn validate(&self, command: Command) -> Result<()> {
        self.params.validate()?;
        let positive = |field: &str, v: f64| -> Result<()> {
            if !(v.is_finite() && v > 0.0) {
                bail!("invalid value for `{field}`: must be finite and > 0, got {v}");
            }
            Ok(())
        };
        match command {
            Command::Analyze => {}
            Command::Simulate => {
                positive("simulate.horizon", self.simulate.horizon)?;
                if self.simulate.sample_every == 0 {
                    bail!("invalid value for `simulate.sample_every`: must be >= 1");
                }
                if self.simulate.explosion_cap == 0 {
                    bail!("invalid value for `simulate.explosion_cap`: must be >= 1");
                }
            }
            Command::Saturate => {
                if self.saturate.n_regenerations == 0 {
                    bail!("invalid value for `saturate.n_regenerations`: must be >= 1");
                }
            }
            Command::Sweep => {
                positive("sweep.horizon", self.sweep.horizon)?;
                for (field, v) in [("sweep.lo", self.sweep.lo), ("sweep.hi", self.sweep.hi)] {
                    if let Some(v) = v {
                        positive(field, v)?;
                    }
                }
                if let (Some(lo), Some(hi)) = (self.sweep.lo, self.sweep.hi) {
                    if lo >= hi {
                        bail!("invalid value for `sweep.hi`: must exceed sweep.lo = {lo}, got {hi}");
                    }
                }
                if self.sweep.mode == SweepMode::Grid && self.sweep.points < 2 {
                    bail!("invalid value for `sweep.points`: must be >= 2");
                }
            }
            Command::DemoMoments => {
                positive("demo.horizon", self.demo.horizon)?;
                if !matches!(self.demo.k_matched, 1 | 2) {
                    bail!("invalid value for `demo.k_matched`: must be 1 or 2, got {}", self.demo.k_matched);
                }
                if let Some(l) = self.demo.lambda1 {
                    positive("demo.lambda1", l)?;
                }
                if let Some(base) = &self.demo.base {
                    base.validate().context("invalid value for `demo.base`")?;
                }
            }
        }
        Ok(())
    }
}
