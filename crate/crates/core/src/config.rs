//! JSON run configuration.
//!
//! Every key is optional; missing keys take the nominal values. Unknown keys
//! are rejected. Units: tonne, kN, metre, second; speeds in m/s (the `sweep`
//! command takes km/h on the command line).
//!
//! ```json
//! {
//!   "vehicle": {
//!     "wagon_mass": 57.0,          // t
//!     "wagon_inertia": 70.0,       // t·m²
//!     "bogie_mass": 9.0,           // t
//!     "wagon_half_base": 3.725,    // m
//!     "bogie_half_base": 1.5,      // m
//!     "primary_stiffness": 3040.0, // kN/m
//!     "primary_damping": 30.0,     // kN·s/m
//!     "secondary_stiffness": 2660.0,
//!     "secondary_damping": 100.0,
//!     "damping_aliases": "physical" // or "swapped"
//!   },
//!   "track": { "amp1": 0.005, "amp2": 0.002, "wavelength": 25.0, "speed": 20.0 },
//!   "simulation": { "t0": 0.0, "t1": 10.0, "step": 0.001, "engine": "seq",
//!                   "initial_state": [0, 0, 0, 0, 0, 0, 0, 0] },
//!   "adaptive": { "abs_tol": 1e-9, "rel_tol": 1e-6, "h_init": 0.001, "h_min": 1e-12,
//!                 "h_max": 0.1, "safety": 0.9, "shrink": 0.2, "growth": 5.0 },
//!   "parallel": { "plan": "body-wise", "workers": 4, "pin": false,
//!                 "elevated_priority": false, "cache_line": 64, "track_writes": false },
//!   "output": { "stride": 1, "csv": "simulation.csv", "plot": null },
//!   "validation": { "settle": 50.0, "window": 10.0 }
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::Error;
use crate::integrators::StepControl;
use crate::parallel::buffer::{line_size_from_env, valid_line_size, DEFAULT_LINE_SIZE};
use crate::parallel::plan::{
    named_plan, PlanKind, PriorityHint, WorkerPlan, SUPPORTED_WORKER_COUNTS,
};
use crate::parallel::EngineOptions;
use crate::track::TrackProfile;
use crate::vehicle::{StateVector, VehicleParams, STATE_DIM};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Json { path: String, message: String },
    #[error("{path}: {message}")]
    Invariant { path: String, message: String },
}

impl ConfigError {
    /// Dotted location of the offending key.
    pub fn path(&self) -> String {
        match self {
            ConfigError::Io { path, .. } => path.display().to_string(),
            ConfigError::Json { path, .. } | ConfigError::Invariant { path, .. } => path.clone(),
        }
    }

    fn invariant(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invariant {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    #[default]
    Seq,
    Par,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    Timeseries,
    Phase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    /// s
    pub t0: f64,
    /// s
    pub t1: f64,
    /// Fixed RK4 step, s.
    pub step: f64,
    pub engine: Engine,
    pub initial_state: [f64; STATE_DIM],
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            t0: 0.0,
            t1: 10.0,
            step: 1e-3,
            engine: Engine::Seq,
            initial_state: [0.0; STATE_DIM],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParallelSection {
    pub plan: PlanKind,
    pub workers: usize,
    /// Pin worker `i` to core `i`.
    pub pin: bool,
    pub elevated_priority: bool,
    /// Padding granularity, bytes. `RAILSIM_CACHE_LINE` overrides it.
    pub cache_line: usize,
    pub track_writes: bool,
}

impl Default for ParallelSection {
    fn default() -> Self {
        Self {
            plan: PlanKind::BodyWise,
            workers: 4,
            pin: false,
            elevated_priority: false,
            cache_line: DEFAULT_LINE_SIZE,
            track_writes: false,
        }
    }
}

impl ParallelSection {
    pub fn worker_plan(&self) -> crate::Result<WorkerPlan> {
        self.plan_for(self.plan, self.workers)
    }

    /// Plan of the given shape carrying this section's pinning flags.
    pub fn plan_for(&self, kind: PlanKind, workers: usize) -> crate::Result<WorkerPlan> {
        let mut plan = named_plan(kind, workers)?;
        if self.pin {
            plan = plan.pinned();
        }
        if self.elevated_priority {
            plan = plan.with_priority(PriorityHint::Elevated);
        }
        Ok(plan)
    }

    pub fn engine_options(&self) -> EngineOptions {
        EngineOptions {
            line_size: line_size_from_env(self.cache_line),
            track_writes: self.track_writes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Record every `stride`-th step (plus the last).
    pub stride: usize,
    pub csv: PathBuf,
    pub plot: Option<PlotKind>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            stride: 1,
            csv: PathBuf::from("simulation.csv"),
            plot: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationSection {
    /// Time allowed for transients to decay, s.
    pub settle: f64,
    /// Trailing window compared against the steady state, s.
    pub window: f64,
}

impl Default for ValidationSection {
    fn default() -> Self {
        Self {
            settle: 50.0,
            window: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub vehicle: VehicleParams,
    pub track: TrackProfile,
    pub simulation: SimulationSection,
    pub adaptive: StepControl,
    pub parallel: ParallelSection,
    pub output: OutputSection,
    pub validation: ValidationSection,
}

impl SimConfig {
    pub fn initial_state(&self) -> StateVector {
        StateVector(self.simulation.initial_state)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.vehicle.validate().map_err(|e| match e {
            Error::InvalidParams { field, reason } => {
                ConfigError::invariant(format!("vehicle.{field}"), reason)
            }
            other => ConfigError::invariant("vehicle", other.to_string()),
        })?;
        self.track.validate().map_err(|e| match e {
            Error::InvalidProfile { field, reason } => {
                ConfigError::invariant(format!("track.{field}"), reason)
            }
            other => ConfigError::invariant("track", other.to_string()),
        })?;

        let sim = &self.simulation;
        if !sim.t0.is_finite() {
            return Err(ConfigError::invariant("simulation.t0", "must be finite"));
        }
        if !(sim.t1.is_finite() && sim.t1 > sim.t0) {
            return Err(ConfigError::invariant(
                "simulation.t1",
                format!("must be finite and > t0 ({}), got {}", sim.t0, sim.t1),
            ));
        }
        if !(sim.step.is_finite() && sim.step > 0.0) {
            return Err(ConfigError::invariant(
                "simulation.step",
                format!("must be finite and > 0, got {}", sim.step),
            ));
        }
        if let Some(i) = sim.initial_state.iter().position(|v| !v.is_finite()) {
            return Err(ConfigError::invariant(
                format!("simulation.initial_state[{i}]"),
                "must be finite",
            ));
        }

        self.adaptive
            .validate()
            .map_err(|e| ConfigError::invariant("adaptive", e.to_string()))?;

        let par = &self.parallel;
        if !SUPPORTED_WORKER_COUNTS.contains(&par.workers) {
            return Err(ConfigError::invariant(
                "parallel.workers",
                format!(
                    "must be one of {SUPPORTED_WORKER_COUNTS:?}, got {}",
                    par.workers
                ),
            ));
        }
        if !valid_line_size(par.cache_line) {
            return Err(ConfigError::invariant(
                "parallel.cache_line",
                format!("must be a power of two >= 8, got {}", par.cache_line),
            ));
        }

        if self.output.stride == 0 {
            return Err(ConfigError::invariant("output.stride", "must be >= 1"));
        }

        let v = &self.validation;
        if !(v.window.is_finite() && v.window > 0.0) {
            return Err(ConfigError::invariant(
                "validation.window",
                format!("must be finite and > 0, got {}", v.window),
            ));
        }
        if !(v.settle.is_finite() && v.settle >= 0.0) {
            return Err(ConfigError::invariant(
                "validation.settle",
                format!("must be finite and >= 0, got {}", v.settle),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parses and validates a configuration document.
pub fn parse_config_str(text: &str) -> Result<SimConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: SimConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::Json {
            path: if path == "." { "<root>".into() } else { path },
            message: e.into_inner().to_string(),
        }
    })?;
    config.validate()?;
    Ok(config)
}

pub fn parse_config(path: &Path) -> Result<SimConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text)
}
