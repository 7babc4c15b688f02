//! Vertical dynamics of a rail wagon on two bogies under harmonic track
//! input, integrated sequentially or by a pool of pinned workers that
//! rendezvous at every Runge–Kutta stage, with a frequency-domain reference
//! solution for validation.

pub mod commands;
pub mod config;
pub mod error;
pub mod integrators;
pub mod oracle;
pub mod output;
pub mod parallel;
pub mod track;
pub mod validate;
pub mod vehicle;

pub use error::{Error, Result};
pub use integrators::{
    integrate_adaptive, integrate_fixed, StepControl, TimeSeries, VehicleSystem,
};
pub use parallel::{run_parallel, EngineOptions, ParallelStats};
pub use track::{TrackInput, TrackProfile};
pub use vehicle::{ForcingSample, StateVector, VehicleParams};
