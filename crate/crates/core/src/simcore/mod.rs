//! The simulation tick loop: vehicle lifecycle, request flow, matching,
//! insertion, movement, learning and change detection.

pub mod config;
pub mod vehicle;
pub mod world;

pub use config::{CpdConfig, DemandConfig, FleetConfig, PatternPreset, RlConfig, SimConfig};
pub use vehicle::{MoveReport, OpenWindow, Rider, Vehicle, VehicleStatus};
pub use world::{run, run_with, RunOptions, RunOutput, RunSummary, World};
