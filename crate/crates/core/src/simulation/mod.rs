//! Monte Carlo harness for the calibration, coverage and power experiments.

pub mod cases;
pub mod config;
pub mod engine;
pub mod ks;
pub mod rng;

pub use cases::{case_two_scale, generate_case, Draw, GridPoint, Scenario, Truth};
pub use config::{Alternative, AlternativeKind, BetaSpec, Case, NullValue, SimConfig, TestKind};
pub use engine::{
    run_replications, Moments, PointSummary, Quantity, ReplicationRecord, SimOutput, SimSummary, Target, TestSummary,
};
pub use ks::ks_uniformity;
