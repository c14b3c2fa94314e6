//! Simulation laboratory for event-triggered active disturbance rejection
//! control of lower-triangular stochastic systems.
//!
//! The crate covers the full loop: gain design and certification
//! ([`gains`]), driving noises ([`noise`]), the plant and its true extended
//! state ([`plant`]), the event-triggered extended state observer
//! ([`observer`]) and controller ([`controller`]), the closed-loop
//! Euler-Maruyama integrator with event supervision ([`simulator`]), and
//! Monte Carlo aggregation ([`analysis`]). [`config`] holds the serializable
//! experiment description and the shipped presets.

pub mod analysis;
pub mod config;
pub mod controller;
pub mod error;
pub mod gains;
pub mod noise;
pub mod observer;
pub mod plant;
pub mod presets;
pub mod simulator;

pub use analysis::{EventReport, McSummary, ScalingReport};
pub use config::RunConfig;
pub use controller::CtrlState;
pub use error::{Error, Result};
pub use gains::{
    CertificationReport, CompanionMatrix, DesignGains, LambdaCoefficients, LyapunovSolution,
    NoiseMomentBounds, ValidationReport,
};
pub use noise::{BoundedNoiseSpec, OuParams, OuState, RngStream, Substream};
pub use observer::EsoState;
pub use plant::SystemSpec;
pub use simulator::{EventLog, SimConfig, TrajectoryRecord};
