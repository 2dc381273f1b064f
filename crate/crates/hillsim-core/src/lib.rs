//! Relative-motion orbital dynamics flown on a micro-quadcopter surrogate.
//!
//! The pipeline mirrors how satellite proximity operations are rehearsed in a
//! flight lab: a deputy spacecraft's motion relative to a chief is propagated
//! under the linearized Clohessy-Wiltshire equations in Hill's frame, the
//! resulting trajectory is compressed in distance and time to fit a small
//! indoor flight volume, resampled into fixed-frequency waypoints, and tracked
//! by a linearized quadrotor model under a Mellinger-style position/attitude
//! controller. Controlled trajectories (e.g. docking) come from pluggable
//! thrust policies closed around the same relative-motion dynamics.
//!
//! Module map:
//! - [`cw`] — continuous Clohessy-Wiltshire model, RK45 propagation, natural
//!   motion trajectory (NMT) initial conditions and closure residuals.
//! - [`discrete`] — exact zero-order-hold discretization, both as closed-form
//!   trigonometric expressions and as a matrix-exponential/quadrature oracle,
//!   plus the cross-validation report between the two.
//! - [`rk45`] — the adaptive Dormand-Prince 5(4) integrator with dense output.
//! - [`scaling`] — space-to-lab distance/time scaling, waypoint resampling,
//!   flight-volume bounds checking.
//! - [`plant`] — the four decoupled linearized quadrotor subsystems and the
//!   PWM/RPM motor-signal map.
//! - [`controller`] — position PID with gravity feedforward and tilt
//!   extraction, attitude PD, saturation and anti-windup.
//! - [`sim`] — closed-loop waypoint tracking (single drone and swarm),
//!   logging, tracking metrics.
//! - [`docking`] — thrust-policy episodes over the discrete dynamics, seeded
//!   safe initial-condition sampling, trajectory-record files.
//! - [`io`] — CSV/JSON trajectory, waypoint, log and metrics formats.
//! - [`kv`] — the plain-text `key = value` config format for gains and
//!   drone parameters.
//!
//! All types are plain values; every operation is a pure function of its
//! inputs, so independent simulations can run concurrently without shared
//! state.

pub mod controller;
pub mod cw;
pub mod discrete;
pub mod docking;
pub mod io;
pub mod kv;
pub mod plant;
pub mod rk45;
pub mod scaling;
pub mod sim;

pub use controller::{ControllerState, GainSet, PositionCommand};
pub use cw::{
    ControlThrust, Frame, HillState, LinearSystem, OrbitalContext, SampledTrajectory, Tolerances,
};
pub use discrete::{DiscreteTransition, DiscretizationMode};
pub use docking::{
    DockingConfig, DockingEpisode, EpisodeSummary, PdDockingPolicy, ThrustPolicy, ZeroPolicy,
};
pub use plant::{DroneParams, DroneState, Plant, PlantCommand};
pub use scaling::{LabVolume, ScaleConfig, WaypointList};
pub use sim::{SimConfig, SimLog, SwarmMember, TrackingMetrics};
