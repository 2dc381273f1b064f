//! Closed-loop waypoint tracking: one drone or a swarm, with per-tick logs
//! and tracking metrics.
//!
//! Each control tick consumes one waypoint: the position loop produces a
//! thrust deviation and a desired attitude, then the plant advances through
//! `physics_rate / control_rate` RK4 substeps with the attitude loop
//! re-evaluated at every substep (the inner loop runs faster than the outer
//! one). Everything is pure sequential f64 arithmetic, so identical inputs
//! give bit-identical logs; swarm members are independent and may run in
//! parallel.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{
    attitude_control, position_control, ControllerError, ControllerState, GainSet,
};
use crate::plant::{DroneParams, DroneState, Plant, PlantCommand, PlantError};
use crate::scaling::WaypointList;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("waypoint list is empty")]
    EmptyWaypointList,
    #[error("waypoint frequency {waypoint_hz} Hz does not match control rate {control_hz} Hz")]
    RateMismatch { waypoint_hz: f64, control_hz: f64 },
    #[error("physics rate {physics_hz} Hz is not an integer multiple of control rate {control_hz} Hz")]
    NonIntegerRateRatio { physics_hz: f64, control_hz: f64 },
    #[error("rates must be positive, got control {control_hz} Hz, physics {physics_hz} Hz")]
    NonPositiveRate { control_hz: f64, physics_hz: f64 },
    #[error("duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("waypoint count {got} does not match round(control_rate * duration) = {expected}")]
    DurationMismatch { expected: usize, got: usize },
    #[error("duplicate swarm identifier `{0}`")]
    DuplicateUri(String),
    #[error("log is empty")]
    EmptyLog,
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
}

/// Rates, duration and controller options for a tracking run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Waypoint consumption rate, Hz.
    pub control_rate: f64,
    /// Plant integration rate, Hz; integer multiple of the control rate.
    pub physics_rate: f64,
    /// Total simulated time, s.
    pub duration: f64,
    /// Constant heading reference, rad.
    pub yaw_ref: f64,
    /// Feed the waypoint stream's finite-difference velocity to the
    /// derivative term, so the velocity error is measured against the
    /// moving setpoint instead of zero. On by default; stationary
    /// waypoints make it a no-op.
    pub velocity_feedforward: bool,
}

impl SimConfig {
    pub fn with_duration(duration: f64) -> Self {
        Self {
            control_rate: 48.0,
            physics_rate: 240.0,
            duration,
            yaw_ref: std::f64::consts::FRAC_PI_2,
            velocity_feedforward: true,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.control_rate > 0.0) || !(self.physics_rate > 0.0) {
            return Err(SimError::NonPositiveRate {
                control_hz: self.control_rate,
                physics_hz: self.physics_rate,
            });
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(SimError::NonPositiveDuration(self.duration));
        }
        let ratio = self.physics_rate / self.control_rate;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return Err(SimError::NonIntegerRateRatio {
                physics_hz: self.physics_rate,
                control_hz: self.control_rate,
            });
        }
        Ok(())
    }

    pub fn substeps(&self) -> usize {
        (self.physics_rate / self.control_rate).round() as usize
    }

    pub fn expected_ticks(&self) -> usize {
        (self.control_rate * self.duration).round() as usize
    }
}

/// One control tick: the waypoint commanded, the state the controller saw,
/// and the command it issued.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimLogEntry {
    pub t: f64,
    pub waypoint: Vector3<f64>,
    pub state: DroneState,
    pub command: PlantCommand,
}

impl SimLogEntry {
    pub fn position_error(&self) -> Vector3<f64> {
        self.waypoint - self.state.position
    }
}

/// Complete tracking run at control-tick resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    pub control_rate: f64,
    pub entries: Vec<SimLogEntry>,
}

impl SimLog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Per-axis tracking-error statistics over a log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingMetrics {
    /// Root-mean-square waypoint error per axis, m.
    pub rms: [f64; 3],
    /// Largest absolute waypoint error per axis, m.
    pub max_abs: [f64; 3],
    /// Euclidean error at the last log entry, m.
    pub final_error_norm: f64,
}

impl TrackingMetrics {
    pub fn worst_axis_rms(&self) -> f64 {
        self.rms.iter().fold(0.0_f64, |a, &b| a.max(b))
    }
}

/// Simulate the tracking controller flying one waypoint list.
pub fn run_tracking(
    wps: &WaypointList,
    params: &DroneParams,
    gains: &GainSet,
    cfg: &SimConfig,
) -> Result<SimLog, SimError> {
    cfg.validate()?;
    gains.validate()?;
    if wps.is_empty() {
        return Err(SimError::EmptyWaypointList);
    }
    if (wps.frequency - cfg.control_rate).abs() > 1e-9 * cfg.control_rate {
        return Err(SimError::RateMismatch {
            waypoint_hz: wps.frequency,
            control_hz: cfg.control_rate,
        });
    }
    let ticks = cfg.expected_ticks();
    if ticks != wps.len() {
        return Err(SimError::DurationMismatch {
            expected: ticks,
            got: wps.len(),
        });
    }

    let plant = Plant::new(*params)?;
    let substeps = cfg.substeps();
    let dt_control = 1.0 / cfg.control_rate;
    let dt_physics = 1.0 / cfg.physics_rate;
    let hover = params.hover_thrust();

    let mut state = DroneState::at_rest(wps.positions[0], cfg.yaw_ref);
    let mut memory = ControllerState::default();
    let mut entries = Vec::with_capacity(wps.len());

    for (k, target) in wps.positions.iter().enumerate() {
        let target_velocity = if cfg.velocity_feedforward && k + 1 < wps.len() {
            (wps.positions[k + 1] - target) * cfg.control_rate
        } else {
            Vector3::zeros()
        };
        let pos_cmd = position_control(
            &state,
            target,
            &target_velocity,
            cfg.yaw_ref,
            params,
            gains,
            &mut memory,
            dt_control,
        );
        let dfz = pos_cmd.force[2] - hover;

        let pre_step_state = state;
        let mut logged_command = None;
        for _ in 0..substeps {
            let moments = attitude_control(&state, &pos_cmd.attitude, gains);
            let command = PlantCommand {
                dfz,
                mx: moments[0],
                my: moments[1],
                mz: moments[2],
            };
            if logged_command.is_none() {
                logged_command = Some(command);
            }
            state = plant.step(&state, &command, dt_physics)?;
        }

        entries.push(SimLogEntry {
            t: k as f64 * dt_control,
            waypoint: *target,
            state: pre_step_state,
            command: logged_command.expect("at least one substep per tick"),
        });
    }

    Ok(SimLog {
        control_rate: cfg.control_rate,
        entries,
    })
}

/// Error statistics of a tracking log.
pub fn compute_metrics(log: &SimLog) -> Result<TrackingMetrics, SimError> {
    if log.entries.is_empty() {
        return Err(SimError::EmptyLog);
    }
    let mut sum_sq = [0.0_f64; 3];
    let mut max_abs = [0.0_f64; 3];
    for entry in &log.entries {
        let e = entry.position_error();
        for a in 0..3 {
            sum_sq[a] += e[a] * e[a];
            max_abs[a] = max_abs[a].max(e[a].abs());
        }
    }
    let n = log.entries.len() as f64;
    let rms = [
        (sum_sq[0] / n).sqrt(),
        (sum_sq[1] / n).sqrt(),
        (sum_sq[2] / n).sqrt(),
    ];
    let final_error_norm = log
        .entries
        .last()
        .expect("log checked non-empty")
        .position_error()
        .norm();
    Ok(TrackingMetrics {
        rms,
        max_abs,
        final_error_norm,
    })
}

/// One swarm member: a uniquely addressed drone with its own trajectory and
/// configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmMember {
    pub uri: String,
    pub waypoints: WaypointList,
    pub gains: GainSet,
    pub params: DroneParams,
}

/// Simulate every member independently (no interaction forces). Members run
/// in parallel; results keep the input order, so output is deterministic.
pub fn run_swarm(
    members: &[SwarmMember],
    cfg: &SimConfig,
) -> Result<Vec<(String, SimLog)>, SimError> {
    for (i, m) in members.iter().enumerate() {
        if members[..i].iter().any(|prev| prev.uri == m.uri) {
            return Err(SimError::DuplicateUri(m.uri.clone()));
        }
    }
    members
        .par_iter()
        .map(|m| {
            run_tracking(&m.waypoints, &m.params, &m.gains, cfg)
                .map(|log| (m.uri.clone(), log))
        })
        .collect()
}
