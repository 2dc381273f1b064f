//! Space-to-lab trajectory scaling, waypoint resampling, and flight-volume
//! bounds checking.
//!
//! A relative-orbit trajectory spans hundreds of meters over hours; the
//! flight volume is a few meters flown for seconds. Positions shrink by a
//! distance factor, times by `source_span / sim_duration`, and velocities by
//! the ratio of the two, so the scaled path is the same curve traversed
//! proportionally faster. The lab z axis is offset upward so the trajectory
//! centers at a safe hover altitude.

use nalgebra::Vector3;
use thiserror::Error;

use crate::cw::{CwError, Frame, HillState, SampledTrajectory};

#[derive(Debug, Error)]
pub enum ScalingError {
    #[error("distance factor must be positive, got {0}")]
    NonPositiveDistanceFactor(f64),
    #[error("simulated duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("source span must be positive, got {0}")]
    NonPositiveSourceSpan(f64),
    #[error("volume extents must be positive, got ({0}, {1}, {2})")]
    NonPositiveExtent(f64, f64, f64),
    #[error("z offset must lie inside (0, z_extent), got {offset} with z_extent {extent}")]
    ZOffsetOutsideVolume { offset: f64, extent: f64 },
    #[error("expected a space-frame trajectory, got {0}")]
    WrongFrame(Frame),
    #[error("waypoint frequency must be positive, got {0}")]
    NonPositiveFrequency(f64),
    #[error(
        "requested duration {requested} s not covered by trajectory span [{start}, {end}] s"
    )]
    DurationNotCovered {
        requested: f64,
        start: f64,
        end: f64,
    },
    #[error("waypoint list is empty")]
    EmptyWaypointList,
    #[error("non-finite waypoint at index {0}")]
    NonFiniteWaypoint(usize),
    #[error(transparent)]
    Trajectory(#[from] CwError),
}

/// Distance and time compression from orbit scale to lab scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleConfig {
    /// Positions divide by this factor.
    pub distance_factor: f64,
    /// Wall-clock seconds the scaled trajectory should take.
    pub sim_duration: f64,
    /// Seconds of source trajectory being compressed.
    pub source_span: f64,
}

impl ScaleConfig {
    pub const DEFAULT_DISTANCE_FACTOR: f64 = 4000.0;

    pub fn new(distance_factor: f64, sim_duration: f64, source_span: f64) -> Result<Self, ScalingError> {
        if !(distance_factor > 0.0) || !distance_factor.is_finite() {
            return Err(ScalingError::NonPositiveDistanceFactor(distance_factor));
        }
        if !(sim_duration > 0.0) || !sim_duration.is_finite() {
            return Err(ScalingError::NonPositiveDuration(sim_duration));
        }
        if !(source_span > 0.0) || !source_span.is_finite() {
            return Err(ScalingError::NonPositiveSourceSpan(source_span));
        }
        Ok(Self {
            distance_factor,
            sim_duration,
            source_span,
        })
    }

    /// Source seconds per lab second.
    pub fn time_factor(&self) -> f64 {
        self.source_span / self.sim_duration
    }

    /// Lab speed per source speed: compressing time speeds motion up,
    /// shrinking distance slows it down.
    pub fn velocity_factor(&self) -> f64 {
        self.time_factor() / self.distance_factor
    }
}

/// The indoor flight volume, centered on x and y, floor at z = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabVolume {
    pub x_extent: f64,
    pub y_extent: f64,
    pub z_extent: f64,
    /// Altitude added to scaled z so the trajectory centers above the floor.
    pub z_offset: f64,
}

impl Default for LabVolume {
    fn default() -> Self {
        Self {
            x_extent: 4.0,
            y_extent: 3.0,
            z_extent: 2.5,
            z_offset: 1.0,
        }
    }
}

impl LabVolume {
    pub fn new(x_extent: f64, y_extent: f64, z_extent: f64, z_offset: f64) -> Result<Self, ScalingError> {
        if !(x_extent > 0.0 && y_extent > 0.0 && z_extent > 0.0) {
            return Err(ScalingError::NonPositiveExtent(x_extent, y_extent, z_extent));
        }
        if !(z_offset > 0.0 && z_offset < z_extent) {
            return Err(ScalingError::ZOffsetOutsideVolume {
                offset: z_offset,
                extent: z_extent,
            });
        }
        Ok(Self {
            x_extent,
            y_extent,
            z_extent,
            z_offset,
        })
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        p[0].abs() <= self.x_extent / 2.0
            && p[1].abs() <= self.y_extent / 2.0
            && (0.0..=self.z_extent).contains(&p[2])
    }
}

/// Fixed-frequency position setpoints; waypoint `k` is commanded at time
/// `k / frequency`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaypointList {
    pub frequency: f64,
    pub positions: Vec<Vector3<f64>>,
}

impl WaypointList {
    pub fn new(frequency: f64, positions: Vec<Vector3<f64>>) -> Result<Self, ScalingError> {
        if !(frequency > 0.0) || !frequency.is_finite() {
            return Err(ScalingError::NonPositiveFrequency(frequency));
        }
        if positions.is_empty() {
            return Err(ScalingError::EmptyWaypointList);
        }
        if let Some(idx) = positions.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(ScalingError::NonFiniteWaypoint(idx));
        }
        Ok(Self {
            frequency,
            positions,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn time_of(&self, k: usize) -> f64 {
        k as f64 / self.frequency
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.time_of(k))
    }
}

/// Shrink a space-frame trajectory into the flight volume.
///
/// Positions divide by the distance factor and z shifts up by the volume's
/// offset; times divide by the time factor; velocities scale by
/// `time_factor / distance_factor`.
pub fn scale_to_lab(
    traj: &SampledTrajectory,
    cfg: &ScaleConfig,
    vol: &LabVolume,
) -> Result<SampledTrajectory, ScalingError> {
    if traj.frame != Frame::Space {
        return Err(ScalingError::WrongFrame(traj.frame));
    }
    let tf = cfg.time_factor();
    let vf = cfg.velocity_factor();
    let times = traj.times.iter().map(|t| t / tf).collect();
    let states = traj
        .states
        .iter()
        .map(|s| HillState {
            x: s.x / cfg.distance_factor,
            y: s.y / cfg.distance_factor,
            z: s.z / cfg.distance_factor + vol.z_offset,
            vx: s.vx * vf,
            vy: s.vy * vf,
            vz: s.vz * vf,
        })
        .collect();
    Ok(SampledTrajectory::new(times, states, Frame::Lab)?)
}

/// Exact inverse of [`scale_to_lab`] for the same config and volume.
pub fn unscale_to_space(
    traj: &SampledTrajectory,
    cfg: &ScaleConfig,
    vol: &LabVolume,
) -> Result<SampledTrajectory, ScalingError> {
    if traj.frame != Frame::Lab {
        return Err(ScalingError::WrongFrame(traj.frame));
    }
    let tf = cfg.time_factor();
    let vf = cfg.velocity_factor();
    let times = traj.times.iter().map(|t| t * tf).collect();
    let states = traj
        .states
        .iter()
        .map(|s| HillState {
            x: s.x * cfg.distance_factor,
            y: s.y * cfg.distance_factor,
            z: (s.z - vol.z_offset) * cfg.distance_factor,
            vx: s.vx / vf,
            vy: s.vy / vf,
            vz: s.vz / vf,
        })
        .collect();
    Ok(SampledTrajectory::new(times, states, Frame::Space)?)
}

/// Resample a lab trajectory into `round(frequency * duration)` waypoints by
/// linear interpolation. The trajectory must cover `[0, duration]` up to the
/// last waypoint time.
pub fn resample_waypoints(
    traj: &SampledTrajectory,
    frequency: f64,
    duration: f64,
) -> Result<WaypointList, ScalingError> {
    if !(frequency > 0.0) || !frequency.is_finite() {
        return Err(ScalingError::NonPositiveFrequency(frequency));
    }
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(ScalingError::NonPositiveDuration(duration));
    }
    let count = (frequency * duration).round() as usize;
    if count == 0 {
        return Err(ScalingError::EmptyWaypointList);
    }
    let last_time = (count - 1) as f64 / frequency;
    if traj.start_time() > 0.0 || traj.end_time() < last_time {
        return Err(ScalingError::DurationNotCovered {
            requested: duration,
            start: traj.start_time(),
            end: traj.end_time(),
        });
    }
    let positions = (0..count)
        .map(|k| {
            let t = k as f64 / frequency;
            traj.position_at(t)
                .expect("coverage was checked against the last waypoint time")
        })
        .collect();
    WaypointList::new(frequency, positions)
}

/// One out-of-volume waypoint, reported per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsViolation {
    pub index: usize,
    /// 0 = x, 1 = y, 2 = z.
    pub axis: usize,
    pub value: f64,
}

impl std::fmt::Display for BoundsViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let axis = ["x", "y", "z"][self.axis.min(2)];
        write!(f, "waypoint {}: {} = {} m outside volume", self.index, axis, self.value)
    }
}

/// Check every waypoint against the volume: |x| and |y| within half extents,
/// z within [0, z_extent]. Violations are data, not errors.
pub fn check_bounds(wps: &WaypointList, vol: &LabVolume) -> Vec<BoundsViolation> {
    let mut violations = Vec::new();
    for (i, p) in wps.positions.iter().enumerate() {
        if p[0].abs() > vol.x_extent / 2.0 {
            violations.push(BoundsViolation {
                index: i,
                axis: 0,
                value: p[0],
            });
        }
        if p[1].abs() > vol.y_extent / 2.0 {
            violations.push(BoundsViolation {
                index: i,
                axis: 1,
                value: p[1],
            });
        }
        if p[2] < 0.0 || p[2] > vol.z_extent {
            violations.push(BoundsViolation {
                index: i,
                axis: 2,
                value: p[2],
            });
        }
    }
    violations
}
