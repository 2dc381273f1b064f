//! Waypoint-tracking flight controller: position PID with gravity
//! feedforward feeding a fast attitude PD loop.
//!
//! The position loop turns waypoint error into a desired force vector
//!
//! ```text
//! F_des = m g zhat + m (Kp e + Ki int(e) + Kd (v_ff - v))
//! ```
//!
//! capped in magnitude, then splits it into a vertical thrust deviation and
//! a desired tilt (pitch toward +x, roll toward -y, yaw held at the
//! reference). The attitude loop converts attitude error and body rates into
//! moments. The two loops run at different rates: position at the waypoint
//! rate, attitude once per physics substep, mirroring the usual cascade where
//! the inner loop is several times faster than the outer one.

use nalgebra::Vector3;
use thiserror::Error;

use crate::kv::{KvDoc, KvError};
use crate::plant::{wrap_angle, DroneParams, DroneState};

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("gain `{name}` must be non-negative and finite, got {value}")]
    NegativeGain { name: &'static str, value: f64 },
    #[error("limit `{name}` must be positive, got {value}")]
    NonPositiveLimit { name: &'static str, value: f64 },
    #[error(transparent)]
    Config(#[from] KvError),
}

/// Per-axis PID gains, attitude gains, and saturation limits.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    /// Position proportional gain, 1/s^2.
    pub kp: Vector3<f64>,
    /// Position integral gain, 1/s^3.
    pub ki: Vector3<f64>,
    /// Position derivative gain, 1/s.
    pub kd: Vector3<f64>,
    /// Attitude proportional gain, N m/rad.
    pub kp_att: Vector3<f64>,
    /// Attitude rate gain, N m s/rad.
    pub kd_att: Vector3<f64>,
    /// Per-axis bound on the error integral, m s.
    pub integrator_clamp: f64,
    /// Bound on commanded total thrust magnitude, N.
    pub thrust_cap: f64,
    /// Per-axis bound on commanded moments, N m.
    pub moment_cap: f64,
}

impl Default for GainSet {
    fn default() -> Self {
        Self {
            kp: Vector3::from_element(100.0),
            ki: Vector3::from_element(1.0),
            kd: Vector3::from_element(9.0),
            kp_att: Vector3::from_element(5.0e-2),
            kd_att: Vector3::from_element(1.5e-3),
            integrator_clamp: 0.5,
            thrust_cap: 0.6,
            moment_cap: 1.0e-2,
        }
    }
}

impl GainSet {
    pub fn validate(&self) -> Result<(), ControllerError> {
        let groups: [(&'static str, &Vector3<f64>); 5] = [
            ("kp", &self.kp),
            ("ki", &self.ki),
            ("kd", &self.kd),
            ("kp_att", &self.kp_att),
            ("kd_att", &self.kd_att),
        ];
        for (name, v) in groups {
            if v.iter().any(|c| !c.is_finite() || *c < 0.0) {
                return Err(ControllerError::NegativeGain {
                    name,
                    value: v.min(),
                });
            }
        }
        for (name, value) in [
            ("integrator_clamp", self.integrator_clamp),
            ("thrust_cap", self.thrust_cap),
            ("moment_cap", self.moment_cap),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ControllerError::NonPositiveLimit { name, value });
            }
        }
        Ok(())
    }

    const SCALAR_KEYS: [&'static str; 5] = ["kp", "ki", "kd", "kp_att", "kd_att"];
    const LIMIT_KEYS: [&'static str; 3] = ["integrator_clamp", "thrust_cap", "moment_cap"];

    /// Overlay a key-value document onto the defaults. A bare gain key
    /// (`kp = 25`) broadcasts to all axes; a suffixed key (`kp_z = 40`)
    /// overrides one axis and wins over the broadcast.
    pub fn from_kv(doc: &KvDoc) -> Result<Self, ControllerError> {
        let mut allowed: Vec<String> = Vec::new();
        for key in Self::SCALAR_KEYS {
            allowed.push(key.to_string());
            for axis in ["x", "y", "z"] {
                allowed.push(format!("{key}_{axis}"));
            }
        }
        for key in Self::LIMIT_KEYS {
            allowed.push(key.to_string());
        }
        let allowed_refs: Vec<&str> = allowed.iter().map(|s| s.as_str()).collect();
        doc.reject_unknown(&allowed_refs)?;

        let mut gains = Self::default();
        {
            let fields: [(&str, &mut Vector3<f64>); 5] = [
                ("kp", &mut gains.kp),
                ("ki", &mut gains.ki),
                ("kd", &mut gains.kd),
                ("kp_att", &mut gains.kp_att),
                ("kd_att", &mut gains.kd_att),
            ];
            for (key, field) in fields {
                if let Some(v) = doc.get_f64(key)? {
                    *field = Vector3::from_element(v);
                }
                for (axis, idx) in [("x", 0usize), ("y", 1), ("z", 2)] {
                    if let Some(v) = doc.get_f64(&format!("{key}_{axis}"))? {
                        field[idx] = v;
                    }
                }
            }
        }
        if let Some(v) = doc.get_f64("integrator_clamp")? {
            gains.integrator_clamp = v;
        }
        if let Some(v) = doc.get_f64("thrust_cap")? {
            gains.thrust_cap = v;
        }
        if let Some(v) = doc.get_f64("moment_cap")? {
            gains.moment_cap = v;
        }
        gains.validate()?;
        Ok(gains)
    }

    pub fn to_kv(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        let fields: [(&str, &Vector3<f64>); 5] = [
            ("kp", &self.kp),
            ("ki", &self.ki),
            ("kd", &self.kd),
            ("kp_att", &self.kp_att),
            ("kd_att", &self.kd_att),
        ];
        for (key, v) in fields {
            if v[0] == v[1] && v[1] == v[2] {
                doc.set(key, v[0]);
            } else {
                doc.set(&format!("{key}_x"), v[0]);
                doc.set(&format!("{key}_y"), v[1]);
                doc.set(&format!("{key}_z"), v[2]);
            }
        }
        doc.set("integrator_clamp", self.integrator_clamp);
        doc.set("thrust_cap", self.thrust_cap);
        doc.set("moment_cap", self.moment_cap);
        doc
    }
}

/// Mutable controller memory: the error integral and the last error seen.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControllerState {
    pub integral: Vector3<f64>,
    pub prev_error: Vector3<f64>,
}

impl ControllerState {
    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

/// Desired force and the attitude that realizes it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionCommand {
    /// Capped desired force vector, N, world axes.
    pub force: Vector3<f64>,
    /// (roll, pitch, yaw) realizing the force direction, rad.
    pub attitude: Vector3<f64>,
    /// Commanded total thrust `|force|`, N.
    pub thrust: f64,
}

/// Position loop: waypoint error to desired force and attitude.
///
/// Call once per waypoint tick with that tick's duration `dt`; the error
/// integral accumulates here and nowhere else. `target_velocity` is the
/// optional feedforward (zero without it).
pub fn position_control(
    s: &DroneState,
    target: &Vector3<f64>,
    target_velocity: &Vector3<f64>,
    yaw_ref: f64,
    params: &DroneParams,
    gains: &GainSet,
    state: &mut ControllerState,
    dt: f64,
) -> PositionCommand {
    let e = target - s.position;
    state.integral += e * dt;
    state.integral = state.integral.map(|c| {
        c.clamp(-gains.integrator_clamp, gains.integrator_clamp)
    });
    state.prev_error = e;

    let e_dot = target_velocity - s.velocity;
    let accel = gains.kp.component_mul(&e)
        + gains.ki.component_mul(&state.integral)
        + gains.kd.component_mul(&e_dot);
    let mut force = params.mass * (accel + Vector3::new(0.0, 0.0, params.g));

    let magnitude = force.norm();
    if magnitude > gains.thrust_cap {
        force *= gains.thrust_cap / magnitude;
    }
    let thrust = force.norm();

    let attitude = if thrust > 0.0 {
        let pitch = force[0].atan2(force[2]);
        let roll = (-force[1]).atan2(force[0].hypot(force[2]));
        Vector3::new(roll, pitch, wrap_angle(yaw_ref))
    } else {
        Vector3::new(0.0, 0.0, wrap_angle(yaw_ref))
    };

    PositionCommand {
        force,
        attitude,
        thrust,
    }
}

/// Attitude loop: per-axis PD on wrapped attitude error, capped moments.
/// Returns (Mx, My, Mz).
pub fn attitude_control(
    s: &DroneState,
    attitude_des: &Vector3<f64>,
    gains: &GainSet,
) -> Vector3<f64> {
    let error = Vector3::new(
        wrap_angle(attitude_des[0] - s.attitude[0]),
        wrap_angle(attitude_des[1] - s.attitude[1]),
        wrap_angle(attitude_des[2] - s.attitude[2]),
    );
    let raw = gains.kp_att.component_mul(&error) - gains.kd_att.component_mul(&s.rates);
    raw.map(|m| m.clamp(-gains.moment_cap, gains.moment_cap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn params() -> DroneParams {
        DroneParams::default()
    }

    fn hover_at(target: Vector3<f64>) -> DroneState {
        DroneState::at_rest(target, FRAC_PI_2)
    }

    #[test]
    fn default_gains_validate() {
        GainSet::default().validate().unwrap();
    }

    #[test]
    fn gain_validation_rejects_bad_values() {
        let mut g = GainSet::default();
        g.kp[1] = -1.0;
        assert!(g.validate().is_err());
        let mut g = GainSet::default();
        g.thrust_cap = 0.0;
        assert!(g.validate().is_err());
        let mut g = GainSet::default();
        g.kd_att[2] = f64::NAN;
        assert!(g.validate().is_err());
    }

    #[test]
    fn hover_fixed_point_commands_pure_weight() {
        let p = params();
        let target = Vector3::new(0.0, 0.0, 1.0);
        let s = hover_at(target);
        let mut cs = ControllerState::default();
        let cmd = position_control(
            &s,
            &target,
            &Vector3::zeros(),
            FRAC_PI_2,
            &p,
            &GainSet::default(),
            &mut cs,
            1.0 / 48.0,
        );
        assert_abs_diff_eq!(cmd.force[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cmd.force[1], 0.0, epsilon = 1e-15);
        assert_relative_eq!(cmd.force[2], 0.26487, max_relative = 1e-10);
        assert_relative_eq!(cmd.thrust, p.hover_thrust(), max_relative = 1e-12);
        assert_eq!(cmd.attitude, Vector3::new(0.0, 0.0, FRAC_PI_2));
        let moments = attitude_control(&s, &cmd.attitude, &GainSet::default());
        assert_eq!(moments, Vector3::zeros());
    }

    #[test]
    fn x_error_pitches_nose_toward_plus_x() {
        let p = params();
        let target = Vector3::new(0.5, 0.0, 1.0);
        let s = hover_at(Vector3::new(0.0, 0.0, 1.0));
        let mut cs = ControllerState::default();
        let mut gains = GainSet::default();
        gains.ki = Vector3::zeros();
        gains.kd = Vector3::zeros();
        let cmd = position_control(
            &s,
            &target,
            &Vector3::zeros(),
            FRAC_PI_2,
            &p,
            &gains,
            &mut cs,
            1.0 / 48.0,
        );
        assert!(cmd.attitude[1] > 0.0, "pitch should lean toward +x");
        assert_abs_diff_eq!(cmd.attitude[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn y_error_rolls_negative() {
        // Pushing toward +y needs negative roll in this sign convention.
        let p = params();
        let target = Vector3::new(0.0, 0.5, 1.0);
        let s = hover_at(Vector3::new(0.0, 0.0, 1.0));
        let mut cs = ControllerState::default();
        let cmd = position_control(
            &s,
            &target,
            &Vector3::zeros(),
            FRAC_PI_2,
            &p,
            &GainSet::default(),
            &mut cs,
            1.0 / 48.0,
        );
        assert!(cmd.attitude[0] < 0.0, "roll should lean toward +y");
    }

    #[test]
    fn zero_gains_leave_gravity_feedforward() {
        let p = params();
        let mut gains = GainSet::default();
        gains.kp = Vector3::zeros();
        gains.ki = Vector3::zeros();
        gains.kd = Vector3::zeros();
        let s = hover_at(Vector3::new(9.0, -4.0, 0.2));
        let mut cs = ControllerState::default();
        let cmd = position_control(
            &s,
            &Vector3::new(-3.0, 7.0, 2.0),
            &Vector3::zeros(),
            FRAC_PI_2,
            &p,
            &gains,
            &mut cs,
            0.02,
        );
        assert_eq!(cmd.force, Vector3::new(0.0, 0.0, p.hover_thrust()));
    }

    #[test]
    fn thrust_magnitude_is_capped_exactly() {
        let p = params();
        let s = hover_at(Vector3::zeros());
        let mut cs = ControllerState::default();
        let cmd = position_control(
            &s,
            &Vector3::new(50.0, 40.0, 30.0),
            &Vector3::zeros(),
            0.0,
            &p,
            &GainSet::default(),
            &mut cs,
            0.02,
        );
        assert_relative_eq!(cmd.thrust, GainSet::default().thrust_cap, max_relative = 1e-12);
        assert_relative_eq!(cmd.force.norm(), cmd.thrust, max_relative = 1e-12);
    }

    #[test]
    fn integrator_respects_clamp_for_any_sequence() {
        let p = params();
        let gains = GainSet::default();
        let s = hover_at(Vector3::zeros());
        let mut cs = ControllerState::default();
        for k in 0..10_000 {
            let target = Vector3::new(1e3 * (k as f64).sin().signum(), 1e3, -1e3);
            position_control(
                &s,
                &target,
                &Vector3::zeros(),
                0.0,
                &p,
                &gains,
                &mut cs,
                0.02,
            );
            assert!(cs.integral.amax() <= gains.integrator_clamp + 1e-15);
        }
    }

    #[test]
    fn yaw_error_maps_linearly_to_moment_before_cap() {
        let mut gains = GainSet::default();
        gains.kp_att = Vector3::new(0.0, 0.0, 4e-3);
        gains.kd_att = Vector3::zeros();
        gains.moment_cap = 1.0;
        let s = DroneState::at_rest(Vector3::zeros(), 0.0);
        let des = Vector3::new(0.0, 0.0, FRAC_PI_2);
        let m = attitude_control(&s, &des, &gains);
        assert_relative_eq!(m[2], 4e-3 * FRAC_PI_2, max_relative = 1e-12);
        assert_eq!(m[0], 0.0);
        assert_eq!(m[1], 0.0);
    }

    #[test]
    fn moments_clamp_to_cap_with_sign() {
        let mut gains = GainSet::default();
        gains.kp_att = Vector3::from_element(10.0);
        gains.moment_cap = 2e-3;
        let s = DroneState::at_rest(Vector3::zeros(), 0.0);
        let m = attitude_control(&s, &Vector3::new(1.0, -1.0, 2.0), &gains);
        assert_eq!(m[0], 2e-3);
        assert_eq!(m[1], -2e-3);
        assert_eq!(m[2], 2e-3);
    }

    #[test]
    fn attitude_error_wraps_across_pi() {
        let mut gains = GainSet::default();
        gains.kp_att = Vector3::from_element(1.0);
        gains.kd_att = Vector3::zeros();
        gains.moment_cap = 10.0;
        let mut s = DroneState::at_rest(Vector3::zeros(), 0.0);
        s.attitude[2] = 3.1;
        let m = attitude_control(&s, &Vector3::new(0.0, 0.0, -3.1), &gains);
        // Short way around: -3.1 - 3.1 = -6.2 wraps to about +0.083 rad.
        assert_relative_eq!(m[2], -6.2 + 2.0 * PI, max_relative = 1e-10);
        assert!(m[2] > 0.0);
    }

    #[test]
    fn velocity_feedforward_shifts_derivative_term() {
        let p = params();
        let mut gains = GainSet::default();
        gains.kp = Vector3::zeros();
        gains.ki = Vector3::zeros();
        gains.kd = Vector3::from_element(2.0);
        let target = Vector3::new(0.0, 0.0, 1.0);
        let s = hover_at(target);
        let mut cs = ControllerState::default();
        let vff = Vector3::new(0.3, 0.0, 0.0);
        let cmd = position_control(&s, &target, &vff, FRAC_PI_2, &p, &gains, &mut cs, 0.02);
        assert_relative_eq!(cmd.force[0], p.mass * 2.0 * 0.3, max_relative = 1e-12);
    }

    #[test]
    fn reset_zeroes_memory_idempotently() {
        let mut cs = ControllerState {
            integral: Vector3::new(0.1, -0.2, 0.3),
            prev_error: Vector3::new(1.0, 2.0, 3.0),
        };
        cs.reset();
        assert_eq!(cs, ControllerState::default());
        cs.reset();
        assert_eq!(cs, ControllerState::default());
    }

    #[test]
    fn command_sequence_is_deterministic() {
        let p = params();
        let gains = GainSet::default();
        let run = || {
            let mut cs = ControllerState::default();
            let mut out = Vec::new();
            let mut s = hover_at(Vector3::new(0.0, 0.0, 1.0));
            for k in 0..200 {
                let target = Vector3::new((k as f64 * 0.1).sin() * 0.2, 0.0, 1.0);
                let cmd = position_control(
                    &s,
                    &target,
                    &Vector3::zeros(),
                    FRAC_PI_2,
                    &p,
                    &gains,
                    &mut cs,
                    1.0 / 48.0,
                );
                s.position[0] += 1e-4;
                out.push((cmd.force, cmd.attitude, cmd.thrust));
            }
            out
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn kv_round_trip_and_broadcast() {
        let doc = KvDoc::parse("kp = 25\nkp_z = 40\nthrust_cap = 0.8").unwrap();
        let g = GainSet::from_kv(&doc).unwrap();
        assert_eq!(g.kp, Vector3::new(25.0, 25.0, 40.0));
        assert_eq!(g.thrust_cap, 0.8);
        assert_eq!(g.ki, GainSet::default().ki);
        let back = GainSet::from_kv(&g.to_kv()).unwrap();
        assert_eq!(back, g);
        assert!(GainSet::from_kv(&KvDoc::parse("bogus = 1").unwrap()).is_err());
    }
}
