//! Linearized micro-quadcopter surrogate: four decoupled subsystems about
//! hover, a fixed-step RK4 stepper, and the motor PWM/RPM signal map.
//!
//! The deviation model about hover splits into independent chains:
//!
//! ```text
//! vertical      dw = dFz/m,     dz = w
//! yaw           dr = Mz/Izz,    dpsi = r
//! lateral       dp = Mx/Ixx,    dphi = p,    dv = -g*phi,  dy = v
//! longitudinal  dq = My/Iyy,    dtheta = q,  du = +g*theta, dx = u
//! ```
//!
//! Roll tilts the thrust vector toward -y, pitch toward +x; gravity cancels
//! against hover thrust, so position states can be absolute coordinates (the
//! model is invariant to constant offsets). Every chain is nilpotent, which
//! makes one RK4 step with a held command exact to machine precision, not an
//! approximation.

use nalgebra::{SMatrix, SVector, Vector3};
use thiserror::Error;

use crate::kv::{KvDoc, KvError};

#[derive(Debug, Error)]
pub enum PlantError {
    #[error("drone parameter `{name}` must be positive, got {value}")]
    NonPositiveParam { name: &'static str, value: f64 },
    #[error("plant step must satisfy 0 < dt <= {max} s, got {dt}")]
    StepOutOfRange { dt: f64, max: f64 },
    #[error("PWM {0} outside [0, 65535]")]
    PwmOutOfRange(f64),
    #[error("RPM {rpm} outside the motor map image [{min}, {max}]")]
    RpmOutOfRange { rpm: f64, min: f64, max: f64 },
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error(transparent)]
    Config(#[from] KvError),
}

/// Longest admissible RK4 step; the controller runs well above this rate.
pub const MAX_PLANT_STEP: f64 = 0.01;

/// Physical parameters of the surrogate drone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DroneParams {
    /// Mass, kg.
    pub mass: f64,
    /// Roll inertia, kg m^2.
    pub ixx: f64,
    /// Pitch inertia, kg m^2.
    pub iyy: f64,
    /// Yaw inertia, kg m^2.
    pub izz: f64,
    /// Gravitational acceleration, m/s^2.
    pub g: f64,
}

impl Default for DroneParams {
    fn default() -> Self {
        Self {
            mass: 0.027,
            ixx: 1.4e-5,
            iyy: 1.4e-5,
            izz: 2.17e-5,
            g: 9.81,
        }
    }
}

impl DroneParams {
    pub fn validate(&self) -> Result<(), PlantError> {
        for (name, value) in [
            ("mass", self.mass),
            ("ixx", self.ixx),
            ("iyy", self.iyy),
            ("izz", self.izz),
            ("g", self.g),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(PlantError::NonPositiveParam { name, value });
            }
        }
        Ok(())
    }

    /// Weight force, the hover thrust feedforward.
    pub fn hover_thrust(&self) -> f64 {
        self.mass * self.g
    }

    const KEYS: [&'static str; 5] = ["mass", "ixx", "iyy", "izz", "g"];

    /// Overlay values from a key-value document onto the defaults.
    pub fn from_kv(doc: &KvDoc) -> Result<Self, PlantError> {
        doc.reject_unknown(&Self::KEYS)?;
        let mut p = Self::default();
        if let Some(v) = doc.get_f64("mass")? {
            p.mass = v;
        }
        if let Some(v) = doc.get_f64("ixx")? {
            p.ixx = v;
        }
        if let Some(v) = doc.get_f64("iyy")? {
            p.iyy = v;
        }
        if let Some(v) = doc.get_f64("izz")? {
            p.izz = v;
        }
        if let Some(v) = doc.get_f64("g")? {
            p.g = v;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn to_kv(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        doc.set("mass", self.mass);
        doc.set("ixx", self.ixx);
        doc.set("iyy", self.iyy);
        doc.set("izz", self.izz);
        doc.set("g", self.g);
        doc
    }
}

/// Full kinematic state of the surrogate.
///
/// `attitude` is (roll phi, pitch theta, yaw psi), wrapped to (-pi, pi];
/// `rates` is (p, q, r), the matching body rates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DroneState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub attitude: Vector3<f64>,
    pub rates: Vector3<f64>,
}

impl DroneState {
    /// Level hover at a point: the controller's fixed point when the yaw
    /// reference matches `yaw`.
    pub fn at_rest(position: Vector3<f64>, yaw: f64) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            attitude: Vector3::new(0.0, 0.0, wrap_angle(yaw)),
            rates: Vector3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|c| c.is_finite())
            && self.velocity.iter().all(|c| c.is_finite())
            && self.attitude.iter().all(|c| c.is_finite())
            && self.rates.iter().all(|c| c.is_finite())
    }
}

/// Force/moment command about hover: thrust deviation plus body moments.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantCommand {
    /// Thrust deviation from hover, N.
    pub dfz: f64,
    /// Roll moment, N m.
    pub mx: f64,
    /// Pitch moment, N m.
    pub my: f64,
    /// Yaw moment, N m.
    pub mz: f64,
}

impl PlantCommand {
    pub const ZERO: Self = Self {
        dfz: 0.0,
        mx: 0.0,
        my: 0.0,
        mz: 0.0,
    };

    pub fn is_finite(&self) -> bool {
        self.dfz.is_finite() && self.mx.is_finite() && self.my.is_finite() && self.mz.is_finite()
    }
}

/// One decoupled chain `x' = A x + b u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subsystem<const N: usize> {
    pub a: SMatrix<f64, N, N>,
    pub b: SVector<f64, N>,
}

impl<const N: usize> Subsystem<N> {
    /// Classic RK4 step with the input held constant. The chain matrices are
    /// nilpotent, so this equals the exact zero-order-hold transition.
    fn rk4_step(&self, x: &SVector<f64, N>, u: f64, dt: f64) -> SVector<f64, N> {
        let f = |x: &SVector<f64, N>| self.a * x + self.b * u;
        let k1 = f(x);
        let k2 = f(&(x + k1 * (dt / 2.0)));
        let k3 = f(&(x + k2 * (dt / 2.0)));
        let k4 = f(&(x + k3 * dt));
        x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
    }
}

/// The four chains assembled for a parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadSubsystems {
    /// States [w, z], input dFz.
    pub vertical: Subsystem<2>,
    /// States [r, psi], input Mz.
    pub yaw: Subsystem<2>,
    /// States [p, phi, v, y], input Mx.
    pub lateral: Subsystem<4>,
    /// States [q, theta, u, x], input My (the pitch moment drives this
    /// chain; it divides by Iyy).
    pub longitudinal: Subsystem<4>,
}

pub fn build_subsystems(params: &DroneParams) -> Result<QuadSubsystems, PlantError> {
    params.validate()?;
    let chain2 = SMatrix::<f64, 2, 2>::from_row_slice(&[
        0.0, 0.0, //
        1.0, 0.0,
    ]);
    let chain4 = |coupling: f64| {
        SMatrix::<f64, 4, 4>::from_row_slice(&[
            0.0, 0.0, 0.0, 0.0, //
            1.0, 0.0, 0.0, 0.0, //
            0.0, coupling, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0,
        ])
    };
    let input2 = |gain: f64| SVector::<f64, 2>::new(gain, 0.0);
    let input4 = |gain: f64| SVector::<f64, 4>::new(gain, 0.0, 0.0, 0.0);
    Ok(QuadSubsystems {
        vertical: Subsystem {
            a: chain2,
            b: input2(1.0 / params.mass),
        },
        yaw: Subsystem {
            a: chain2,
            b: input2(1.0 / params.izz),
        },
        lateral: Subsystem {
            a: chain4(-params.g),
            b: input4(1.0 / params.ixx),
        },
        longitudinal: Subsystem {
            a: chain4(params.g),
            b: input4(1.0 / params.iyy),
        },
    })
}

/// Value-semantics plant stepper for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    pub params: DroneParams,
    subsystems: QuadSubsystems,
}

impl Plant {
    pub fn new(params: DroneParams) -> Result<Self, PlantError> {
        let subsystems = build_subsystems(&params)?;
        Ok(Self { params, subsystems })
    }

    /// Advance the full state one RK4 step under a held command.
    pub fn step(&self, s: &DroneState, cmd: &PlantCommand, dt: f64) -> Result<DroneState, PlantError> {
        if !(dt > 0.0) || dt > MAX_PLANT_STEP || !dt.is_finite() {
            return Err(PlantError::StepOutOfRange {
                dt,
                max: MAX_PLANT_STEP,
            });
        }
        if !s.is_finite() {
            return Err(PlantError::NonFinite("drone state"));
        }
        if !cmd.is_finite() {
            return Err(PlantError::NonFinite("plant command"));
        }

        let vert = self.subsystems.vertical.rk4_step(
            &SVector::<f64, 2>::new(s.velocity[2], s.position[2]),
            cmd.dfz,
            dt,
        );
        let yaw = self.subsystems.yaw.rk4_step(
            &SVector::<f64, 2>::new(s.rates[2], s.attitude[2]),
            cmd.mz,
            dt,
        );
        let lat = self.subsystems.lateral.rk4_step(
            &SVector::<f64, 4>::new(s.rates[0], s.attitude[0], s.velocity[1], s.position[1]),
            cmd.mx,
            dt,
        );
        let lon = self.subsystems.longitudinal.rk4_step(
            &SVector::<f64, 4>::new(s.rates[1], s.attitude[1], s.velocity[0], s.position[0]),
            cmd.my,
            dt,
        );

        Ok(DroneState {
            position: Vector3::new(lon[3], lat[3], vert[1]),
            velocity: Vector3::new(lon[2], lat[2], vert[0]),
            attitude: Vector3::new(wrap_angle(lat[1]), wrap_angle(lon[1]), wrap_angle(yaw[1])),
            rates: Vector3::new(lat[0], lon[0], yaw[0]),
        })
    }
}

/// Wrap an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    if a > -std::f64::consts::PI && a <= std::f64::consts::PI {
        return a;
    }
    let tau = std::f64::consts::TAU;
    let wrapped = a - tau * (a / tau).round();
    if wrapped <= -std::f64::consts::PI {
        wrapped + tau
    } else {
        wrapped
    }
}

const PWM_SLOPE: f64 = 0.2685;
const PWM_OFFSET: f64 = 4070.3;
pub const PWM_MAX: f64 = 65535.0;

/// Affine motor map from PWM command to rotor speed.
pub fn pwm_to_rpm(pwm: f64) -> Result<f64, PlantError> {
    if !pwm.is_finite() || !(0.0..=PWM_MAX).contains(&pwm) {
        return Err(PlantError::PwmOutOfRange(pwm));
    }
    Ok(PWM_SLOPE * pwm + PWM_OFFSET)
}

/// Inverse of [`pwm_to_rpm`] on its image.
pub fn rpm_to_pwm(rpm: f64) -> Result<f64, PlantError> {
    let min = PWM_OFFSET;
    let max = PWM_SLOPE * PWM_MAX + PWM_OFFSET;
    if !rpm.is_finite() || !(min..=max).contains(&rpm) {
        return Err(PlantError::RpmOutOfRange { rpm, min, max });
    }
    Ok((rpm - PWM_OFFSET) / PWM_SLOPE)
}
