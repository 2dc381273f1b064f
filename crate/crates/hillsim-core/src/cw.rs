//! Linearized Clohessy-Wiltshire relative-motion dynamics in Hill's frame.
//!
//! The state is the deputy's position and velocity relative to a chief on a
//! circular orbit, expressed in the rotating Hill frame: x radial (Earth to
//! chief), z along the orbital angular momentum, y completing the triad. With
//! mean motion `n` and deputy mass `m`, the continuous model is
//!
//! ```text
//! x'' =  3n^2 x + 2n y' + Fx/m
//! y'' = -2n x'         + Fy/m
//! z'' = -n^2 z         + Fz/m
//! ```
//!
//! Zero-thrust solutions close into relative ellipses (natural motion
//! trajectories) exactly when `vy0 = -2 n x0` and `y0 = 2 vx0 / n`; those two
//! residuals are exposed by [`closure_residuals`]. The out-of-plane z channel
//! is a decoupled harmonic oscillator at frequency `n`.

use nalgebra::{Matrix6, Matrix6x3, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rk45::{self, Rk45Error, Rk45Options};

/// Mean motion of a low-Earth circular reference orbit, rad/s.
pub const EARTH_MEAN_MOTION: f64 = 0.001027;

#[derive(Debug, Error)]
pub enum CwError {
    #[error("mean motion must be positive, got {0}")]
    NonPositiveMeanMotion(f64),
    #[error("deputy mass must be positive, got {0}")]
    NonPositiveMass(f64),
    #[error("integration failed: {0}")]
    Integration(#[from] Rk45Error),
    #[error("trajectory must hold at least one sample")]
    EmptyTrajectory,
    #[error("trajectory times must be strictly increasing (violated at index {index})")]
    NonMonotonicTimes { index: usize },
    #[error("trajectory times must start at or after zero, got {0}")]
    NegativeStartTime(f64),
    #[error("trajectory sample count {times} does not match state count {states}")]
    LengthMismatch { times: usize, states: usize },
    #[error("thrust sequence holds {provided} entries but {required} steps were requested")]
    ThrustSequenceTooShort { provided: usize, required: usize },
    #[error("step size must be positive and finite, got {0}")]
    InvalidStepSize(f64),
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },
}

/// Chief-orbit context: mean motion `n` and deputy mass `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitalContext {
    /// Mean orbital motion, rad/s.
    pub n: f64,
    /// Deputy spacecraft mass, kg.
    pub m: f64,
}

impl Default for OrbitalContext {
    fn default() -> Self {
        Self {
            n: EARTH_MEAN_MOTION,
            m: 1.0,
        }
    }
}

impl OrbitalContext {
    pub fn new(n: f64, m: f64) -> Result<Self, CwError> {
        if !(n > 0.0) || !n.is_finite() {
            return Err(CwError::NonPositiveMeanMotion(n));
        }
        if !(m > 0.0) || !m.is_finite() {
            return Err(CwError::NonPositiveMass(m));
        }
        Ok(Self { n, m })
    }

    /// Orbital period of the chief, `2*pi/n`.
    pub fn period(&self) -> f64 {
        std::f64::consts::TAU / self.n
    }
}

/// Relative position [m] and velocity [m/s] in Hill's frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HillState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
}

impl HillState {
    pub fn new(x: f64, y: f64, z: f64, vx: f64, vy: f64, vz: f64) -> Self {
        Self { x, y, z, vx, vy, vz }
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn velocity(&self) -> Vector3<f64> {
        Vector3::new(self.vx, self.vy, self.vz)
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(self.x, self.y, self.z, self.vx, self.vy, self.vz)
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|c| c.is_finite())
    }
}

/// Thrust force on the deputy, N, expressed in Hill's frame axes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlThrust {
    pub fx: f64,
    pub fy: f64,
    pub fz: f64,
}

impl ControlThrust {
    pub const ZERO: Self = Self {
        fx: 0.0,
        fy: 0.0,
        fz: 0.0,
    };

    pub fn new(fx: f64, fy: f64, fz: f64) -> Self {
        Self { fx, fy, fz }
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.fx, self.fy, self.fz)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn magnitude(&self) -> f64 {
        self.to_vector().norm()
    }

    pub fn is_finite(&self) -> bool {
        self.fx.is_finite() && self.fy.is_finite() && self.fz.is_finite()
    }
}

/// The continuous model `s' = A s + B u` as explicit matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub a: Matrix6<f64>,
    pub b: Matrix6x3<f64>,
}

/// Which frame a trajectory's coordinates live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// Hill's frame at orbital scale (hundreds of meters, hours).
    Space,
    /// Flight-volume scale (meters, seconds), z offset above the floor.
    Lab,
}

impl std::fmt::Display for Frame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Frame::Space => write!(f, "space"),
            Frame::Lab => write!(f, "lab"),
        }
    }
}

impl std::str::FromStr for Frame {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "space" => Ok(Frame::Space),
            "lab" => Ok(Frame::Lab),
            other => Err(format!("unknown frame tag `{other}` (expected space|lab)")),
        }
    }
}

/// A time-stamped state sequence, tagged with the frame it lives in.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<HillState>,
    pub frame: Frame,
}

impl SampledTrajectory {
    pub fn new(times: Vec<f64>, states: Vec<HillState>, frame: Frame) -> Result<Self, CwError> {
        if times.len() != states.len() {
            return Err(CwError::LengthMismatch {
                times: times.len(),
                states: states.len(),
            });
        }
        if times.is_empty() {
            return Err(CwError::EmptyTrajectory);
        }
        if !(times[0] >= 0.0) {
            return Err(CwError::NegativeStartTime(times[0]));
        }
        for i in 1..times.len() {
            if !(times[i] > times[i - 1]) {
                return Err(CwError::NonMonotonicTimes { index: i });
            }
        }
        Ok(Self {
            times,
            states,
            frame,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    pub fn duration(&self) -> f64 {
        self.end_time() - self.start_time()
    }

    /// Position at `t` by linear interpolation between bracketing samples.
    /// `t` must lie within the sampled span.
    pub fn position_at(&self, t: f64) -> Option<Vector3<f64>> {
        if t < self.start_time() || t > self.end_time() {
            return None;
        }
        let idx = self.times.partition_point(|&ti| ti <= t);
        if idx == 0 {
            return Some(self.states[0].position());
        }
        if idx == self.times.len() {
            return Some(self.states[idx - 1].position());
        }
        let (t0, t1) = (self.times[idx - 1], self.times[idx]);
        let w = (t - t0) / (t1 - t0);
        let p0 = self.states[idx - 1].position();
        let p1 = self.states[idx].position();
        Some(p0 + w * (p1 - p0))
    }
}

/// Assemble the continuous system matrices for the given context.
pub fn build_continuous_system(ctx: &OrbitalContext) -> LinearSystem {
    let n = ctx.n;
    let mut a = Matrix6::zeros();
    a[(0, 3)] = 1.0;
    a[(1, 4)] = 1.0;
    a[(2, 5)] = 1.0;
    a[(3, 0)] = 3.0 * n * n;
    a[(3, 4)] = 2.0 * n;
    a[(4, 3)] = -2.0 * n;
    a[(5, 2)] = -n * n;

    let mut b = Matrix6x3::zeros();
    let inv_m = 1.0 / ctx.m;
    b[(3, 0)] = inv_m;
    b[(4, 1)] = inv_m;
    b[(5, 2)] = inv_m;

    LinearSystem { a, b }
}

/// Time derivative of the state under thrust `u`, evaluated componentwise.
pub fn cw_derivative(s: &HillState, u: &ControlThrust, ctx: &OrbitalContext) -> HillState {
    let n = ctx.n;
    let inv_m = 1.0 / ctx.m;
    HillState {
        x: s.vx,
        y: s.vy,
        z: s.vz,
        vx: 3.0 * n * n * s.x + 2.0 * n * s.vy + u.fx * inv_m,
        vy: -2.0 * n * s.vx + u.fy * inv_m,
        vz: -n * n * s.z + u.fz * inv_m,
    }
}

/// Integrator tolerances for continuous propagation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rel: 1e-9,
            abs: 1e-12,
        }
    }
}

/// Adaptive RK45 solution of the continuous model, evaluable at any time in
/// its span.
#[derive(Debug, Clone)]
pub struct CwSolution {
    dense: rk45::Solution<6>,
}

impl CwSolution {
    pub fn t_span(&self) -> (f64, f64) {
        self.dense.t_span()
    }

    pub fn state_at(&self, t: f64) -> HillState {
        HillState::from_vector(&self.dense.eval(t))
    }

    pub fn final_state(&self) -> HillState {
        HillState::from_vector(self.dense.final_state())
    }

    /// Resample at explicit times (space frame).
    pub fn sample(&self, times: &[f64]) -> Result<SampledTrajectory, CwError> {
        let states = times.iter().map(|&t| self.state_at(t)).collect();
        SampledTrajectory::new(times.to_vec(), states, Frame::Space)
    }

    /// Resample at `count` uniformly spaced times covering the whole span.
    pub fn sample_uniform(&self, count: usize) -> Result<SampledTrajectory, CwError> {
        let (t0, t1) = self.t_span();
        let count = count.max(1);
        let times = if count == 1 || t1 == t0 {
            vec![t0]
        } else {
            (0..count)
                .map(|i| t0 + (t1 - t0) * i as f64 / (count - 1) as f64)
                .collect()
        };
        self.sample(&times)
    }
}

/// Propagate the continuous model under a time-varying thrust program.
///
/// The initial step defaults to 1e-4 of the orbital period, clamped to the
/// span; a zero-length span yields a single-sample solution.
pub fn propagate_continuous<F>(
    ic: &HillState,
    thrust: F,
    ctx: &OrbitalContext,
    t_span: (f64, f64),
    tol: &Tolerances,
) -> Result<CwSolution, CwError>
where
    F: Fn(f64) -> ControlThrust,
{
    if !ic.is_finite() {
        return Err(CwError::NonFinite {
            what: "initial state",
        });
    }
    let span = t_span.1 - t_span.0;
    let h_init = (ctx.period() * 1e-4).min(span.abs().max(f64::MIN_POSITIVE));
    let opts = Rk45Options {
        rel_tol: tol.rel,
        abs_tol: tol.abs,
        h_init: Some(h_init),
        ..Default::default()
    };
    let deriv = |t: f64, y: &Vector6<f64>| {
        let s = HillState::from_vector(y);
        cw_derivative(&s, &thrust(t), ctx).to_vector()
    };
    let dense = rk45::integrate(deriv, t_span, ic.to_vector(), &opts)?;
    Ok(CwSolution { dense })
}

/// Initial conditions for a closed relative ellipse (natural motion
/// trajectory): the in-plane channel is completed from `x0`, `vx0` via the
/// closure conditions, the out-of-plane channel passes through unchanged.
pub fn nmt_initial_conditions(
    x0: f64,
    vx0: f64,
    z0: f64,
    vz0: f64,
    ctx: &OrbitalContext,
) -> HillState {
    HillState {
        x: x0,
        y: 2.0 * vx0 / ctx.n,
        z: z0,
        vx: vx0,
        vy: -2.0 * ctx.n * x0,
        vz: vz0,
    }
}

/// Drift and offset residuals of the closure conditions; both vanish exactly
/// on a natural motion trajectory.
pub fn closure_residuals(s: &HillState, ctx: &OrbitalContext) -> (f64, f64) {
    let drift = s.vy + 2.0 * ctx.n * s.x;
    let offset = s.y - 2.0 * s.vx / ctx.n;
    (drift, offset)
}

#[cfg(test)]
pub(crate) mod test_oracle {
    //! Closed-form zero-thrust solution, kept in test code so implementation
    //! paths are checked against independent scalar arithmetic.

    use super::HillState;

    pub fn free_motion(ic: &HillState, n: f64, t: f64) -> HillState {
        let (s, c) = (n * t).sin_cos();
        HillState {
            x: (4.0 - 3.0 * c) * ic.x + s / n * ic.vx + 2.0 / n * (1.0 - c) * ic.vy,
            y: 6.0 * (s - n * t) * ic.x + ic.y - 2.0 / n * (1.0 - c) * ic.vx
                + (4.0 * s - 3.0 * n * t) / n * ic.vy,
            z: c * ic.z + s / n * ic.vz,
            vx: 3.0 * n * s * ic.x + c * ic.vx + 2.0 * s * ic.vy,
            vy: -6.0 * n * (1.0 - c) * ic.x - 2.0 * s * ic.vx + (4.0 * c - 3.0) * ic.vy,
            vz: -n * s * ic.z + c * ic.vz,
        }
    }
}
