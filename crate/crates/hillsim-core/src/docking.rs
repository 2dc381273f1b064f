//! Closed-loop thrust policies over the relative-motion dynamics: docking
//! episodes, policy contracts, and seeded safe initial-condition sampling.
//!
//! A [`ThrustPolicy`] is any state-to-thrust mapping (a trained controller,
//! a hand-written law, or the zero policy). The episode runner holds each
//! commanded thrust constant across one discrete step, so the propagation is
//! exact for the commanded sequence. Episodes are pure functions of (policy,
//! initial state, config), and the initial-state sampler is fully determined
//! by its seed.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cw::{ControlThrust, CwError, HillState, OrbitalContext, SampledTrajectory};
use crate::discrete::{discrete_transition, DiscretizationMode};

#[derive(Debug, Error)]
pub enum DockingError {
    #[error("docking config field `{name}` invalid: {reason}")]
    InvalidConfig { name: &'static str, reason: String },
    #[error("policy produced a non-finite thrust at step {step} (t = {t} s)")]
    PolicyOutput { step: usize, t: f64 },
    #[error(transparent)]
    Dynamics(#[from] CwError),
}

/// State-to-thrust mapping with a declared actuation limit. The episode
/// runner clamps every output to the cap, so a policy cannot exceed its own
/// declaration.
pub trait ThrustPolicy {
    fn thrust(&self, state: &HillState) -> ControlThrust;
    /// Largest thrust magnitude this policy may command, N.
    fn cap(&self) -> f64;
}

/// Always commands zero thrust; closing the loop with it reproduces free
/// drift exactly.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPolicy;

impl ThrustPolicy for ZeroPolicy {
    fn thrust(&self, _state: &HillState) -> ControlThrust {
        ControlThrust::ZERO
    }

    fn cap(&self) -> f64 {
        f64::INFINITY
    }
}

/// Proportional-derivative docking law `u = -m (kp pos + kd vel)`, clamped
/// to `cap` by the runner. Far from the target it saturates into a constant
/// braking/acceleration thrust; near the target it behaves like a damped
/// spring pulling into the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdDockingPolicy {
    /// Position gain, 1/s^2.
    pub kp: f64,
    /// Velocity gain, 1/s.
    pub kd: f64,
    /// Thrust limit, N.
    pub cap: f64,
    /// Deputy mass the gains act on, kg.
    pub mass: f64,
}

impl Default for PdDockingPolicy {
    fn default() -> Self {
        Self {
            kp: 2.25,
            kd: 3.0,
            cap: 20.0,
            mass: 1.0,
        }
    }
}

impl PdDockingPolicy {
    pub fn for_context(ctx: &OrbitalContext) -> Self {
        Self {
            mass: ctx.m,
            ..Self::default()
        }
    }
}

impl ThrustPolicy for PdDockingPolicy {
    fn thrust(&self, state: &HillState) -> ControlThrust {
        let u = -(state.position() * self.kp + state.velocity() * self.kd) * self.mass;
        ControlThrust::from_vector(&u)
    }

    fn cap(&self) -> f64 {
        self.cap
    }
}

/// The standard approach episode start: 100 m radial offset carrying a tenth
/// of the closure drift velocity, so the deputy neither sits still nor rides
/// a closed ellipse.
pub fn reference_approach_state(ctx: &OrbitalContext) -> HillState {
    HillState::new(100.0, 0.0, 0.0, 0.0, -0.2 * ctx.n * 100.0, 0.0)
}

/// Episode horizon, stepping, success geometry, and sampler limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DockingConfig {
    /// Episode length, s.
    pub horizon: f64,
    /// Discrete step, s.
    pub dt: f64,
    /// Distance to the target (the frame origin) that counts as docked, m.
    pub success_radius: f64,
    /// Velocity safety limit for sampled initial states, m/s.
    pub v_max: f64,
    /// Optional distance-dependent slack: the limit becomes
    /// `v_max + limit_slope * |position|`. Zero keeps the constant limit.
    pub limit_slope: f64,
    /// Sampler seed; identical seeds give identical draws.
    pub seed: u64,
    /// Initial positions fall in this spherical shell around the target, m.
    pub spawn_radius_min: f64,
    pub spawn_radius_max: f64,
    /// Per-component standard deviation of the base velocity sampler, m/s.
    pub v_sigma: f64,
}

impl Default for DockingConfig {
    fn default() -> Self {
        Self {
            horizon: 10.0,
            dt: 0.05,
            success_radius: 0.5,
            v_max: 1.0,
            limit_slope: 0.0,
            seed: 0,
            spawn_radius_min: 50.0,
            spawn_radius_max: 150.0,
            v_sigma: 1.0,
        }
    }
}

impl DockingConfig {
    pub fn validate(&self) -> Result<(), DockingError> {
        let bad = |name: &'static str, reason: String| Err(DockingError::InvalidConfig { name, reason });
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return bad("horizon", format!("must be positive, got {}", self.horizon));
        }
        if !(self.dt > 0.0) || self.dt > self.horizon {
            return bad("dt", format!("must lie in (0, horizon], got {}", self.dt));
        }
        if !(self.success_radius > 0.0) {
            return bad(
                "success_radius",
                format!("must be positive, got {}", self.success_radius),
            );
        }
        if !(self.v_max > 0.0) {
            return bad("v_max", format!("must be positive, got {}", self.v_max));
        }
        if !(self.limit_slope >= 0.0) || !self.limit_slope.is_finite() {
            return bad(
                "limit_slope",
                format!("must be non-negative, got {}", self.limit_slope),
            );
        }
        if !(self.spawn_radius_min >= 0.0 && self.spawn_radius_max > self.spawn_radius_min) {
            return bad(
                "spawn_radius",
                format!(
                    "need 0 <= min < max, got [{}, {}]",
                    self.spawn_radius_min, self.spawn_radius_max
                ),
            );
        }
        if !(self.v_sigma > 0.0) || !self.v_sigma.is_finite() {
            return bad("v_sigma", format!("must be positive, got {}", self.v_sigma));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round().max(1.0) as usize
    }

    /// Velocity limit at a given distance from the target.
    pub fn velocity_limit(&self, distance: f64) -> f64 {
        self.v_max + self.limit_slope * distance
    }
}

/// Draw a safe initial state: position uniform in the spawn shell, velocity
/// redrawn until it respects the safety limit. Deterministic in `cfg.seed`.
pub fn safe_random_initial_state(cfg: &DockingConfig) -> Result<HillState, DockingError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok(draw_state(cfg, &mut rng))
}

/// Draw a seeded sequence of safe initial states (one RNG stream, so the
/// k-th draw is stable for a given seed regardless of how many are taken).
pub fn safe_random_initial_states(
    cfg: &DockingConfig,
    count: usize,
) -> Result<Vec<HillState>, DockingError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok((0..count).map(|_| draw_state(cfg, &mut rng)).collect())
}

fn draw_state(cfg: &DockingConfig, rng: &mut ChaCha8Rng) -> HillState {
    use rand::Rng;
    // Cube-root law makes the radius uniform over the shell volume.
    let u: f64 = rng.random();
    let (r3_min, r3_max) = (
        cfg.spawn_radius_min.powi(3),
        cfg.spawn_radius_max.powi(3),
    );
    let radius = (r3_min + u * (r3_max - r3_min)).cbrt();
    let dir: [f64; 3] = UnitSphere.sample(rng);
    let position = Vector3::new(dir[0], dir[1], dir[2]) * radius;

    let limit = cfg.velocity_limit(position.norm());
    let normal = Normal::new(0.0, cfg.v_sigma).expect("v_sigma validated positive");
    let velocity = loop {
        let v = Vector3::new(
            normal.sample(rng),
            normal.sample(rng),
            normal.sample(rng),
        );
        if v.norm() <= limit {
            break v;
        }
    };

    HillState {
        x: position[0],
        y: position[1],
        z: position[2],
        vx: velocity[0],
        vy: velocity[1],
        vz: velocity[2],
    }
}

/// A finished closed-loop episode: the flown trajectory, the thrust history,
/// and the docking outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct DockingEpisode {
    pub trajectory: SampledTrajectory,
    pub thrusts: Vec<ControlThrust>,
    pub success: bool,
    /// First sample time with distance below the success radius.
    pub time_to_dock: Option<f64>,
    /// Total commanded impulse per unit, sum of |u| dt, N s.
    pub fuel_proxy: f64,
    /// Distance to target at the final sample, m.
    pub final_distance: f64,
}

/// Flat, serializable episode outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub success: bool,
    pub time_to_dock: Option<f64>,
    pub fuel_proxy: f64,
    pub final_distance: f64,
}

impl DockingEpisode {
    pub fn summary(&self) -> EpisodeSummary {
        EpisodeSummary {
            success: self.success,
            time_to_dock: self.time_to_dock,
            fuel_proxy: self.fuel_proxy,
            final_distance: self.final_distance,
        }
    }
}

/// Run a policy against the discrete dynamics for the configured horizon.
///
/// Each step clamps the policy output to its declared cap, holds it for
/// `dt`, and advances with the exact-hold transition. The episode always
/// runs to the horizon; docking is detected but does not stop propagation,
/// so the returned trajectory can feed the scaling pipeline whole.
pub fn run_closed_loop<P: ThrustPolicy + ?Sized>(
    policy: &P,
    ic: &HillState,
    ctx: &OrbitalContext,
    cfg: &DockingConfig,
) -> Result<DockingEpisode, DockingError> {
    cfg.validate()?;
    if !ic.is_finite() {
        return Err(DockingError::Dynamics(CwError::NonFinite {
            what: "initial state",
        }));
    }
    let steps = cfg.steps();
    let transition = discrete_transition(ctx, cfg.dt, DiscretizationMode::Numeric)?;
    let cap = policy.cap();

    let mut states = Vec::with_capacity(steps + 1);
    let mut times = Vec::with_capacity(steps + 1);
    let mut thrusts = Vec::with_capacity(steps);
    let mut fuel_proxy = 0.0;
    let mut time_to_dock = None;

    let mut s = *ic;
    states.push(s);
    times.push(0.0);
    if s.position().norm() < cfg.success_radius {
        time_to_dock = Some(0.0);
    }

    for k in 0..steps {
        let mut u = policy.thrust(&s);
        if !u.is_finite() {
            return Err(DockingError::PolicyOutput {
                step: k,
                t: k as f64 * cfg.dt,
            });
        }
        let magnitude = u.magnitude();
        if magnitude > cap {
            u = ControlThrust::from_vector(&(u.to_vector() * (cap / magnitude)));
        }
        fuel_proxy += u.magnitude() * cfg.dt;
        thrusts.push(u);
        s = transition.step(&s, &u);
        let t = (k + 1) as f64 * cfg.dt;
        states.push(s);
        times.push(t);
        if time_to_dock.is_none() && s.position().norm() < cfg.success_radius {
            time_to_dock = Some(t);
        }
    }

    let final_distance = s.position().norm();
    Ok(DockingEpisode {
        trajectory: SampledTrajectory::new(times, states, crate::cw::Frame::Space)?,
        thrusts,
        success: time_to_dock.is_some(),
        time_to_dock,
        fuel_proxy,
        final_distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::propagate_discrete;
    use approx::assert_relative_eq;

    fn ctx() -> OrbitalContext {
        OrbitalContext::default()
    }

    #[test]
    fn config_validation_rejects_bad_fields() {
        let ok = DockingConfig::default();
        assert!(ok.validate().is_ok());
        for (name, cfg) in [
            ("horizon", DockingConfig { horizon: 0.0, ..ok }),
            ("dt", DockingConfig { dt: 0.0, ..ok }),
            ("dt", DockingConfig { dt: 11.0, ..ok }),
            ("radius", DockingConfig { success_radius: -1.0, ..ok }),
            ("v_max", DockingConfig { v_max: 0.0, ..ok }),
            ("slope", DockingConfig { limit_slope: -0.1, ..ok }),
            (
                "shell",
                DockingConfig {
                    spawn_radius_min: 10.0,
                    spawn_radius_max: 10.0,
                    ..ok
                },
            ),
            ("v_sigma", DockingConfig { v_sigma: 0.0, ..ok }),
        ] {
            assert!(cfg.validate().is_err(), "{name} should fail");
        }
    }

    #[test]
    fn sampler_obeys_velocity_limit_exhaustively() {
        let cfg = DockingConfig {
            v_sigma: 2.0,
            v_max: 1.0,
            seed: 7,
            ..DockingConfig::default()
        };
        let draws = safe_random_initial_states(&cfg, 10_000).unwrap();
        for s in &draws {
            assert!(s.velocity().norm() <= cfg.v_max, "|v| = {}", s.velocity().norm());
        }
    }

    #[test]
    fn sampler_positions_fall_in_shell() {
        let cfg = DockingConfig {
            seed: 3,
            ..DockingConfig::default()
        };
        for s in safe_random_initial_states(&cfg, 2000).unwrap() {
            let r = s.position().norm();
            assert!(r >= cfg.spawn_radius_min - 1e-9 && r <= cfg.spawn_radius_max + 1e-9);
        }
    }

    #[test]
    fn sampler_is_seed_deterministic() {
        let cfg = DockingConfig {
            seed: 42,
            ..DockingConfig::default()
        };
        let a = safe_random_initial_state(&cfg).unwrap();
        let b = safe_random_initial_state(&cfg).unwrap();
        assert_eq!(a, b);
        let seq_a = safe_random_initial_states(&cfg, 50).unwrap();
        let seq_b = safe_random_initial_states(&cfg, 50).unwrap();
        assert_eq!(seq_a, seq_b);
        let other = DockingConfig { seed: 43, ..cfg };
        assert_ne!(a, safe_random_initial_state(&other).unwrap());
    }

    #[test]
    fn distance_dependent_limit_admits_faster_distant_starts() {
        let cfg = DockingConfig {
            v_max: 0.5,
            limit_slope: 0.05,
            v_sigma: 3.0,
            seed: 11,
            ..DockingConfig::default()
        };
        let draws = safe_random_initial_states(&cfg, 2000).unwrap();
        let mut exceeded_plain_limit = 0;
        for s in &draws {
            let limit = cfg.velocity_limit(s.position().norm());
            assert!(s.velocity().norm() <= limit);
            if s.velocity().norm() > cfg.v_max {
                exceeded_plain_limit += 1;
            }
        }
        assert!(
            exceeded_plain_limit > 0,
            "slope should allow some draws past the constant limit"
        );
    }

    #[test]
    fn zero_policy_equals_free_discrete_propagation() {
        let cfg = DockingConfig::default();
        let ic = reference_approach_state(&ctx());
        let episode = run_closed_loop(&ZeroPolicy, &ic, &ctx(), &cfg).unwrap();
        let zeros = vec![ControlThrust::ZERO; cfg.steps()];
        let free = propagate_discrete(
            &ic,
            &zeros,
            &ctx(),
            cfg.dt,
            cfg.steps(),
            DiscretizationMode::Numeric,
        )
        .unwrap();
        assert_eq!(episode.trajectory.states, free.states);
        assert_eq!(episode.fuel_proxy, 0.0);
        assert!(!episode.success);
    }

    #[test]
    fn saturating_policy_is_clamped_to_cap() {
        struct Wild;
        impl ThrustPolicy for Wild {
            fn thrust(&self, s: &HillState) -> ControlThrust {
                ControlThrust::new(1e6 * (1.0 + s.x), -3e7, 2e5)
            }
            fn cap(&self) -> f64 {
                5.0
            }
        }
        let cfg = DockingConfig::default();
        let episode =
            run_closed_loop(&Wild, &reference_approach_state(&ctx()), &ctx(), &cfg).unwrap();
        for u in &episode.thrusts {
            assert!(u.magnitude() <= 5.0 + 1e-12);
        }
    }

    #[test]
    fn non_finite_policy_output_is_reported_with_step() {
        struct Nan;
        impl ThrustPolicy for Nan {
            fn thrust(&self, _s: &HillState) -> ControlThrust {
                ControlThrust::new(f64::NAN, 0.0, 0.0)
            }
            fn cap(&self) -> f64 {
                1.0
            }
        }
        let err = run_closed_loop(&Nan, &HillState::default(), &ctx(), &DockingConfig::default());
        assert!(matches!(err, Err(DockingError::PolicyOutput { step: 0, .. })));
    }

    #[test]
    fn start_inside_radius_docks_immediately() {
        let cfg = DockingConfig::default();
        let ic = HillState::new(0.1, 0.0, 0.0, 0.0, 0.0, 0.0);
        let episode = run_closed_loop(&ZeroPolicy, &ic, &ctx(), &cfg).unwrap();
        assert!(episode.success);
        assert_eq!(episode.time_to_dock, Some(0.0));
    }

    #[test]
    fn pd_policy_docks_from_reference_approach() {
        let cfg = DockingConfig::default();
        let context = ctx();
        let policy = PdDockingPolicy::for_context(&context);
        let ic = reference_approach_state(&context);
        let episode = run_closed_loop(&policy, &ic, &context, &cfg).unwrap();
        assert!(
            episode.success,
            "PD policy failed to dock: final distance {}",
            episode.final_distance
        );
        let t_dock = episode.time_to_dock.unwrap();
        assert!(t_dock <= cfg.horizon, "docked at {t_dock}");
        assert!(episode.fuel_proxy > 0.0);
        // The episode keeps flying after docking; it should not wander back
        // out to the start distance.
        assert!(episode.final_distance < 50.0);
    }

    #[test]
    fn episode_summary_round_trips_through_json() {
        let cfg = DockingConfig::default();
        let context = ctx();
        let episode = run_closed_loop(
            &PdDockingPolicy::for_context(&context),
            &reference_approach_state(&context),
            &context,
            &cfg,
        )
        .unwrap();
        let summary = episode.summary();
        let text = serde_json::to_string(&summary).unwrap();
        let back: EpisodeSummary = serde_json::from_str(&text).unwrap();
        assert_eq!(back, summary);
        assert_relative_eq!(
            back.fuel_proxy,
            episode.fuel_proxy,
            max_relative = 1e-15
        );
    }
}
