//! Adaptive Dormand-Prince 5(4) integration with dense output.
//!
//! Classic explicit RK45: fifth-order step with an embedded fourth-order
//! error estimate, FSAL, and the standard fourth-order continuous extension
//! so accepted steps can be re-evaluated at arbitrary interior times. Step
//! control is the usual `0.9 * err^(-1/5)` with growth clamped to [0.2, 10].

use nalgebra::SVector;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum Rk45Error {
    /// The controller pushed the step below the floor where `t + h == t`.
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("exceeded {max_steps} steps at t = {t}")]
    MaxStepsExceeded { t: f64, max_steps: usize },
    #[error("invalid time span [{t0}, {t1}]")]
    InvalidSpan { t0: f64, t1: f64 },
}

#[derive(Debug, Clone)]
pub struct Rk45Options {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Initial step size. Defaults to 1e-3 of the span.
    pub h_init: Option<f64>,
    pub max_steps: usize,
}

impl Default for Rk45Options {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol: 1e-9,
            h_init: None,
            max_steps: 10_000_000,
        }
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
// Fifth-order weights (also the seventh stage row, FSAL).
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Error coefficients: b5 - b4 of the embedded pair.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Dense-output coefficients for the fourth-order interpolant.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step with its interpolation coefficients.
#[derive(Debug, Clone)]
struct DenseStep<const N: usize> {
    t: f64,
    h: f64,
    cont: [SVector<f64, N>; 5],
}

impl<const N: usize> DenseStep<N> {
    fn eval(&self, t: f64) -> SVector<f64, N> {
        let theta = if self.h == 0.0 { 0.0 } else { (t - self.t) / self.h };
        let theta1 = 1.0 - theta;
        let [c1, c2, c3, c4, c5] = &self.cont;
        c1 + theta * (c2 + theta1 * (c3 + theta * (c4 + theta1 * c5)))
    }
}

/// Dense solution over `[t0, t_end]`.
#[derive(Debug, Clone)]
pub struct Solution<const N: usize> {
    t0: f64,
    t_end: f64,
    y0: SVector<f64, N>,
    y_end: SVector<f64, N>,
    steps: Vec<DenseStep<N>>,
    pub n_evals: usize,
}

impl<const N: usize> Solution<N> {
    pub fn t_span(&self) -> (f64, f64) {
        (self.t0, self.t_end)
    }

    pub fn initial_state(&self) -> &SVector<f64, N> {
        &self.y0
    }

    pub fn final_state(&self) -> &SVector<f64, N> {
        &self.y_end
    }

    /// Interpolated state at `t`. Times outside the span clamp to the
    /// nearest endpoint.
    pub fn eval(&self, t: f64) -> SVector<f64, N> {
        if self.steps.is_empty() || t <= self.t0 {
            return self.y0;
        }
        if t >= self.t_end {
            return self.y_end;
        }
        // First step whose start lies beyond t is one past the owner.
        let idx = self.steps.partition_point(|s| s.t <= t);
        self.steps[idx.saturating_sub(1)].eval(t)
    }
}

/// Integrate `dy/dt = f(t, y)` over `t_span` (forward only).
///
/// A zero-length span yields a degenerate single-point solution.
pub fn integrate<const N: usize, F>(
    mut f: F,
    t_span: (f64, f64),
    y0: SVector<f64, N>,
    opts: &Rk45Options,
) -> Result<Solution<N>, Rk45Error>
where
    F: FnMut(f64, &SVector<f64, N>) -> SVector<f64, N>,
{
    let (t0, t_end) = t_span;
    if !(t0.is_finite() && t_end.is_finite()) || t_end < t0 {
        return Err(Rk45Error::InvalidSpan { t0, t1: t_end });
    }
    if t_end == t0 {
        return Ok(Solution {
            t0,
            t_end,
            y0,
            y_end: y0,
            steps: Vec::new(),
            n_evals: 0,
        });
    }

    let span = t_end - t0;
    let mut h = opts.h_init.unwrap_or(span * 1e-3).min(span);
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut n_evals = 1usize;
    let mut steps: Vec<DenseStep<N>> = Vec::new();

    let mut n_steps = 0usize;
    while t < t_end {
        n_steps += 1;
        if n_steps > opts.max_steps {
            return Err(Rk45Error::MaxStepsExceeded {
                t,
                max_steps: opts.max_steps,
            });
        }
        let underflow = 16.0 * f64::EPSILON * t.abs().max(1.0);
        if h < underflow {
            return Err(Rk45Error::StepSizeUnderflow { t });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }

        let k2 = f(t + C[1] * h, &(y + h * (A21 * k1)));
        let k3 = f(t + C[2] * h, &(y + h * (A31 * k1 + A32 * k2)));
        let k4 = f(t + C[3] * h, &(y + h * (A41 * k1 + A42 * k2 + A43 * k3)));
        let k5 = f(
            t + C[4] * h,
            &(y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4)),
        );
        let k6 = f(
            t + C[5] * h,
            &(y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5)),
        );
        let y_new = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
        let t_new = if last { t_end } else { t + h };
        let k7 = f(t_new, &y_new);
        n_evals += 6;

        let err_vec = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
        let mut err_sq = 0.0;
        for i in 0..N {
            let sc = opts.abs_tol + opts.rel_tol * y[i].abs().max(y_new[i].abs());
            let r = err_vec[i] / sc;
            err_sq += r * r;
        }
        let err = (err_sq / N as f64).sqrt();

        if err <= 1.0 {
            let ydiff = y_new - y;
            let bspl = h * k1 - ydiff;
            let cont5 = h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7);
            steps.push(DenseStep {
                t,
                h,
                cont: [y, ydiff, bspl, ydiff - h * k7 - bspl, cont5],
            });
            t = t_new;
            y = y_new;
            k1 = k7;
        }

        let fac = if err == 0.0 {
            10.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 10.0)
        };
        // Never grow the step after a rejection.
        h *= if err > 1.0 { fac.min(1.0) } else { fac };
    }

    Ok(Solution {
        t0,
        t_end,
        y0,
        y_end: y,
        steps,
        n_evals,
    })
}
