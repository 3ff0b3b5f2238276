//! Dormand–Prince 5(4) Runge–Kutta integration for linear and nonlinear
//! systems over real or complex state vectors.
//!
//! The adaptive driver propagates the fifth-order solution and uses the
//! embedded fourth-order one only for the error estimate. The fixed-step
//! driver runs the same fifth-order stage set on a uniform grid.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Scalar type of an ODE state vector.
pub trait OdeScalar: Copy + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl OdeScalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl OdeScalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

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
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// b - b* (fifth minus embedded fourth order weights)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Error control and step limits for [`integrate_adaptive`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest step the controller may take.
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12, h_max: f64::INFINITY, max_steps: 5_000_000 }
    }
}

/// Counters reported by the adaptive driver.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Largest scaled error ratio among accepted steps (<= 1).
    pub worst_accepted_error: f64,
}

struct Stages<T> {
    k: [Vec<T>; 7],
    tmp: Vec<T>,
    y5: Vec<T>,
}

impl<T: OdeScalar> Stages<T> {
    fn new(n: usize) -> Self {
        let z = vec![T::zero(); n];
        Self { k: [z.clone(), z.clone(), z.clone(), z.clone(), z.clone(), z.clone(), z.clone()], tmp: z.clone(), y5: z }
    }

    /// Runs stages 2..7 given k[0] = f(t, y); leaves the fifth-order
    /// solution in `y5` and f(t + h, y5) in k[6].
    fn step<F>(&mut self, rhs: &mut F, t: f64, h: f64, y: &[T])
    where
        F: FnMut(f64, &[T], &mut [T]),
    {
        let n = y.len();
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let tmp = &mut self.tmp;
        for i in 0..n {
            tmp[i] = y[i] + k1[i] * (h * A21);
        }
        rhs(t + C2 * h, tmp, k2);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * h;
        }
        rhs(t + C3 * h, tmp, k3);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * h;
        }
        rhs(t + C4 * h, tmp, k4);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * h;
        }
        rhs(t + C5 * h, tmp, k5);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * h;
        }
        rhs(t + h, tmp, k6);
        for i in 0..n {
            self.y5[i] = y[i] + (k1[i] * B1 + k3[i] * B3 + k4[i] * B4 + k5[i] * B5 + k6[i] * B6) * h;
        }
        rhs(t + h, &self.y5, k7);
    }

    fn error_ratio(&self, h: f64, y: &[T], opts: &AdaptiveOptions) -> f64 {
        let [k1, _, k3, k4, k5, k6, k7] = &self.k;
        let mut acc = 0.0;
        for i in 0..y.len() {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
            let scale = opts.atol + opts.rtol * y[i].magnitude().max(self.y5[i].magnitude());
            let r = e.magnitude() / scale;
            acc += r * r;
        }
        (acc / y.len().max(1) as f64).sqrt()
    }
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t1 >= t0` in place.
///
/// `on_step` is called after every accepted step with the new abscissa and
/// state, so callers can monitor invariants along the way.
pub fn integrate_adaptive<T, F, O>(
    mut rhs: F,
    t0: f64,
    t1: f64,
    y: &mut [T],
    opts: &AdaptiveOptions,
    mut on_step: O,
) -> Result<StepStats>
where
    T: OdeScalar,
    F: FnMut(f64, &[T], &mut [T]),
    O: FnMut(f64, &[T]),
{
    if t1 < t0 {
        return Err(Error::Contract(format!("integration interval must be forward, got [{t0}, {t1}]")));
    }
    let mut stats = StepStats::default();
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(stats);
    }
    let n = y.len();
    let mut st = Stages::new(n);
    let mut t = t0;
    let mut h = span.min(opts.h_max);
    let h_floor = 1e-14 * t0.abs().max(t1.abs()).max(span);
    rhs(t, y, &mut st.k[0]);
    let mut worst_rejected: f64 = 0.0;

    while t < t1 {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::Integration {
                at: t,
                reason: format!("step budget of {} exhausted", opts.max_steps),
                worst_error: worst_rejected,
            });
        }
        let remaining = t1 - t;
        let last = h >= remaining * (1.0 - 1e-12);
        if last {
            h = remaining;
        }
        st.step(&mut rhs, t, h, y);
        let err = st.error_ratio(h, y, opts);
        if err <= 1.0 && err.is_finite() {
            t = if last { t1 } else { t + h };
            y.copy_from_slice(&st.y5);
            let [k1, .., k7] = &mut st.k;
            std::mem::swap(k1, k7);
            stats.accepted += 1;
            stats.worst_accepted_error = stats.worst_accepted_error.max(err);
            on_step(t, y);
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * factor).min(opts.h_max);
        } else {
            stats.rejected += 1;
            worst_rejected = worst_rejected.max(err);
            let factor = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
            h *= factor;
            if h < h_floor {
                return Err(Error::Integration {
                    at: t,
                    reason: "step size underflow".into(),
                    worst_error: worst_rejected,
                });
            }
        }
    }
    Ok(stats)
}

/// Integrates with `steps` uniform fifth-order steps (no error control).
pub fn integrate_fixed<T, F>(mut rhs: F, t0: f64, t1: f64, steps: usize, y: &mut [T])
where
    T: OdeScalar,
    F: FnMut(f64, &[T], &mut [T]),
{
    let steps = steps.max(1);
    let h = (t1 - t0) / steps as f64;
    let mut st = Stages::new(y.len());
    for s in 0..steps {
        let t = t0 + h * s as f64;
        rhs(t, y, &mut st.k[0]);
        st.step(&mut rhs, t, h, y);
        y.copy_from_slice(&st.y5);
    }
}
