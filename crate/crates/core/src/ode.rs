//! Adaptive Dormand–Prince 5(4) integration of scalar ODEs with threshold
//! events.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Resolution of event times.
    pub event_tol: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-12,
            atol: 1e-12,
            max_steps: 1_000_000,
            event_tol: 1e-13,
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand–Prince step; returns the 5th-order value and the error estimate.
fn dp_step(f: &dyn Fn(f64, f64) -> f64, t: f64, x: f64, h: f64) -> (f64, f64) {
    let mut k = [0.0f64; 7];
    for i in 0..7 {
        let xi = x + h * (0..i).map(|j| A[i][j] * k[j]).sum::<f64>();
        k[i] = f(t + C[i] * h, xi);
    }
    let x5 = x + h * (0..7).map(|i| B5[i] * k[i]).sum::<f64>();
    let x4 = x + h * (0..7).map(|i| B4[i] * k[i]).sum::<f64>();
    (x5, (x5 - x4).abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stop {
    /// Reached the end time.
    End { x: f64 },
    /// `x` crossed the threshold upward at time `t`.
    Event { t: f64 },
}

/// Integrates `x' = f(t, x)` from `t0` to `t1`, stopping early at the first
/// upward crossing of `threshold` when one is given.
pub fn integrate(
    f: &dyn Fn(f64, f64) -> f64,
    t0: f64,
    x0: f64,
    t1: f64,
    threshold: Option<f64>,
    opts: &OdeOptions,
) -> Result<Stop> {
    if !(t1 >= t0) || !x0.is_finite() {
        return Err(Error::InvalidArgument(format!("bad integration interval [{t0}, {t1}] or state {x0}")));
    }
    if let Some(th) = threshold {
        if x0 >= th {
            return Ok(Stop::Event { t: t0 });
        }
    }
    let (mut t, mut x) = (t0, x0);
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(Stop::End { x });
    }
    let mut h = (span * 1e-3).max(1e-10).min(span);
    for _ in 0..opts.max_steps {
        if t >= t1 {
            return Ok(Stop::End { x });
        }
        let last = t + h >= t1;
        let h_try = if last { t1 - t } else { h };
        let (xn, err) = dp_step(f, t, x, h_try);
        if !xn.is_finite() {
            return Err(Error::NonFinite);
        }
        let scale = opts.atol + opts.rtol * x.abs().max(xn.abs());
        let ratio = err / scale;
        if ratio <= 1.0 {
            if let Some(th) = threshold {
                if xn >= th {
                    return locate_event(f, t, x, h_try, th, opts).map(|te| Stop::Event { t: te });
                }
            }
            t = if last { t1 } else { t + h_try };
            x = xn;
        }
        let factor = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
        h = h_try * factor;
        if h < 1e-14 * span.max(1.0) {
            return Err(Error::EventDetection(format!("step size underflow at t = {t}")));
        }
    }
    Err(Error::EventDetection("step budget exhausted".into()))
}

/// Bisection on the step length from the last accepted point.
fn locate_event(
    f: &dyn Fn(f64, f64) -> f64,
    t: f64,
    x: f64,
    h: f64,
    threshold: f64,
    opts: &OdeOptions,
) -> Result<f64> {
    let (mut lo, mut hi) = (0.0, h);
    for _ in 0..200 {
        if hi - lo <= opts.event_tol {
            return Ok(t + hi);
        }
        let mid = 0.5 * (lo + hi);
        let (xm, _) = dp_step(f, t, x, mid);
        if xm >= threshold {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(Error::EventDetection(format!(
        "threshold crossing near t = {} not resolved",
        t + hi
    )))
}

pub fn flow(f: &dyn Fn(f64, f64) -> f64, x0: f64, duration: f64, opts: &OdeOptions) -> Result<f64> {
    match integrate(f, 0.0, x0, duration, None, opts)? {
        Stop::End { x } => Ok(x),
        Stop::Event { .. } => unreachable!("no threshold was given"),
    }
}
