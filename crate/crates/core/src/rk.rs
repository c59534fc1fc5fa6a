//! Dormand–Prince 5(4) embedded Runge–Kutta stepper shared by the flow
//! integrator and the time-local dynamics.

use crate::error::{DrgError, Result};

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
// Difference between the 5th- and embedded 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

pub(crate) struct Step<const N: usize> {
    pub y: [f64; N],
    pub err: [f64; N],
    pub k_end: [f64; N],
}

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

/// One Dormand–Prince step from `(t, y)` with `k1 = f(t, y)` already known.
pub(crate) fn dopri_step<const N: usize, F>(
    f: &mut F,
    t: f64,
    y: &[f64; N],
    k1: &[f64; N],
    h: f64,
) -> Result<Step<N>>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let k2 = f(t + C2 * h, &axpy(y, h, &[(A21, k1)]))?;
    let k3 = f(t + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]))?;
    let k4 = f(t + C4 * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]))?;
    let k5 = f(t + C5 * h, &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
    let k6 = f(
        t + h,
        &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
    )?;
    let y_new = axpy(y, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = f(t + h, &y_new)?;
    let mut err = [0.0; N];
    for i in 0..N {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    Ok(Step { y: y_new, err, k_end: k7 })
}

/// Scaled RMS error norm; a step is acceptable when this is `<= 1`.
pub(crate) fn error_norm<const N: usize>(y0: &[f64; N], y1: &[f64; N], err: &[f64; N], tol: Tolerance) -> f64 {
    let sum: f64 = (0..N)
        .map(|i| {
            let scale = tol.atol + tol.rtol * y0[i].abs().max(y1[i].abs());
            (err[i] / scale).powi(2)
        })
        .sum();
    (sum / N as f64).sqrt()
}

/// Step-size factor from an error norm, clamped to `[0.2, 5]`.
pub(crate) fn step_factor(err: f64) -> f64 {
    if err == 0.0 {
        5.0
    } else {
        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
    }
}

/// Adaptively integrates `y' = f(t, y)` from `t0` to exactly `t1`.
///
/// `h` carries the suggested step between calls.
pub(crate) fn integrate_to<const N: usize, F>(
    f: &mut F,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    h: &mut f64,
    tol: Tolerance,
) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let span = t1 - t0;
    if span <= 0.0 {
        return Ok(y0);
    }
    let h_min = 1e-14 * t1.abs().max(span);
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y)?;
    if !(*h > 0.0) || !h.is_finite() {
        *h = span;
    }
    loop {
        let remaining = t1 - t;
        let last = *h >= remaining;
        let step_h = if last { remaining } else { *h };
        let step = dopri_step(f, t, &y, &k1, step_h)?;
        let err = error_norm(&y, &step.y, &step.err, tol);
        if err <= 1.0 && step.y.iter().all(|v| v.is_finite()) {
            t = if last { t1 } else { t + step_h };
            y = step.y;
            k1 = step.k_end;
            if last {
                return Ok(y);
            }
            *h = step_h * step_factor(err);
        } else {
            *h = step_h * step_factor(err.max(1.0)).min(0.9);
            if *h < h_min {
                return Err(DrgError::TimeStepUnderflow { t, step: *h });
            }
        }
    }
}
