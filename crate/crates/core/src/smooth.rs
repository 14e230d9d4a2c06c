//! Adaptive Dormand–Prince 5(4) integration for the smooth comparison systems.
//!
//! Only used as a reference: the PWL systems themselves are integrated exactly.

use nalgebra::SVector;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct DopriOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h0: f64,
    pub hmin: f64,
    pub max_steps: usize,
}

impl Default for DopriOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, h0: 1e-3, hmin: 1e-14, max_steps: 10_000_000 }
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

/// Integrate `y' = f(t, y)` from `t0` to `t1 > t0`.
///
/// `observe` sees every accepted step and may stop the integration early by
/// returning `false`. Returns the final time and state.
pub fn dopri5<const N: usize>(
    f: impl Fn(f64, &SVector<f64, N>) -> SVector<f64, N>,
    t0: f64,
    y0: SVector<f64, N>,
    t1: f64,
    opts: &DopriOptions,
    mut observe: impl FnMut(f64, &SVector<f64, N>) -> bool,
) -> Result<(f64, SVector<f64, N>)> {
    let (mut t, mut y) = (t0, y0);
    if !observe(t, &y) || t1 <= t0 {
        return Ok((t, y));
    }
    let mut h = opts.h0.min(t1 - t0);
    let mut k = [SVector::<f64, N>::zeros(); 7];
    k[0] = f(t, &y);
    let mut steps = 0;
    while t < t1 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::NoConvergence(format!("more than {} steps", opts.max_steps)));
        }
        if h < opts.hmin {
            return Err(Error::StepUnderflow { t });
        }
        let h_try = h.min(t1 - t);
        for s in 1..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                ys += kj * (A[s][j] * h_try);
            }
            k[s] = f(t + C[s] * h_try, &ys);
        }
        let mut y5 = y;
        let mut err = SVector::<f64, N>::zeros();
        for s in 0..7 {
            y5 += k[s] * (B5[s] * h_try);
            err += k[s] * ((B5[s] - B4[s]) * h_try);
        }
        let mut norm = 0.0;
        for i in 0..N {
            let sc = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
            norm += (err[i] / sc).powi(2);
        }
        let norm = (norm / N as f64).sqrt();
        if !norm.is_finite() {
            h = h_try * 0.1;
            continue;
        }
        if norm <= 1.0 {
            t += h_try;
            y = y5;
            // first-same-as-last
            k[0] = k[6];
            if !observe(t, &y) {
                break;
            }
        }
        let factor = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
        h = h_try * factor;
    }
    Ok((t, y))
}
