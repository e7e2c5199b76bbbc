//! Adaptive Dormand–Prince 5(4) integrator on flat complex state vectors.
//!
//! Output times are hit exactly: the step is clipped at each requested time,
//! so discontinuities placed on output times never fall inside a step.

use crate::error::{Error, Result};
use crate::linalg::C64;

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { rtol: tol, atol: tol * 1e-2, max_steps: 1_000_000 }
    }
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self::with_tol(crate::defaults::TOL_ODE)
    }
}

#[derive(Clone, Debug)]
pub struct OdeSolution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<C64>>,
    pub accepted: usize,
    pub rejected: usize,
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
// 5th-order minus embedded 4th-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `y' = rhs(t, y)` from `times[0]` and records the state at every
/// entry of `times` (which must be strictly increasing).
pub fn integrate<F>(mut rhs: F, y0: &[C64], times: &[f64], opts: OdeOptions) -> Result<OdeSolution>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    if times.is_empty() {
        return Err(Error::InvalidGrid("no output times".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGrid("output times must be strictly increasing".into()));
    }
    let dim = y0.len();
    let mut y = y0.to_vec();
    let mut t = times[0];
    let mut states = vec![y.clone()];
    let mut accepted = 0;
    let mut rejected = 0;

    let mut k1 = vec![C64::default(); dim];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut k5 = k1.clone();
    let mut k6 = k1.clone();
    let mut k7 = k1.clone();
    let mut tmp = k1.clone();
    let mut y_new = k1.clone();

    rhs(t, &y, &mut k1);
    let span = times[times.len() - 1] - times[0];
    let mut h = initial_step(&mut rhs, t, &y, &k1, opts, span);

    for &target in &times[1..] {
        while t < target {
            if accepted + rejected >= opts.max_steps {
                return Err(Error::Integration(format!("step budget {} exhausted at t = {t}", opts.max_steps)));
            }
            let remaining = target - t;
            let last = h >= remaining * (1.0 - 1e-12);
            let step = if last { remaining } else { h };

            stage(&y, step, &[(A21, &k1)], &mut tmp);
            rhs(t + C2 * step, &tmp, &mut k2);
            stage(&y, step, &[(A31, &k1), (A32, &k2)], &mut tmp);
            rhs(t + C3 * step, &tmp, &mut k3);
            stage(&y, step, &[(A41, &k1), (A42, &k2), (A43, &k3)], &mut tmp);
            rhs(t + C4 * step, &tmp, &mut k4);
            stage(&y, step, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], &mut tmp);
            rhs(t + C5 * step, &tmp, &mut k5);
            stage(&y, step, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], &mut tmp);
            rhs(t + step, &tmp, &mut k6);
            stage(&y, step, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], &mut y_new);
            let t_new = if last { target } else { t + step };
            rhs(t_new, &y_new, &mut k7);

            let mut acc = 0.0;
            for i in 0..dim {
                let e = step * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
                acc += (e.norm() / sc).powi(2);
            }
            let err = if dim == 0 { 0.0 } else { (acc / dim as f64).sqrt() };
            if !err.is_finite() {
                return Err(Error::Integration(format!("non-finite error estimate at t = {t}")));
            }

            if err <= 1.0 {
                t = t_new;
                std::mem::swap(&mut y, &mut y_new);
                std::mem::swap(&mut k1, &mut k7);
                accepted += 1;
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                // a clipped final step says nothing about the natural step size
                if !last || factor < 1.0 {
                    h = step * factor;
                }
            } else {
                rejected += 1;
                h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            }
            if h < 1e-14 * span.max(1.0) {
                return Err(Error::Integration(format!("step size underflow at t = {t}")));
            }
        }
        states.push(y.clone());
    }
    Ok(OdeSolution { times: times.to_vec(), states, accepted, rejected })
}

fn stage(y: &[C64], h: f64, terms: &[(f64, &Vec<C64>)], out: &mut [C64]) {
    for i in 0..y.len() {
        let mut acc = C64::default();
        for (a, k) in terms {
            acc += *a * k[i];
        }
        out[i] = y[i] + h * acc;
    }
}

fn initial_step<F>(rhs: &mut F, t: f64, y: &[C64], f0: &[C64], opts: OdeOptions, span: f64) -> f64
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let scale: Vec<f64> = y.iter().map(|v| opts.atol + opts.rtol * v.norm()).collect();
    let rms = |v: &[C64]| -> f64 {
        if v.is_empty() {
            return 0.0;
        }
        (v.iter().zip(&scale).map(|(z, s)| (z.norm() / s).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
    };
    let d0 = rms(y);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span.max(1e-12));
    let y1: Vec<C64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![C64::default(); y.len()];
    rhs(t + h0, &y1, &mut f1);
    let diff: Vec<C64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1).min(span.max(1e-12))
}
