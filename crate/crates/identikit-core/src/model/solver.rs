//! Dormand–Prince 4(5) with dense output and switch-time segmentation.
//!
//! The embedded pair advances on the 5th-order solution (local
//! extrapolation, FSAL). Requested output times are evaluated from the
//! 4th-order dense interpolant of the accepted step that covers them, so
//! the step sequence is independent of the output grid. Switch times are
//! mandatory step endpoints: integration restarts on the new branch.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::ModelSpec;

#[allow(unused_imports)]
use num_traits::Float;

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

// 5th-order weights (advancing solution)
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// error = 5th - 4th order
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// dense-output weights (Hairer's contd5)
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const MAX_STEPS: usize = 1_000_000;

/// Integrate from t = 0 and return one state row per output time, plus any
/// diagnostic warnings (states leaving [-atol, n_pop + atol]).
pub(crate) fn solve(
    model: &ModelSpec,
    coefs: &[f64],
    y0: &[f64],
    t_out: &[f64],
    rtol: f64,
    atol: f64,
) -> Result<(Vec<Vec<f64>>, Vec<String>)> {
    let n = y0.len();
    let t_end = *t_out.last().unwrap();
    let mut out = Vec::with_capacity(t_out.len());
    let mut warnings = Vec::new();
    let mut out_idx = 0;

    if t_out[0] == 0.0 {
        out.push(y0.to_vec());
        out_idx = 1;
    }
    if out_idx == t_out.len() {
        return Ok((out, warnings));
    }

    // segment boundaries: 0, interior switch times, t_end
    let mut boundaries = vec![0.0];
    for &s in model.switch_times() {
        if s > 0.0 && s < t_end {
            boundaries.push(s);
        }
    }
    boundaries.push(t_end);

    let mut y = y0.to_vec();
    let mut k = vec![vec![0.0; n]; 7];
    let mut y_stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut steps = 0usize;

    for (branch, seg) in boundaries.windows(2).enumerate() {
        let (seg_start, seg_end) = (seg[0], seg[1]);
        let rhs = |t: f64, y: &[f64], out: &mut [f64]| {
            let _ = t;
            model.rhs_branch(branch, y, coefs, out);
        };

        let mut t = seg_start;
        rhs(t, &y, &mut k[0]);
        let mut h = initial_step(&rhs, t, &y, &k[0].clone(), seg_end, rtol, atol);
        let mut rejected = false;

        while t < seg_end {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(Error::Integration {
                    t,
                    reason: format!("exceeded {MAX_STEPS} steps"),
                });
            }
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::Integration {
                    t,
                    reason: "step size underflow".into(),
                });
            }
            if t + h > seg_end {
                h = seg_end - t;
            }

            for i in 0..n {
                y_stage[i] = y[i] + h * A21 * k[0][i];
            }
            rhs(t + h / 5.0, &y_stage, &mut k[1]);
            for i in 0..n {
                y_stage[i] = y[i] + h * (A31 * k[0][i] + A32 * k[1][i]);
            }
            rhs(t + 3.0 * h / 10.0, &y_stage, &mut k[2]);
            for i in 0..n {
                y_stage[i] = y[i] + h * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
            }
            rhs(t + 4.0 * h / 5.0, &y_stage, &mut k[3]);
            for i in 0..n {
                y_stage[i] =
                    y[i] + h * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
            }
            rhs(t + 8.0 * h / 9.0, &y_stage, &mut k[4]);
            for i in 0..n {
                y_stage[i] = y[i]
                    + h * (A61 * k[0][i]
                        + A62 * k[1][i]
                        + A63 * k[2][i]
                        + A64 * k[3][i]
                        + A65 * k[4][i]);
            }
            rhs(t + h, &y_stage, &mut k[5]);
            for i in 0..n {
                y_new[i] = y[i]
                    + h * (B1 * k[0][i]
                        + B3 * k[2][i]
                        + B4 * k[3][i]
                        + B5 * k[4][i]
                        + B6 * k[5][i]);
            }
            rhs(t + h, &y_new, &mut k[6]); // FSAL

            let mut err = 0.0;
            let mut finite = true;
            for i in 0..n {
                if !y_new[i].is_finite() {
                    finite = false;
                    break;
                }
                let e = h
                    * (E1 * k[0][i]
                        + E3 * k[2][i]
                        + E4 * k[3][i]
                        + E5 * k[4][i]
                        + E6 * k[5][i]
                        + E7 * k[6][i]);
                let sc = atol + rtol * y[i].abs().max(y_new[i].abs());
                err += (e / sc) * (e / sc);
            }
            err = if finite {
                (err / n as f64).sqrt()
            } else {
                f64::INFINITY
            };

            if err <= 1.0 {
                // dense interpolant for output times inside (t, t + h]
                if out_idx < t_out.len() && t_out[out_idx] <= t + h {
                    let rcont = dense_coefficients(&y, &y_new, &k, h, n);
                    while out_idx < t_out.len() && t_out[out_idx] <= t + h + 1e-14 * h {
                        let theta = ((t_out[out_idx] - t) / h).clamp(0.0, 1.0);
                        out.push(interpolate(&rcont, theta, n));
                        out_idx += 1;
                    }
                }
                t += h;
                core::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                check_band(model, t, &y, atol, &mut warnings);

                let fac = if err == 0.0 {
                    10.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 10.0)
                };
                h *= if rejected { fac.min(1.0) } else { fac };
                rejected = false;
            } else {
                let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                h *= fac;
                rejected = true;
            }
        }
    }

    debug_assert_eq!(out_idx, t_out.len());
    Ok((out, warnings))
}

fn dense_coefficients(y: &[f64], y_new: &[f64], k: &[Vec<f64>], h: f64, n: usize) -> [Vec<f64>; 5] {
    let mut r1 = vec![0.0; n];
    let mut r2 = vec![0.0; n];
    let mut r3 = vec![0.0; n];
    let mut r4 = vec![0.0; n];
    let mut r5 = vec![0.0; n];
    for i in 0..n {
        let delta = y_new[i] - y[i];
        r1[i] = y[i];
        r2[i] = delta;
        r3[i] = h * k[0][i] - delta;
        r4[i] = delta - h * k[6][i] - r3[i];
        r5[i] = h
            * (D1 * k[0][i]
                + D3 * k[2][i]
                + D4 * k[3][i]
                + D5 * k[4][i]
                + D6 * k[5][i]
                + D7 * k[6][i]);
    }
    [r1, r2, r3, r4, r5]
}

fn interpolate(rcont: &[Vec<f64>; 5], theta: f64, n: usize) -> Vec<f64> {
    let th1 = 1.0 - theta;
    (0..n)
        .map(|i| {
            rcont[0][i]
                + theta
                    * (rcont[1][i]
                        + th1 * (rcont[2][i] + theta * (rcont[3][i] + th1 * rcont[4][i])))
        })
        .collect()
}

/// Hairer's starting-step heuristic for an order-5 method.
fn initial_step(
    rhs: &dyn Fn(f64, &[f64], &mut [f64]),
    t: f64,
    y: &[f64],
    f0: &[f64],
    t_end: f64,
    rtol: f64,
    atol: f64,
) -> f64 {
    let n = y.len();
    let sc: Vec<f64> = y.iter().map(|v| atol + rtol * v.abs()).collect();
    let d0 = norm_scaled(y, &sc);
    let d1 = norm_scaled(f0, &sc);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(t_end - t);

    let y1: Vec<f64> = (0..n).map(|i| y[i] + h0 * f0[i]).collect();
    let mut f1 = vec![0.0; n];
    rhs(t + h0, &y1, &mut f1);
    let df: Vec<f64> = (0..n).map(|i| f1[i] - f0[i]).collect();
    let d2 = norm_scaled(&df, &sc) / h0;

    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(t_end - t)
}

fn norm_scaled(v: &[f64], sc: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, c) in v.iter().zip(sc) {
        s += (x / c) * (x / c);
    }
    (s / v.len() as f64).sqrt()
}

fn check_band(model: &ModelSpec, t: f64, y: &[f64], atol: f64, warnings: &mut Vec<String>) {
    if warnings.len() >= 3 {
        return;
    }
    for (i, &v) in y.iter().enumerate() {
        if v < -atol || v > model.n_pop() + atol {
            warnings.push(format!(
                "state {} = {v:.6e} outside [-atol, n_pop + atol] at t = {t:.4}",
                model.state_names()[i]
            ));
            return;
        }
    }
}
