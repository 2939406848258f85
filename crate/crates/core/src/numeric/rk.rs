//! Embedded Dormand–Prince 5(4) integrator with step-size control.
//!
//! The state is a flat `&[f64]` slice and the right-hand side a closure, so
//! the same driver integrates real rate vectors and complex density matrices
//! (viewed as interleaved real pairs). Output times are hit exactly by
//! clipping steps, which keeps sampled trajectories free of interpolation
//! error at the cost of shortened steps near nodes; the callers here sample
//! at most a few hundred points per run, where that cost is negligible.

use crate::error::{Error, Result};

/// Tolerances and limits for [`integrate_path`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Hard cap on accepted + rejected steps before giving up.
    pub max_steps: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        AdaptiveOptions { rel_tol: 1e-10, abs_tol: 1e-13, max_steps: 50_000_000 }
    }
}

// Butcher tableau of the Dormand–Prince 5(4) pair (the classic ode45 pair).
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
// Fifth-order solution weights (k2 never contributes).
const B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
// Difference between the 5th- and embedded 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrate `y' = rhs(t, y)` from `t0`, recording the state at each of the
/// strictly increasing `sample_times` (all must be `>= t0`). Returns one
/// state vector per sample time.
pub fn integrate_path<F>(
    mut rhs: F,
    t0: f64,
    y0: &[f64],
    sample_times: &[f64],
    opts: &AdaptiveOptions,
) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    if sample_times.windows(2).any(|w| w[1] <= w[0]) || sample_times.first().is_some_and(|&t| t < t0) {
        return Err(Error::UnsortedTimes);
    }
    let dim = y0.len();
    let mut out = Vec::with_capacity(sample_times.len());
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = (0..7).map(|_| vec![0.0; dim]).collect();
    let mut y_stage = vec![0.0; dim];
    let mut y_next = vec![0.0; dim];

    rhs(t, &y, &mut k[0]);
    let mut h = initial_step(t0, &y, &k[0], sample_times, opts);
    let mut steps = 0usize;

    for &t_target in sample_times {
        if t_target == t {
            out.push(y.clone());
            continue;
        }
        while t < t_target {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::IntegrationFailure(format!(
                    "step budget of {} exhausted at t = {t:.6e}",
                    opts.max_steps
                )));
            }
            let clipped = h.min(t_target - t);
            if clipped <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
                return Err(Error::IntegrationFailure(format!(
                    "step size underflow ({clipped:.3e}) at t = {t:.6e}"
                )));
            }

            // Six derivative stages (k[0] is fresh from FSAL or the start).
            stage(&y, &k, &A2, clipped, &mut y_stage);
            rhs(t + C[0] * clipped, &y_stage, &mut k[1]);
            stage(&y, &k, &A3, clipped, &mut y_stage);
            rhs(t + C[1] * clipped, &y_stage, &mut k[2]);
            stage(&y, &k, &A4, clipped, &mut y_stage);
            rhs(t + C[2] * clipped, &y_stage, &mut k[3]);
            stage(&y, &k, &A5, clipped, &mut y_stage);
            rhs(t + C[3] * clipped, &y_stage, &mut k[4]);
            stage(&y, &k, &A6, clipped, &mut y_stage);
            rhs(t + C[4] * clipped, &y_stage, &mut k[5]);
            for i in 0..dim {
                y_next[i] = y[i]
                    + clipped
                        * (B[0] * k[0][i]
                            + B[2] * k[2][i]
                            + B[3] * k[3][i]
                            + B[4] * k[4][i]
                            + B[5] * k[5][i]);
            }
            rhs(t + clipped, &y_next, &mut k[6]);

            // Weighted RMS of the embedded error estimate.
            let mut err_sq = 0.0;
            for i in 0..dim {
                let e = clipped
                    * (E[0] * k[0][i]
                        + E[2] * k[2][i]
                        + E[3] * k[3][i]
                        + E[4] * k[4][i]
                        + E[5] * k[5][i]
                        + E[6] * k[6][i]);
                let scale = opts.abs_tol + opts.rel_tol * y[i].abs().max(y_next[i].abs());
                err_sq += (e / scale) * (e / scale);
            }
            let err = (err_sq / dim as f64).sqrt();

            if err <= 1.0 {
                t += clipped;
                std::mem::swap(&mut y, &mut y_next);
                k.swap(0, 6); // FSAL: last stage is the next first stage
                if !y.iter().all(|v| v.is_finite()) {
                    return Err(Error::IntegrationFailure(format!(
                        "state became non-finite at t = {t:.6e}"
                    )));
                }
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            let natural = clipped * factor;
            if err <= 1.0 && clipped < h {
                // The step was shortened only to hit an output node; don't let
                // that permanently shrink the working step.
                h = h.max(natural);
            } else {
                h = natural;
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// Integrate to a single end time and return the final state.
pub fn integrate_to<F>(
    rhs: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    opts: &AdaptiveOptions,
) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    if t_end == t0 {
        return Ok(y0.to_vec());
    }
    let mut path = integrate_path(rhs, t0, y0, &[t_end], opts)?;
    Ok(path.pop().expect("one sample time yields one state"))
}

fn stage(y: &[f64], k: &[Vec<f64>], a: &[f64], h: f64, out: &mut [f64]) {
    for i in 0..y.len() {
        let mut acc = 0.0;
        for (j, &aj) in a.iter().enumerate() {
            acc += aj * k[j][i];
        }
        out[i] = y[i] + h * acc;
    }
}

/// Conservative starting step: small fraction of both the first output span
/// and the timescale implied by the initial derivative.
fn initial_step(t0: f64, y: &[f64], f0: &[f64], sample_times: &[f64], opts: &AdaptiveOptions) -> f64 {
    let span = sample_times.last().map_or(1.0, |&t| (t - t0).max(f64::MIN_POSITIVE));
    let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nf = f0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let der_scale = if nf > 0.0 { 1e-2 * (ny + opts.abs_tol) / nf } else { span };
    (span * 1e-4).min(der_scale).max(span * 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_decay_matches_closed_form() {
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = -2.0 * y[0];
        let times = [0.5, 1.0, 3.0];
        let path = integrate_path(rhs, 0.0, &[1.0], &times, &AdaptiveOptions::default()).unwrap();
        for (y, &t) in path.iter().zip(&times) {
            assert_relative_eq!(y[0], (-2.0 * t).exp(), max_relative = 1e-9);
        }
    }

    #[test]
    fn harmonic_oscillator_preserves_energy() {
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        };
        let y = integrate_to(rhs, 0.0, &[1.0, 0.0], 20.0 * std::f64::consts::PI, &AdaptiveOptions::default())
            .unwrap();
        assert_relative_eq!(y[0], 1.0, epsilon = 1e-7);
        assert_relative_eq!(y[1], 0.0, epsilon = 1e-7);
    }

    #[test]
    fn rejects_unsorted_sample_times() {
        let rhs = |_t: f64, _y: &[f64], dy: &mut [f64]| dy[0] = 0.0;
        let err = integrate_path(rhs, 0.0, &[1.0], &[2.0, 1.0], &AdaptiveOptions::default());
        assert!(matches!(err, Err(Error::UnsortedTimes)));
    }

    #[test]
    fn sample_at_start_time_returns_initial_state() {
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = y[0];
        let path = integrate_path(rhs, 1.0, &[3.0], &[1.0, 2.0], &AdaptiveOptions::default()).unwrap();
        assert_eq!(path[0][0], 3.0);
        assert_relative_eq!(path[1][0], 3.0 * 1.0f64.exp(), max_relative = 1e-9);
    }
}
