//! Derived observables on top of the dynamical systems: thermal
//! calibration, threshold-crossing times, scaling-exponent fits, and
//! emission-burst metrics.
//!
//! Everything here consumes trajectories or closed solutions built
//! elsewhere and reduces them to the handful of numbers the sweep
//! experiments report — an inverse temperature matched to a ground-state
//! weight, the time at which a population first clears a threshold, the
//! slope of time versus size on a log-log grid, and the position, height,
//! width, and area of a radiation burst. The functions are deliberately
//! defensive: a threshold the dynamics cannot reach is an error
//! ([`Error::UnreachableThreshold`]), never a large number, and a burst
//! the grid cannot resolve is [`Error::GridTooCoarse`], never a wrong
//! width.

use std::ops::Range;

use crate::bath::{BathSpectrum, SpectralDensity};
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::model::{gibbs_ground_probability, ShellLadder};
use crate::numeric::bidiagonal::BidiagonalSystem;
use crate::reduced::{build_ladder, CascadeCoefficients, Method};

/// Largest inverse temperature the calibration search will try. A target
/// that still is not met here is reported as unattainable rather than
/// returning an absurd temperature.
pub const CALIBRATION_BETA_CAP: f64 = 1e6;

/// The two probabilities a sweep experiment is parameterized by: the
/// thermal ground-state weight the bath is calibrated to, and the ground
/// population that counts as success.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationTarget {
    gibbs_ground: f64,
    success_threshold: f64,
}

impl CalibrationTarget {
    /// Both probabilities, checked for `0 < threshold < gibbs_ground <= 1`:
    /// the stationary weight must clear the success bar, or no run could
    /// ever succeed.
    pub fn new(gibbs_ground: f64, success_threshold: f64) -> Result<Self> {
        ensure_finite("calibration ground weight", gibbs_ground)?;
        ensure_finite("success threshold", success_threshold)?;
        if !(success_threshold > 0.0 && success_threshold < gibbs_ground && gibbs_ground <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "calibration needs 0 < threshold < ground weight <= 1, \
                 got threshold {success_threshold} and ground weight {gibbs_ground}"
            )));
        }
        Ok(CalibrationTarget { gibbs_ground, success_threshold })
    }

    pub fn gibbs_ground(&self) -> f64 {
        self.gibbs_ground
    }

    pub fn success_threshold(&self) -> f64 {
        self.success_threshold
    }
}

impl Default for CalibrationTarget {
    /// Ground weight 0.95, success at 0.9.
    fn default() -> Self {
        CalibrationTarget { gibbs_ground: 0.95, success_threshold: 0.9 }
    }
}

/// Find the inverse temperature at which the thermal ground-state weight of
/// `levels = (energy, ln degeneracy)` equals `target`, by bisection on the
/// monotone map `beta -> P_ground` to relative precision `1e-12`.
///
/// The target must lie strictly between the infinite-temperature weight
/// (where every state is equally likely) and one. Targets that would need
/// `beta` beyond [`CALIBRATION_BETA_CAP`] fail with
/// [`Error::UnattainableTarget`].
pub fn calibrate_beta(levels: &[(f64, f64)], target: f64) -> Result<f64> {
    ensure_finite("calibration target", target)?;
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "calibration target must lie strictly inside (0, 1), got {target}"
        )));
    }
    let mut lo = 1e-12;
    if gibbs_ground_probability(levels, lo)? >= target {
        return Err(Error::InvalidParameter(format!(
            "target {target} is not above the infinite-temperature ground weight; \
             every positive inverse temperature already exceeds it"
        )));
    }
    let mut hi = 1.0;
    while gibbs_ground_probability(levels, hi)? < target {
        lo = hi;
        hi *= 2.0;
        if hi > CALIBRATION_BETA_CAP {
            return Err(Error::UnattainableTarget { target, cap: CALIBRATION_BETA_CAP });
        }
    }
    for _ in 0..200 {
        if hi - lo <= 1e-12 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if gibbs_ground_probability(levels, mid)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// First time the ground population reaches `threshold`.
///
/// `ground` evaluates the trajectory as `(value, error bound)` at an
/// absolute time; `stationary` is its known long-time limit, and
/// `time_scale` a rough guess for when things happen (any decay-time
/// estimate works — the bracketing march is geometric, so only its order
/// of magnitude matters).
///
/// A threshold already met at `t = 0` returns zero. A threshold at or
/// above the stationary value is [`Error::UnreachableThreshold`] — the
/// honest answer for dynamics that never arrive, not a large time. The
/// march also cross-checks that samples approach the stationary value
/// monotonically (within the evaluator's error bounds) and reports
/// [`Error::NotMonotone`] otherwise. The crossing is refined by bisection
/// to relative precision `1e-8`.
pub fn relaxation_time<F>(
    threshold: f64,
    stationary: f64,
    time_scale: f64,
    mut ground: F,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<(f64, f64)>,
{
    ensure_finite("success threshold", threshold)?;
    ensure_finite("stationary ground population", stationary)?;
    ensure_positive("time scale", time_scale)?;
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold must lie strictly inside (0, 1), got {threshold}"
        )));
    }

    let (initial, initial_error) = ground(0.0)?;
    if initial >= threshold {
        return Ok(0.0);
    }
    if stationary <= threshold {
        return Err(Error::UnreachableThreshold { stationary, threshold });
    }

    // Geometric march until the first sample at or above the threshold.
    let mut lo = 0.0;
    let mut hi = time_scale;
    let mut previous = (initial, initial_error);
    let mut bracketed = false;
    for _ in 0..200 {
        let (value, error) = ground(hi)?;
        if value + error + 1e-12 < previous.0 - previous.1 {
            return Err(Error::NotMonotone);
        }
        if value >= threshold {
            bracketed = true;
            break;
        }
        previous = (value, error);
        lo = hi;
        hi *= 2.0;
    }
    if !bracketed {
        return Err(Error::ConvergenceFailure(format!(
            "ground population stayed below {threshold} out to t = {lo:.3e} \
             although the stationary value {stationary} exceeds it"
        )));
    }

    for _ in 0..200 {
        if hi - lo <= 1e-8 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if ground(mid)?.0 >= threshold {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// A fitted power law `time ~ amplitude * size^exponent` over the
/// asymptotic window of a sweep.
#[derive(Debug, Clone)]
pub struct ScalingResult {
    /// The sweep samples `(size, time)` the fit was made from.
    pub points: Vec<(f64, f64)>,
    /// Least-squares slope of `ln time` versus `ln size` on the window.
    pub exponent: f64,
    /// `exp` of the fitted intercept.
    pub amplitude: f64,
    /// Index range of the fitted points within `points`.
    pub window: Range<usize>,
    /// Root-mean-square residual of `ln time` over the window.
    pub residual: f64,
}

/// Fit the asymptotic scaling exponent of `(size, time)` samples.
///
/// Closed-form decay times carry subleading corrections at small sizes, so
/// the fit uses only the largest-size half of the samples; at least four
/// points are required so that the window holds at least two.
pub fn scaling_exponent(points: &[(f64, f64)]) -> Result<ScalingResult> {
    if points.len() < 4 {
        return Err(Error::InsufficientData { need: 4, got: points.len() });
    }
    for window in points.windows(2) {
        if window[1].0 <= window[0].0 {
            return Err(Error::InvalidParameter(
                "sweep sizes must be strictly increasing".into(),
            ));
        }
    }
    for &(size, time) in points {
        ensure_positive("sweep size", size)?;
        ensure_positive("sweep time", time)?;
    }

    let window = points.len() / 2..points.len();
    let logs: Vec<(f64, f64)> =
        points[window.clone()].iter().map(|&(s, t)| (s.ln(), t.ln())).collect();
    let m = logs.len() as f64;
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let mut covariance = 0.0;
    let mut variance = 0.0;
    for &(x, y) in &logs {
        covariance += (x - mean_x) * (y - mean_y);
        variance += (x - mean_x) * (x - mean_x);
    }
    let exponent = covariance / variance;
    let intercept = mean_y - exponent * mean_x;
    let residual = (logs
        .iter()
        .map(|&(x, y)| {
            let r = y - (intercept + exponent * x);
            r * r
        })
        .sum::<f64>()
        / m)
        .sqrt();

    Ok(ScalingResult { points: points.to_vec(), exponent, amplitude: intercept.exp(), window, residual })
}

/// Shape summary of a radiation burst: where it peaks, how high, how wide
/// at half maximum, and the area under the whole sampled curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakMetrics {
    pub t_peak: f64,
    pub i_peak: f64,
    /// Full width at half maximum. For a curve that is maximal at the
    /// first sample (pure decay) the left edge is the grid start, so this
    /// degrades gracefully to the half-value crossing time.
    pub width: f64,
    /// Trapezoidal integral over the full grid.
    pub total_energy: f64,
}

/// Measure a sampled intensity curve.
///
/// The discrete maximum is refined by the vertex of the parabola through
/// it and its neighbours; the half-maximum edges come from linear
/// interpolation of the bracketing samples. A maximum on the last sample
/// means the burst was not captured ([`Error::NoPeak`]); a grid whose
/// above-half region holds fewer than 50 samples, or that ends before the
/// curve falls back below half maximum, is [`Error::GridTooCoarse`].
pub fn peak_metrics(times: &[f64], intensity: &[f64]) -> Result<PeakMetrics> {
    if times.len() != intensity.len() {
        return Err(Error::DimensionMismatch { expected: times.len(), got: intensity.len() });
    }
    if times.len() < 8 {
        return Err(Error::InsufficientData { need: 8, got: times.len() });
    }
    for (&t, &value) in times.iter().zip(intensity) {
        ensure_finite("sample time", t)?;
        ensure_finite("intensity sample", value)?;
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::UnsortedTimes);
    }

    let argmax = intensity
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty samples");
    if argmax == intensity.len() - 1 {
        return Err(Error::NoPeak);
    }

    let (t_peak, i_peak) = if argmax == 0 {
        (times[0], intensity[0])
    } else {
        parabolic_vertex(
            (times[argmax - 1], intensity[argmax - 1]),
            (times[argmax], intensity[argmax]),
            (times[argmax + 1], intensity[argmax + 1]),
        )
    };

    let half = 0.5 * i_peak;
    let above_half = intensity.iter().filter(|&&v| v >= half).count();
    if above_half < 50 {
        return Err(Error::GridTooCoarse { samples: above_half, need: 50 });
    }

    let left = (0..argmax)
        .rev()
        .find(|&i| intensity[i] < half)
        .map(|i| crossing_time(times[i], intensity[i], times[i + 1], intensity[i + 1], half))
        .unwrap_or(times[0]);
    let right = (argmax + 1..intensity.len())
        .find(|&i| intensity[i] < half)
        .map(|i| crossing_time(times[i - 1], intensity[i - 1], times[i], intensity[i], half))
        .ok_or(Error::GridTooCoarse { samples: above_half, need: 50 })?;

    let total_energy = times
        .windows(2)
        .zip(intensity.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum();

    Ok(PeakMetrics { t_peak, i_peak, width: right - left, total_energy })
}

/// Vertex of the parabola through three points whose middle ordinate is
/// the largest; falls back to the middle point for (near-)collinear
/// samples, where the quadratic has no interior maximum.
fn parabolic_vertex(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> (f64, f64) {
    let d_left = (b.1 - a.1) / (b.0 - a.0);
    let d_right = (c.1 - b.1) / (c.0 - b.0);
    let curvature = (d_right - d_left) / (c.0 - a.0);
    if curvature >= 0.0 {
        return (b.0, b.1);
    }
    // Newton form f(t) = f(a) + d_left (t - a) + curvature (t - a)(t - b)
    // is stationary at the midpoint of a and b shifted by the slope.
    let t = 0.5 * (a.0 + b.0) - 0.5 * d_left / curvature;
    let value = a.1 + d_left * (t - a.0) + curvature * (t - a.0) * (t - b.0);
    (t, value)
}

/// Linear interpolation of the time where a segment crosses `level`.
fn crossing_time(t0: f64, v0: f64, t1: f64, v1: f64, level: f64) -> f64 {
    if v1 == v0 {
        return 0.5 * (t0 + t1);
    }
    t0 + (level - v0) / (v1 - v0) * (t1 - t0)
}

/// Closed-form approximation to the collective emission intensity of `n`
/// fully excited spins: `omega0 g lambda^2 n^2 e^{-2ut}(e^{ut} - 1)` with
/// `u = lambda^2 g n`. Valid for large `n`; exact in neither limit but
/// within tens of percent of the full burst shape.
pub fn approx_intensity(n_qubits: usize, lambda: f64, g: f64, omega0: f64, t: f64) -> f64 {
    let n = n_qubits as f64;
    let u = lambda * lambda * g * n;
    omega0 * g * lambda * lambda * n * n * (-2.0 * u * t).exp() * ((u * t).exp() - 1.0)
}

/// Peak position, height, and width of [`approx_intensity`], all in closed
/// form, plus its full time integral `omega0 n / 2`.
///
/// The integral is *half* the actual radiated energy `omega0 n`: the
/// approximation follows only the two uppermost shells, which carry half
/// the emission. Position scales as `1/n`, height as `n^2`, width as
/// `1/n`.
pub fn approx_peaks(n_qubits: usize, lambda: f64, g: f64, omega0: f64) -> PeakMetrics {
    let n = n_qubits as f64;
    let u = lambda * lambda * g * n;
    PeakMetrics {
        t_peak: std::f64::consts::LN_2 / u,
        i_peak: 0.25 * omega0 * lambda * lambda * g * n * n,
        width: 2.0 * (1.0 + std::f64::consts::SQRT_2).ln() / u,
        total_energy: 0.5 * omega0 * n,
    }
}

/// The time grid for an emission record: linear across the burst support
/// (about twelve collective half-lives, 6001 samples) and geometric out to
/// fourteen single-spin lifetimes (3000 samples), where the slowest channel
/// has radiated all but `~1e-6` of its energy.
pub fn emission_grid(n_qubits: usize, lambda: f64, g: f64) -> Result<Vec<f64>> {
    ensure_positive("system-bath coupling", lambda)?;
    ensure_positive("coupling density", g)?;
    if n_qubits == 0 {
        return Err(Error::InvalidParameter("emission needs at least one spin".into()));
    }

    // Burst support: the collective burst sits within a few multiples of
    // 1/(lambda^2 g n); the incoherent tail stretches to 1/(lambda^2 g).
    let collective_rate = lambda * lambda * g * n_qubits as f64;
    let single_rate = lambda * lambda * g;
    let linear_end = 12.0 * std::f64::consts::LN_2 / collective_rate;
    let end = (14.0 / single_rate).max(2.0 * linear_end);

    let linear_samples = 6000;
    let mut times = Vec::with_capacity(linear_samples + 3001);
    for i in 0..=linear_samples {
        times.push(linear_end * i as f64 / linear_samples as f64);
    }
    let geometric_samples = 3000;
    let ratio = (end / linear_end).powf(1.0 / geometric_samples as f64);
    let mut t = linear_end;
    for _ in 0..geometric_samples {
        t *= ratio;
        times.push(t);
    }
    Ok(times)
}

/// A sampled emission record: the time grid, the instantaneous intensity
/// `-d<E>/dt`, and the energy expectation at each sample.
#[derive(Debug, Clone)]
pub struct EmissionTrace {
    times: Vec<f64>,
    intensity: Vec<f64>,
    energy: Vec<f64>,
}

impl EmissionTrace {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn intensity(&self) -> &[f64] {
        &self.intensity
    }

    pub fn energies(&self) -> &[f64] {
        &self.energy
    }

    /// Energy lost between the first and last sample.
    pub fn radiated_energy(&self) -> f64 {
        self.energy.first().copied().unwrap_or(0.0) - self.energy.last().copied().unwrap_or(0.0)
    }

    /// Burst shape metrics of the intensity record.
    pub fn metrics(&self) -> Result<PeakMetrics> {
        peak_metrics(&self.times, &self.intensity)
    }
}

/// Emit from `n` fully excited spins into a zero-temperature bath with a
/// flat coupling density `g` across the (uniform) level spacing `omega0`,
/// and record the intensity for either emission channel.
///
/// Both channels drain the same energy `n omega0`; the incoherent one
/// decays from a maximum at `t = 0` while the coherent one builds up to a
/// delayed burst of height `~n^2`. The shell cascade is stepped exactly
/// (the collective channel has pairwise-equal decay rates, where
/// closed-form mode sums degenerate) on the grid from [`emission_grid`].
pub fn dicke_emission(
    method: Method,
    n_qubits: usize,
    lambda: f64,
    g: f64,
    omega0: f64,
) -> Result<EmissionTrace> {
    ensure_positive("level spacing", omega0)?;
    let times = emission_grid(n_qubits, lambda, g)?;

    let coefficients =
        CascadeCoefficients::zero_temperature(method, n_qubits, lambda, 1.0, g)?;
    let stepper =
        BidiagonalSystem::new(coefficients.betas().to_vec(), coefficients.gammas().to_vec())?;
    let mut top = vec![0.0; n_qubits + 1];
    top[n_qubits] = 1.0;
    let path = stepper.propagate_path(&top, &times)?;

    let half_span = 0.5 * n_qubits as f64 * omega0;
    let energies = (0..=n_qubits).map(|alpha| alpha as f64 * omega0 - half_span).collect();
    let ladder = ShellLadder::with_energies(n_qubits, energies)?;
    let bath = BathSpectrum::zero_temperature(SpectralDensity::Flat { amplitude: g })?;
    let chain = build_ladder(method, &ladder, &bath, lambda, 1.0)?;

    let mut intensity = Vec::with_capacity(times.len());
    let mut energy = Vec::with_capacity(times.len());
    for z in &path {
        intensity.push(chain.energy_flux(z)?);
        energy.push(chain.energy_expectation(z)?);
    }
    Ok(EmissionTrace { times, intensity, energy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn calibration_matches_the_closed_inversions() {
        // Two levels at gap 1 with threefold-degenerate top: the weight
        // equation inverts to beta = ln(3 * 0.95 / 0.05) = ln 57.
        let levels = [(0.0, 0.0), (1.0, 3f64.ln())];
        let beta = calibrate_beta(&levels, 0.95).unwrap();
        assert_relative_eq!(beta, 57f64.ln(), max_relative = 1e-10);
        assert_abs_diff_eq!(
            gibbs_ground_probability(&levels, beta).unwrap(),
            0.95,
            epsilon = 1e-10
        );

        // Three equidistant levels with a doubly degenerate middle:
        // 1/(1 + x)^2 = 0.95 for x = e^{-beta}.
        let levels = [(0.0, 0.0), (1.0, 2f64.ln()), (2.0, 0.0)];
        let beta = calibrate_beta(&levels, 0.95).unwrap();
        let expected = -(1.0 / 0.95f64.sqrt() - 1.0).ln();
        assert_relative_eq!(beta, expected, max_relative = 1e-10);
        assert_abs_diff_eq!(
            gibbs_ground_probability(&levels, beta).unwrap(),
            0.95,
            epsilon = 1e-10
        );
    }

    #[test]
    fn calibration_rejects_unattainable_targets() {
        // A gap of 1e-6 needs beta ~ 2.9e6 for a 0.95 ground weight —
        // beyond the search cap.
        let narrow = [(0.0, 0.0), (1e-6, 0.0)];
        assert!(matches!(calibrate_beta(&narrow, 0.95), Err(Error::UnattainableTarget { .. })));

        let levels = [(0.0, 0.0), (1.0, 0.0)];
        assert!(matches!(calibrate_beta(&levels, 1.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(calibrate_beta(&levels, 0.0), Err(Error::InvalidParameter(_))));
        // Below the infinite-temperature weight of 1/2 nothing needs doing.
        assert!(matches!(calibrate_beta(&levels, 0.2), Err(Error::InvalidParameter(_))));

        assert!(CalibrationTarget::new(0.95, 0.9).is_ok());
        assert!(CalibrationTarget::new(0.9, 0.95).is_err());
        assert!(CalibrationTarget::new(1.1, 0.9).is_err());
        assert!(CalibrationTarget::new(0.95, 0.0).is_err());
        let default = CalibrationTarget::default();
        assert_eq!(default.gibbs_ground(), 0.95);
        assert_eq!(default.success_threshold(), 0.9);
    }

    #[test]
    fn relaxation_time_inverts_closed_exponentials() {
        let (p0, p_inf, tau) = (0.25, 0.95, 1234.5);
        let curve = |t: f64| Ok((p_inf + (p0 - p_inf) * (-t / tau).exp(), 0.0));
        let expected = tau * ((p_inf - p0) / (p_inf - 0.9)).ln();

        // The bracketing march only needs the order of magnitude; wildly
        // wrong scale hints land on the same crossing.
        for scale in [1.0, 1e6] {
            let time = relaxation_time(0.9, p_inf, scale, curve).unwrap();
            assert_relative_eq!(time, expected, max_relative = 1e-7);
        }

        // Already satisfied at t = 0.
        assert_eq!(relaxation_time(0.2, p_inf, 1.0, curve).unwrap(), 0.0);

        // At or above the stationary value the crossing never happens.
        assert!(matches!(
            relaxation_time(0.95, p_inf, 1.0, curve),
            Err(Error::UnreachableThreshold { .. })
        ));
        assert!(matches!(
            relaxation_time(0.97, p_inf, 1.0, curve),
            Err(Error::UnreachableThreshold { .. })
        ));
    }

    #[test]
    fn relaxation_time_is_monotone_in_threshold() {
        let (p0, p_inf, tau) = (0.1, 0.97, 42.0);
        let curve = |t: f64| Ok((p_inf + (p0 - p_inf) * (-t / tau).exp(), 0.0));
        let mut previous = 0.0;
        for threshold in [0.3, 0.5, 0.7, 0.9, 0.95] {
            let time = relaxation_time(threshold, p_inf, 1.0, curve).unwrap();
            assert!(time >= previous, "threshold {threshold} went backwards");
            previous = time;
        }
    }

    #[test]
    fn relaxation_time_flags_non_monotone_trajectories() {
        // An oscillating "ground population" is not relaxing towards
        // anything; the march must notice instead of reporting whichever
        // crossing it happened to sample.
        let curve = |t: f64| Ok((0.5 + 0.4 * t.sin(), 0.0));
        assert!(matches!(
            relaxation_time(0.93, 0.95, 1.0, curve),
            Err(Error::NotMonotone)
        ));
    }

    #[test]
    fn exponent_fit_recovers_exact_power_laws() {
        let points: Vec<(f64, f64)> =
            (4..=12).map(|k| (f64::exp2(k as f64), 3.0 * f64::exp2(2.0 * k as f64))).collect();
        let fit = scaling_exponent(&points).unwrap();
        assert_abs_diff_eq!(fit.exponent, 2.0, epsilon = 1e-10);
        assert_relative_eq!(fit.amplitude, 3.0, max_relative = 1e-8);
        assert!(fit.residual <= 1e-12);
        assert_eq!(fit.window, points.len() / 2..points.len());

        // A subleading correction biases the full set but hardly the
        // largest-size window.
        let corrected: Vec<(f64, f64)> =
            points.iter().map(|&(s, t)| (s, t * (1.0 + 5.0 / s))).collect();
        let fit = scaling_exponent(&corrected).unwrap();
        assert_abs_diff_eq!(fit.exponent, 2.0, epsilon = 0.02);
    }

    #[test]
    fn exponent_fit_rejects_bad_samples() {
        assert!(matches!(
            scaling_exponent(&[(1.0, 1.0), (2.0, 4.0), (4.0, 16.0)]),
            Err(Error::InsufficientData { .. })
        ));
        assert!(matches!(
            scaling_exponent(&[(1.0, 1.0), (2.0, 4.0), (2.0, 5.0), (4.0, 16.0)]),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            scaling_exponent(&[(1.0, 1.0), (2.0, 4.0), (3.0, 0.0), (4.0, 16.0)]),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn peak_metrics_recover_a_synthetic_gaussian() {
        let (center, height, sigma) = (4.0, 2.5, 0.7);
        let times: Vec<f64> = (0..=2000).map(|i| 10.0 * i as f64 / 2000.0).collect();
        let values: Vec<f64> = times
            .iter()
            .map(|&t| height * (-(t - center) * (t - center) / (2.0 * sigma * sigma)).exp())
            .collect();
        let metrics = peak_metrics(&times, &values).unwrap();
        assert_abs_diff_eq!(metrics.t_peak, center, epsilon = 1e-4);
        assert_relative_eq!(metrics.i_peak, height, max_relative = 1e-4);
        let fwhm = 2.0 * (2.0 * 2f64.ln()).sqrt() * sigma;
        assert_relative_eq!(metrics.width, fwhm, max_relative = 1e-3);
        let integral = height * sigma * (2.0 * std::f64::consts::PI).sqrt();
        assert_relative_eq!(metrics.total_energy, integral, max_relative = 1e-4);
    }

    #[test]
    fn peak_metrics_handle_boundary_peaks_and_errors() {
        // Pure decay: the peak sits on the first sample and the width
        // degrades to the half-value crossing time.
        let times: Vec<f64> = (0..=1500).map(|i| 8.0 * i as f64 / 1500.0).collect();
        let values: Vec<f64> = times.iter().map(|&t| (-t).exp()).collect();
        let metrics = peak_metrics(&times, &values).unwrap();
        assert_eq!(metrics.t_peak, 0.0);
        assert_eq!(metrics.i_peak, 1.0);
        assert_relative_eq!(metrics.width, 2f64.ln(), max_relative = 1e-4);
        assert_relative_eq!(metrics.total_energy, 1.0 - (-8f64).exp(), max_relative = 1e-4);

        // Still rising at the end of the grid: no peak captured.
        let ramp = times.clone();
        assert!(matches!(peak_metrics(&times, &ramp), Err(Error::NoPeak)));

        // Grid ends before the curve falls below half maximum.
        let short_times: Vec<f64> = (0..=200).map(|i| 0.5 * i as f64 / 200.0).collect();
        let short_values: Vec<f64> = short_times.iter().map(|&t| (-t).exp()).collect();
        assert!(matches!(
            peak_metrics(&short_times, &short_values),
            Err(Error::GridTooCoarse { .. })
        ));

        // A burst sampled by a handful of points cannot be measured.
        let coarse_times: Vec<f64> = (0..=40).map(|i| 10.0 * i as f64 / 40.0).collect();
        let coarse_values: Vec<f64> =
            coarse_times.iter().map(|&t| (-(t - 4.0) * (t - 4.0) / 0.98).exp()).collect();
        assert!(matches!(
            peak_metrics(&coarse_times, &coarse_values),
            Err(Error::GridTooCoarse { .. })
        ));

        assert!(matches!(
            peak_metrics(&times[..5], &values[..5]),
            Err(Error::InsufficientData { .. })
        ));
        assert!(matches!(
            peak_metrics(&times, &values[..10]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn approximate_flash_formulas_match_their_closed_forms() {
        let (n, lambda, g, omega0) = (20, 0.1, 1.0, 1.0);
        let peaks = approx_peaks(n, lambda, g, omega0);
        assert_relative_eq!(peaks.t_peak, 2f64.ln() / 0.2, max_relative = 1e-12);
        assert_relative_eq!(peaks.i_peak, 1.0, max_relative = 1e-12);
        assert_relative_eq!(
            peaks.width,
            2.0 * (1.0 + 2f64.sqrt()).ln() / 0.2,
            max_relative = 1e-12
        );
        assert_relative_eq!(peaks.total_energy, 10.0, max_relative = 1e-12);

        assert_eq!(approx_intensity(n, lambda, g, omega0, 0.0), 0.0);
        assert_relative_eq!(
            approx_intensity(n, lambda, g, omega0, peaks.t_peak),
            peaks.i_peak,
            max_relative = 1e-12
        );

        // Doubling the register halves the delay and quadruples the height.
        let doubled = approx_peaks(2 * n, lambda, g, omega0);
        assert_relative_eq!(doubled.t_peak, 0.5 * peaks.t_peak, max_relative = 1e-12);
        assert_relative_eq!(doubled.i_peak, 4.0 * peaks.i_peak, max_relative = 1e-12);

        // Measuring a dense sampling of the formula recovers its own
        // closed-form metrics.
        let times: Vec<f64> = (0..=8000).map(|i| 40.0 * i as f64 / 8000.0).collect();
        let values: Vec<f64> =
            times.iter().map(|&t| approx_intensity(n, lambda, g, omega0, t)).collect();
        let measured = peak_metrics(&times, &values).unwrap();
        assert_relative_eq!(measured.t_peak, peaks.t_peak, max_relative = 1e-3);
        assert_relative_eq!(measured.i_peak, peaks.i_peak, max_relative = 1e-3);
        assert_relative_eq!(measured.width, peaks.width, max_relative = 1e-3);
        assert_relative_eq!(measured.total_energy, peaks.total_energy, max_relative = 1e-3);
    }

    #[test]
    fn emission_traces_radiate_the_full_excitation_energy() {
        let (n, lambda, g, omega0) = (12, 0.1, 1.0, 1.0);
        let quantum = dicke_emission(Method::Quantum, n, lambda, g, omega0).unwrap();
        let rate = dicke_emission(Method::Rate, n, lambda, g, omega0).unwrap();

        for trace in [&quantum, &rate] {
            // Fully excited start, fully de-excited finish.
            assert_relative_eq!(trace.energies()[0], 0.5 * n as f64, max_relative = 1e-12);
            assert_relative_eq!(trace.radiated_energy(), n as f64, max_relative = 2e-6);
            // Trapezoid area against the exact energy books.
            let metrics = trace.metrics().unwrap();
            assert_relative_eq!(
                metrics.total_energy,
                trace.radiated_energy(),
                max_relative = 1e-6
            );
        }

        // Both channels emit at the single-spin collective rate initially.
        let initial = omega0 * lambda * lambda * g * n as f64;
        assert_relative_eq!(quantum.intensity()[0], initial, max_relative = 1e-10);
        assert_relative_eq!(rate.intensity()[0], initial, max_relative = 1e-10);

        // Incoherent emission only decays; the collective burst is delayed.
        let rate_metrics = rate.metrics().unwrap();
        assert_eq!(rate_metrics.t_peak, 0.0);
        let quantum_metrics = quantum.metrics().unwrap();
        assert!(quantum_metrics.t_peak > 0.0);
        assert!(quantum_metrics.i_peak > 2.0 * rate_metrics.i_peak);

        // The two channels radiate the same total.
        assert_relative_eq!(
            quantum_metrics.total_energy,
            rate_metrics.total_energy,
            max_relative = 1e-3
        );
    }

    #[test]
    fn emission_bursts_sharpen_collectively() {
        let small = dicke_emission(Method::Quantum, 16, 0.1, 1.0, 1.0).unwrap();
        let large = dicke_emission(Method::Quantum, 32, 0.1, 1.0, 1.0).unwrap();
        let small_metrics = small.metrics().unwrap();
        let large_metrics = large.metrics().unwrap();

        // Height grows ~n^2, delay and width shrink ~1/n.
        let height_ratio = large_metrics.i_peak / small_metrics.i_peak;
        assert!((3.4..4.6).contains(&height_ratio), "height ratio {height_ratio}");
        let delay_ratio = large_metrics.t_peak / small_metrics.t_peak;
        assert!((0.4..0.72).contains(&delay_ratio), "delay ratio {delay_ratio}");
        let width_ratio = large_metrics.width / small_metrics.width;
        assert!((0.4..0.72).contains(&width_ratio), "width ratio {width_ratio}");
    }
}
