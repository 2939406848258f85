//! Thermal-bath spectra: transition rates with exact detailed balance and
//! the principal-value shifts that accompany them.
//!
//! A bath at inverse temperature `beta` turns a coupling spectral density
//! `g(omega)` into directional rates
//!
//! ```text
//! gamma(omega) = g(|omega|) / |1 - exp(-beta * omega)|
//! ```
//!
//! for `omega != 0` — emission (`omega > 0`) is enhanced, absorption
//! (`omega < 0`) is Boltzmann-suppressed, and the two sides obey
//! `gamma(-omega) = exp(-beta * omega) * gamma(omega)` ("detailed balance").
//! Both branches are evaluated through `expm1` so that this identity holds
//! to the last bit even for `beta * omega` of order 1e-12 or 1e3.
//!
//! At `omega = 0` the expression above is a genuine limit for densities that
//! vanish linearly (Ohmic: `g(0)/... -> amplitude / beta`) and divergent for
//! a flat density, where the physical zero-frequency rate must be supplied
//! explicitly by the caller.

use crate::error::{ensure_finite, ensure_positive, Error, Result};

/// Frequency dependence of the system-bath coupling density `g(omega)`,
/// defined for `omega >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralDensity {
    /// `g(omega) = amplitude` for all frequencies.
    Flat { amplitude: f64 },
    /// `g(omega) = amplitude * omega`, vanishing linearly at zero.
    Ohmic { amplitude: f64 },
}

impl SpectralDensity {
    /// `g(|omega|)`.
    pub fn value(&self, omega: f64) -> f64 {
        match *self {
            SpectralDensity::Flat { amplitude } => amplitude,
            SpectralDensity::Ohmic { amplitude } => amplitude * omega.abs(),
        }
    }

    pub fn amplitude(&self) -> f64 {
        match *self {
            SpectralDensity::Flat { amplitude } | SpectralDensity::Ohmic { amplitude } => amplitude,
        }
    }

    fn validate(&self) -> Result<()> {
        ensure_positive("spectral density amplitude", self.amplitude()).map(|_| ())
    }
}

/// A bath specification: spectral density, inverse temperature, an optional
/// explicit zero-frequency rate, and an optional table of principal-value
/// shifts for the frequencies a model actually visits.
#[derive(Debug, Clone, PartialEq)]
pub struct BathSpectrum {
    density: SpectralDensity,
    /// Inverse temperature; `f64::INFINITY` selects the zero-temperature bath.
    beta: f64,
    /// Physical rate at zero frequency, when the limit of the rate formula
    /// does not exist (flat density) or should be overridden.
    gamma_zero_override: Option<f64>,
    /// Imaginary (principal-value) parts of the half-Fourier transform,
    /// tabulated per frequency. Empty means "no level shift".
    lamb_shifts: Vec<(f64, f64)>,
}

impl BathSpectrum {
    pub fn new(density: SpectralDensity, beta: f64) -> Result<Self> {
        density.validate()?;
        if beta.is_nan() || beta <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "inverse temperature must be positive (or infinite), got {beta}"
            )));
        }
        Ok(BathSpectrum { density, beta, gamma_zero_override: None, lamb_shifts: Vec::new() })
    }

    /// Bath at infinite inverse temperature: emission only.
    pub fn zero_temperature(density: SpectralDensity) -> Result<Self> {
        Self::new(density, f64::INFINITY)
    }

    /// Supply the zero-frequency rate explicitly.
    pub fn with_gamma_zero(mut self, gamma_zero: f64) -> Result<Self> {
        ensure_finite("zero-frequency rate", gamma_zero)?;
        if gamma_zero < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "zero-frequency rate must be >= 0, got {gamma_zero}"
            )));
        }
        self.gamma_zero_override = Some(gamma_zero);
        Ok(self)
    }

    /// Attach a table of principal-value shifts `s(omega)`; entries are
    /// looked up by frequency with the same tolerance the eigenoperator
    /// construction uses for grouping.
    pub fn with_lamb_shifts(mut self, shifts: Vec<(f64, f64)>) -> Result<Self> {
        for &(omega, s) in &shifts {
            ensure_finite("lamb shift frequency", omega)?;
            ensure_finite("lamb shift value", s)?;
        }
        self.lamb_shifts = shifts;
        Ok(self)
    }

    pub fn density(&self) -> SpectralDensity {
        self.density
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn is_zero_temperature(&self) -> bool {
        self.beta.is_infinite()
    }

    /// Directional rate `gamma(omega)`; `omega > 0` is emission.
    ///
    /// Fails with [`Error::DivergentAtZero`] when `omega == 0`, the density
    /// does not vanish there, and no override was given.
    pub fn gamma(&self, omega: f64) -> Result<f64> {
        ensure_finite("transition frequency", omega)?;
        if omega == 0.0 {
            return self.gamma_zero();
        }
        if self.beta.is_infinite() {
            // Zero temperature: spontaneous emission only.
            return Ok(if omega > 0.0 { self.density.value(omega) } else { 0.0 });
        }
        let y = self.beta * omega.abs();
        // Both branches share the denominator 1 - e^{-y}, y > 0, evaluated
        // with expm1 so it never cancels and never overflows:
        //   emission   gamma(+w) = g / (1 - e^{-y})
        //   absorption gamma(-w) = g e^{-y} / (1 - e^{-y})
        // making the detailed-balance ratio e^{-y} exact to rounding.
        let denominator = -(-y).exp_m1();
        if denominator == 0.0 {
            // beta * |omega| underflowed entirely; physically this is the
            // zero-frequency point.
            return self.gamma_zero();
        }
        let g = self.density.value(omega);
        Ok(if omega > 0.0 { g / denominator } else { g * (-y).exp() / denominator })
    }

    /// The `omega -> 0` rate: the analytic limit when it exists, otherwise
    /// the explicit override.
    pub fn gamma_zero(&self) -> Result<f64> {
        if let Some(g0) = self.gamma_zero_override {
            return Ok(g0);
        }
        match self.density {
            SpectralDensity::Ohmic { amplitude } => {
                // amplitude * |w| / (beta |w|) -> amplitude / beta; zero at T = 0.
                Ok(if self.beta.is_infinite() { 0.0 } else { amplitude / self.beta })
            }
            SpectralDensity::Flat { .. } => Err(Error::DivergentAtZero),
        }
    }

    /// Principal-value shift `s(omega)` from the attached table; zero when
    /// no table entry matches within `tolerance`.
    pub fn lamb_shift(&self, omega: f64, tolerance: f64) -> f64 {
        self.lamb_shifts
            .iter()
            .find(|(w, _)| (w - omega).abs() <= tolerance)
            .map_or(0.0, |&(_, s)| s)
    }

    pub fn has_lamb_shifts(&self) -> bool {
        !self.lamb_shifts.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn flat_unit_bath(beta: f64) -> BathSpectrum {
        BathSpectrum::new(SpectralDensity::Flat { amplitude: 2.0 }, beta).unwrap()
    }

    #[test]
    fn emission_rate_at_unit_frequency() {
        // g / (1 - e^{-beta w}) with g = 2, beta = w = 1.
        let bath = flat_unit_bath(1.0);
        let expected = 2.0 / (1.0 - (-1.0f64).exp());
        assert_relative_eq!(bath.gamma(1.0).unwrap(), expected, max_relative = 1e-15);
    }

    #[test]
    fn detailed_balance_is_exact_across_scales() {
        let bath = flat_unit_bath(1.7);
        for &omega in &[1e-12, 1e-6, 0.1, 1.0, 30.0, 400.0] {
            let up = bath.gamma(omega).unwrap();
            let down = bath.gamma(-omega).unwrap();
            let boltzmann = (-1.7 * omega).exp();
            if down > 0.0 {
                assert_relative_eq!(down / up, boltzmann, max_relative = 1e-14);
            } else {
                // Absorption underflowed, so the Boltzmann factor must have too.
                assert_eq!(boltzmann * up, 0.0);
            }
        }
    }

    #[test]
    fn zero_temperature_is_emission_only() {
        let bath = BathSpectrum::zero_temperature(SpectralDensity::Ohmic { amplitude: 1.0 }).unwrap();
        assert_relative_eq!(bath.gamma(2.5).unwrap(), 2.5, max_relative = 1e-15);
        assert_eq!(bath.gamma(-2.5).unwrap(), 0.0);
        assert_eq!(bath.gamma_zero().unwrap(), 0.0);
    }

    #[test]
    fn ohmic_zero_frequency_limit_is_amplitude_over_beta() {
        let bath = BathSpectrum::new(SpectralDensity::Ohmic { amplitude: 3.0 }, 2.0).unwrap();
        assert_relative_eq!(bath.gamma_zero().unwrap(), 1.5, max_relative = 1e-15);
        // The finite-frequency rate approaches the same limit.
        assert_relative_eq!(bath.gamma(1e-9).unwrap(), 1.5, max_relative = 1e-8);
    }

    #[test]
    fn flat_zero_frequency_needs_override() {
        let bath = flat_unit_bath(1.0);
        assert!(matches!(bath.gamma(0.0), Err(Error::DivergentAtZero)));
        let with_override = bath.with_gamma_zero(0.25).unwrap();
        assert_eq!(with_override.gamma(0.0).unwrap(), 0.25);
    }

    #[test]
    fn near_zero_frequency_follows_the_thermal_limit() {
        // For beta*omega ~ 1e-14 the rate is g/(beta*omega) to 14 digits and
        // must be computed without cancellation.
        let bath = flat_unit_bath(1.0);
        let omega = 1e-14;
        assert_relative_eq!(bath.gamma(omega).unwrap(), 2.0 / omega, max_relative = 1e-13);
        // A product that underflows to zero is treated as the zero-frequency
        // point, which for a flat density demands the explicit override.
        let tiny = BathSpectrum::new(SpectralDensity::Flat { amplitude: 2.0 }, 1e-200).unwrap();
        assert!(matches!(tiny.gamma(1e-200), Err(Error::DivergentAtZero)));
    }

    #[test]
    fn lamb_shift_lookup_uses_tolerance() {
        let bath = flat_unit_bath(1.0).with_lamb_shifts(vec![(1.0, 0.3), (-1.0, -0.2)]).unwrap();
        assert_eq!(bath.lamb_shift(1.0 + 1e-12, 1e-9), 0.3);
        assert_eq!(bath.lamb_shift(0.5, 1e-9), 0.0);
    }
}
