//! Closed-form propagation for real 2x2 first-order systems.
//!
//! The projected two-level generators built in this crate are singular by
//! construction (one conserved direction), so their eigenvalues {0, trace}
//! come out exactly in floating point and the matrix exponential reduces to
//! two spectral projectors. The confluent branch covers the measure-zero
//! case of a double eigenvalue.

use crate::error::{Error, Result};

/// A real 2x2 matrix acting on column vectors, stored row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoByTwo {
    pub m: [[f64; 2]; 2],
}

impl TwoByTwo {
    pub fn new(m: [[f64; 2]; 2]) -> Self {
        TwoByTwo { m }
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn determinant(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    /// Real eigenvalue pair, largest first. A negative discriminant within
    /// rounding noise of zero is clamped; a genuinely complex pair is an
    /// error (the generators built here always have real spectra).
    pub fn eigenvalues(&self) -> Result<(f64, f64)> {
        let t = self.trace();
        let d = self.determinant();
        let disc = t * t - 4.0 * d;
        let scale = t * t + 4.0 * d.abs();
        if disc < -1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidParameter(format!(
                "2x2 system has a complex eigenvalue pair (trace {t:.6e}, determinant {d:.6e})"
            )));
        }
        let root = disc.max(0.0).sqrt();
        // Standard cancellation-free form: compute the larger-magnitude root
        // first, recover the other from the determinant when possible.
        let (mu_big, mu_small) = if t >= 0.0 {
            let big = 0.5 * (t + root);
            (big, if big != 0.0 { d / big } else { 0.5 * (t - root) })
        } else {
            let big = 0.5 * (t - root);
            (big, if big != 0.0 { d / big } else { 0.5 * (t + root) })
        };
        Ok(if mu_big >= mu_small { (mu_big, mu_small) } else { (mu_small, mu_big) })
    }

    fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }

    /// `exp(M t) v`, via the spectral projectors of the two eigenvalues or
    /// the confluent form `e^{mu t} (I + (M - mu I) t)` when they collide.
    pub fn propagate(&self, v: [f64; 2], t: f64) -> Result<[f64; 2]> {
        let (mu1, mu2) = self.eigenvalues()?;
        let spread = (mu1 - mu2).abs();
        if spread <= 1e-12 * mu1.abs().max(mu2.abs()) {
            let mu = 0.5 * (mu1 + mu2);
            let shifted = [
                self.m[0][0] - mu,
                self.m[0][1],
                self.m[1][0],
                self.m[1][1] - mu,
            ];
            let w = [
                v[0] + t * (shifted[0] * v[0] + shifted[1] * v[1]),
                v[1] + t * (shifted[2] * v[0] + shifted[3] * v[1]),
            ];
            let amp = (mu * t).exp();
            return Ok([amp * w[0], amp * w[1]]);
        }
        // P1 = (M - mu2 I)/(mu1 - mu2), P2 = (M - mu1 I)/(mu2 - mu1).
        let mv = self.apply(v);
        let p1 = [(mv[0] - mu2 * v[0]) / (mu1 - mu2), (mv[1] - mu2 * v[1]) / (mu1 - mu2)];
        let p2 = [(mv[0] - mu1 * v[0]) / (mu2 - mu1), (mv[1] - mu1 * v[1]) / (mu2 - mu1)];
        let (a1, a2) = ((mu1 * t).exp(), (mu2 * t).exp());
        Ok([a1 * p1[0] + a2 * p2[0], a1 * p1[1] + a2 * p2[1]])
    }

    /// The `t -> infinity` limit of `exp(M t) v`. Requires a non-positive
    /// spectrum; the component along a strictly decaying mode vanishes and
    /// the component along a (numerically) zero mode survives.
    pub fn limit(&self, v: [f64; 2]) -> Result<[f64; 2]> {
        let (mu1, mu2) = self.eigenvalues()?;
        if mu1 > 1e-12 * mu2.abs().max(1e-300) {
            return Err(Error::InvalidParameter(format!(
                "2x2 system has a growing mode (eigenvalue {mu1:.6e})"
            )));
        }
        if mu1 < 0.0 && (mu1 - mu2).abs() > 1e-12 * mu2.abs() {
            // Both modes decay strictly.
            return Ok([0.0, 0.0]);
        }
        if (mu1 - mu2).abs() <= 1e-12 * mu1.abs().max(mu2.abs()) {
            // Confluent at (numerically) zero: M is nilpotent-plus-zero and
            // the limit only exists for vectors M annihilates.
            let mv = self.apply(v);
            if mv[0].abs().max(mv[1].abs()) > 0.0 {
                return Err(Error::InvalidParameter(
                    "2x2 limit is undefined for a confluent zero eigenvalue".into(),
                ));
            }
            return Ok(v);
        }
        let mv = self.apply(v);
        Ok([(mv[0] - mu2 * v[0]) / (mu1 - mu2), (mv[1] - mu2 * v[1]) / (mu1 - mu2)])
    }
}
