//! Exact-to-rounding propagation of upper-bidiagonal linear systems.
//!
//! Zero-temperature shell ladders and emission cascades share one structure:
//! probability flows strictly downward, so the generator has only a diagonal
//! and the coupling from each level into the one below it,
//!
//! ```text
//! x_k' = d_k x_k + u_k x_{k+1},        u_k >= 0.
//! ```
//!
//! Each step evaluates the Taylor series of `exp(h M) x` with the step
//! chosen so `h * ||M||_1 <= 1`. In that regime the series has no
//! destructive hump (partial sums stay within a factor `e` of the result),
//! terms decay factorially after the first few, and the summation is exact
//! to machine rounding — which is what lets these trajectories serve as
//! reference solutions for the closed forms built elsewhere.

use crate::error::{Error, Result};

/// Upper-bidiagonal generator: `diag[k]` acts on `x_k`, `upper[k]` couples
/// `x_{k+1}` into `x_k` (so `upper` is one shorter than `diag`).
#[derive(Debug, Clone)]
pub struct BidiagonalSystem {
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl BidiagonalSystem {
    pub fn new(diag: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::InvalidParameter("empty bidiagonal system".into()));
        }
        if upper.len() + 1 != diag.len() {
            return Err(Error::DimensionMismatch { expected: diag.len() - 1, got: upper.len() });
        }
        for &v in diag.iter().chain(&upper) {
            crate::error::ensure_finite("bidiagonal coefficient", v)?;
        }
        Ok(BidiagonalSystem { diag, upper })
    }

    pub fn dimension(&self) -> usize {
        self.diag.len()
    }

    /// Column-sum norm; column k feeds rows k and k-1.
    fn norm_one(&self) -> f64 {
        let n = self.diag.len();
        (0..n)
            .map(|k| self.diag[k].abs() + if k > 0 { self.upper[k - 1].abs() } else { 0.0 })
            .fold(0.0, f64::max)
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.diag.len();
        for k in 0..n {
            let mut v = self.diag[k] * x[k];
            if k + 1 < n {
                v += self.upper[k] * x[k + 1];
            }
            out[k] = v;
        }
    }

    /// `exp(M h) x`, in place, by Taylor summation. `h` must already satisfy
    /// the step bound; the caller arranges that.
    fn step(&self, x: &mut [f64], h: f64, term: &mut [f64], next: &mut [f64]) -> Result<()> {
        let n = x.len();
        term.copy_from_slice(x);
        // x accumulates the partial sums; term holds h^j M^j x / j!.
        for j in 1..400 {
            self.apply(term, next);
            let scale = h / j as f64;
            let mut term_norm = 0.0f64;
            let mut sum_norm = 0.0f64;
            for k in 0..n {
                term[k] = next[k] * scale;
                x[k] += term[k];
                term_norm = term_norm.max(term[k].abs());
                sum_norm = sum_norm.max(x[k].abs());
            }
            if term_norm <= 1e-18 * sum_norm.max(f64::MIN_POSITIVE) {
                return Ok(());
            }
        }
        Err(Error::ConvergenceFailure(
            "Taylor series for a bidiagonal step did not terminate".into(),
        ))
    }

    /// Propagate `x0` from time 0, returning the state at each of the
    /// non-decreasing, non-negative `times`.
    pub fn propagate_path(&self, x0: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = self.diag.len();
        if x0.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x0.len() });
        }
        if times.iter().any(|t| !t.is_finite() || *t < 0.0)
            || times.windows(2).any(|w| w[1] < w[0])
        {
            return Err(Error::UnsortedTimes);
        }

        let h_max = 1.0 / self.norm_one().max(f64::MIN_POSITIVE);
        let mut x = x0.to_vec();
        let mut term = vec![0.0; n];
        let mut next = vec![0.0; n];
        let mut t = 0.0f64;
        let mut out = Vec::with_capacity(times.len());
        for &target in times {
            let span = target - t;
            if span > 0.0 {
                let steps = (span / h_max).ceil().max(1.0);
                if steps > 5e8 {
                    return Err(Error::IntegrationFailure(format!(
                        "bidiagonal propagation would need {steps:.1e} steps"
                    )));
                }
                let h = span / steps;
                for _ in 0..steps as u64 {
                    self.step(&mut x, h, &mut term, &mut next)?;
                }
                t = target;
            }
            out.push(x.clone());
        }
        Ok(out)
    }
}
