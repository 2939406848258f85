//! Sign-aware logarithmic arithmetic.
//!
//! Shell ladders after calibration carry similarity scales as large as
//! e^{±1800}, so eigenmode sums are evaluated as signed log-sum-exp: every
//! term is a sign together with the log of its magnitude, positive and
//! negative groups are reduced separately, and only the final difference is
//! exponentiated. The cancellation bound the caller receives makes it
//! explicit when a value is smaller than the rounding noise of that
//! difference.

/// A real number stored as `sign * exp(ln_abs)`.
///
/// `sign == 0.0` encodes exact zero (with `ln_abs = -inf`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    pub sign: f64,
    pub ln_abs: f64,
}

impl SignedLog {
    pub const ZERO: SignedLog = SignedLog { sign: 0.0, ln_abs: f64::NEG_INFINITY };

    pub fn from_value(v: f64) -> Self {
        if v == 0.0 {
            Self::ZERO
        } else {
            SignedLog { sign: v.signum(), ln_abs: v.abs().ln() }
        }
    }

    pub fn value(&self) -> f64 {
        self.sign * self.ln_abs.exp()
    }
}

/// Result of a signed log-sum-exp reduction.
#[derive(Debug, Clone, Copy)]
pub struct SignedSum {
    /// The sum as `sign * exp(ln_abs)`.
    pub total: SignedLog,
    /// Log of the largest single group magnitude that entered the final
    /// subtraction. `total` is only trustworthy to about
    /// `exp(ln_scale) * 1e-16` in absolute terms.
    pub ln_scale: f64,
}

impl SignedSum {
    /// Absolute error bound of `total.value()` from the final cancellation.
    pub fn error_bound(&self) -> f64 {
        if self.ln_scale == f64::NEG_INFINITY {
            0.0
        } else {
            // exp(ln_scale) * ~1e-15: a few ulps of the largest group.
            (self.ln_scale - 34.5).exp()
        }
    }
}

/// Reduce signed logarithmic terms, grouping by sign before the final
/// subtraction so that no intermediate exponentiation can overflow.
pub fn signed_log_sum(terms: impl IntoIterator<Item = SignedLog>) -> SignedSum {
    let mut pos: Vec<f64> = Vec::new();
    let mut neg: Vec<f64> = Vec::new();
    for t in terms {
        if t.sign > 0.0 {
            pos.push(t.ln_abs);
        } else if t.sign < 0.0 {
            neg.push(t.ln_abs);
        }
    }
    let lp = log_sum_exp(&pos);
    let ln = log_sum_exp(&neg);
    let ln_scale = lp.max(ln);
    let total = if lp == f64::NEG_INFINITY && ln == f64::NEG_INFINITY {
        SignedLog::ZERO
    } else if lp >= ln {
        // sum = exp(lp) - exp(ln) = exp(lp) * (1 - exp(ln - lp))
        let diff = (-((ln - lp).exp())).ln_1p();
        if diff == f64::NEG_INFINITY && lp == ln {
            SignedLog::ZERO
        } else {
            SignedLog { sign: 1.0, ln_abs: lp + diff }
        }
    } else {
        let diff = (-((lp - ln).exp())).ln_1p();
        SignedLog { sign: -1.0, ln_abs: ln + diff }
    };
    SignedSum { total, ln_scale }
}

/// Standard log-sum-exp of a slice of logarithms; `-inf` for an empty slice.
pub fn log_sum_exp(ln_terms: &[f64]) -> f64 {
    let m = ln_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = ln_terms.iter().map(|&l| (l - m).exp()).sum();
    m + s.ln()
}

/// Table of ln(k!) for k = 0..=n, built by compensated summation of ln k.
pub fn ln_factorial_table(n: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(n + 1);
    table.push(0.0);
    let mut sum = 0.0f64;
    let mut comp = 0.0f64; // Kahan correction
    for k in 1..=n {
        let term = (k as f64).ln() - comp;
        let next = sum + term;
        comp = (next - sum) - term;
        sum = next;
        table.push(sum);
    }
    table
}

/// ln C(n, k) from a precomputed `ln_factorial_table(n)`.
pub fn ln_binomial(table: &[f64], n: usize, k: usize) -> f64 {
    debug_assert!(k <= n && n < table.len());
    table[n] - table[k] - table[n - k]
}
