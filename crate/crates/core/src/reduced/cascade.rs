//! Zero-temperature emission cascades in closed form.
//!
//! With no absorption the shell dynamics is a feed-forward chain: stage `k`
//! decays at `beta_k <= 0` and is fed from stage `k + 1` at `gamma_k >= 0`,
//! and everything starts in the top stage. When the decay coefficients are
//! pairwise distinct the Laplace transform telescopes into an explicit
//! product–sum,
//!
//! ```text
//! y_k(t) = [ sum_{a=k}^{n} e^{beta_a t} prod_{b != a} (beta_a - beta_b)^{-1} ]
//!          * prod_{c=k}^{n-1} gamma_c ,
//! ```
//!
//! evaluated here through signed logarithms so the node products neither
//! overflow nor lose their sign bookkeeping. Each coincident pair of decay
//! coefficients costs the product form half the digits of their spacing, so
//! near-degenerate chains (the coherent family is *exactly* degenerate,
//! pairing stages `alpha` and `n + 1 - alpha`) are propagated by exact
//! scaled-Taylor stepping of the bidiagonal system instead.

use crate::error::{ensure_finite, Error, Result};
use crate::numeric::bidiagonal::BidiagonalSystem;
use crate::numeric::logsum::{signed_log_sum, SignedLog};

use super::Method;

/// Below this spacing, relative to the largest decay coefficient, the
/// product–sum form has lost too many digits to meet the library's
/// tolerances and exact stepping takes over.
const DISTINCT_SPACING_RELATIVE: f64 = 1e-4;

/// Decay and feeding coefficients of a zero-temperature cascade.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeCoefficients {
    /// Per-stage decay coefficients, stage order `0..=n` (ground first);
    /// all non-positive.
    betas: Vec<f64>,
    /// Feed of stage `k + 1` into stage `k`, for `k` in `0..n`;
    /// all non-negative.
    gammas: Vec<f64>,
}

impl CascadeCoefficients {
    pub fn new(betas: Vec<f64>, gammas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() || gammas.len() + 1 != betas.len() {
            return Err(Error::DimensionMismatch {
                expected: betas.len().saturating_sub(1),
                got: gammas.len(),
            });
        }
        for &b in &betas {
            ensure_finite("cascade decay coefficient", b)?;
            if b > 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "cascade decay coefficients must be <= 0, got {b}"
                )));
            }
        }
        for &g in &gammas {
            ensure_finite("cascade feeding coefficient", g)?;
            if g < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "cascade feeding coefficients must be >= 0, got {g}"
                )));
            }
        }
        Ok(CascadeCoefficients { betas, gammas })
    }

    /// The cascade a shell ladder reduces to at zero temperature, for either
    /// channel: stage multiplicities are the independent-spin counts for the
    /// incoherent channel and the collective pair products for the coherent
    /// one, all scaled by `(lambda * eta)^2` times the emission rate across
    /// the (common) shell gap.
    pub fn zero_temperature(
        method: Method,
        n_qubits: usize,
        lambda: f64,
        eta: f64,
        emission_rate: f64,
    ) -> Result<Self> {
        crate::error::ensure_positive("system-bath coupling", lambda)?;
        crate::error::ensure_positive("coupling normalisation", eta)?;
        crate::error::ensure_positive("emission rate", emission_rate)?;
        let r = (lambda * eta) * (lambda * eta) * emission_rate;
        let nf = n_qubits as f64;
        let (betas, gammas) = match method {
            Method::Rate => (
                (0..=n_qubits).map(|a| -(a as f64) * r).collect(),
                (0..n_qubits).map(|a| (a as f64 + 1.0) * r).collect(),
            ),
            Method::Quantum => (
                (0..=n_qubits).map(|a| -(a as f64) * (nf - a as f64 + 1.0) * r).collect(),
                (0..n_qubits).map(|a| (a as f64 + 1.0) * (a as f64 + 1.0) * r).collect(),
            ),
        };
        CascadeCoefficients::new(betas, gammas)
    }

    /// Number of stages, `n + 1`.
    pub fn stages(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    /// Smallest spacing between decay coefficients, relative to the largest
    /// one; zero for an exactly degenerate chain.
    fn relative_spacing(&self) -> f64 {
        let scale = self.betas.iter().fold(0.0f64, |m, &b| m.max(b.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut sorted = self.betas.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min) / scale
    }
}

enum CascadeBackend {
    /// Pairwise-distinct decay coefficients: the explicit product–sum.
    ProductForm {
        /// `ln prod_{c=k}^{n-1} gamma_c` per stage (zero for `k = n`);
        /// minus infinity marks a severed feed.
        ln_feeds: Vec<f64>,
        /// `nodes[k][a - k]` holds `prod_{b in k..=n, b != a} (beta_a - beta_b)^{-1}`.
        nodes: Vec<Vec<SignedLog>>,
    },
    /// Degenerate or nearly degenerate coefficients: exact stepping.
    Stepping(BidiagonalSystem),
}

/// Evaluator of the cascade started from the top stage, `y^0 = (0, ..., 0, 1)`.
pub struct CascadeSolution {
    coefficients: CascadeCoefficients,
    backend: CascadeBackend,
}

impl CascadeSolution {
    pub fn new(coefficients: &CascadeCoefficients) -> Result<Self> {
        let backend = if coefficients.relative_spacing() > DISTINCT_SPACING_RELATIVE {
            let n = coefficients.stages() - 1;
            let betas = &coefficients.betas;
            let mut ln_feeds = vec![0.0; n + 1];
            for k in (0..n).rev() {
                ln_feeds[k] = ln_feeds[k + 1] + coefficients.gammas[k].ln();
            }
            // Build the node products from the top stage downwards: dropping
            // k into the active range multiplies every existing node by
            // 1/(beta_a - beta_k) and opens one fresh node at a = k.
            let mut nodes: Vec<Vec<SignedLog>> = vec![Vec::new(); n + 1];
            nodes[n].push(SignedLog { sign: 1.0, ln_abs: 0.0 });
            for k in (0..n).rev() {
                let mut row = Vec::with_capacity(n + 1 - k);
                let fresh = (k + 1..=n).fold(SignedLog { sign: 1.0, ln_abs: 0.0 }, |acc, b| {
                    let d = betas[k] - betas[b];
                    SignedLog { sign: acc.sign * d.signum(), ln_abs: acc.ln_abs - d.abs().ln() }
                });
                row.push(fresh);
                for (offset, prev) in nodes[k + 1].iter().enumerate() {
                    let a = k + 1 + offset;
                    let d = betas[a] - betas[k];
                    row.push(SignedLog {
                        sign: prev.sign * d.signum(),
                        ln_abs: prev.ln_abs - d.abs().ln(),
                    });
                }
                nodes[k] = row;
            }
            CascadeBackend::ProductForm { ln_feeds, nodes }
        } else {
            CascadeBackend::Stepping(BidiagonalSystem::new(
                coefficients.betas.clone(),
                coefficients.gammas.clone(),
            )?)
        };
        Ok(CascadeSolution { coefficients: coefficients.clone(), backend })
    }

    pub fn stages(&self) -> usize {
        self.coefficients.stages()
    }

    /// True when the explicit product–sum form is in use (pairwise-distinct
    /// decay coefficients), false when the solution is stepped exactly.
    pub fn uses_product_form(&self) -> bool {
        matches!(self.backend, CascadeBackend::ProductForm { .. })
    }

    /// Stage value `y_k(t)`.
    pub fn value(&self, k: usize, t: f64) -> Result<f64> {
        let row = self.row(t)?;
        row.get(k).copied().ok_or(Error::IndexOutOfRange { index: k, size: row.len() })
    }

    /// All stage values at one time.
    pub fn row(&self, t: f64) -> Result<Vec<f64>> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "cascade time must be finite and non-negative, got {t}"
            )));
        }
        match &self.backend {
            CascadeBackend::ProductForm { ln_feeds, nodes } => {
                let betas = &self.coefficients.betas;
                let mut row = Vec::with_capacity(self.stages());
                for (k, stage_nodes) in nodes.iter().enumerate() {
                    let sum = signed_log_sum(stage_nodes.iter().enumerate().map(|(off, node)| {
                        SignedLog {
                            sign: node.sign,
                            ln_abs: node.ln_abs + ln_feeds[k] + betas[k + off] * t,
                        }
                    }));
                    row.push(ensure_finite("cascade stage value", sum.total.value())?);
                }
                Ok(row)
            }
            CascadeBackend::Stepping(system) => {
                let mut path = system.propagate_path(&self.top_stage(), &[t])?;
                Ok(path.pop().expect("one sample time yields one state"))
            }
        }
    }

    /// Stage trajectories at strictly increasing, non-negative times.
    pub fn path(&self, times: &[f64]) -> Result<Vec<Vec<f64>>> {
        if times.iter().any(|t| !t.is_finite() || *t < 0.0)
            || times.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::UnsortedTimes);
        }
        match &self.backend {
            CascadeBackend::ProductForm { .. } => times.iter().map(|&t| self.row(t)).collect(),
            CascadeBackend::Stepping(system) => system.propagate_path(&self.top_stage(), times),
        }
    }

    fn top_stage(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.stages()];
        y[self.stages() - 1] = 1.0;
        y
    }
}

/// One-off evaluation of stage `k` of the cascade at time `t`; build a
/// [`CascadeSolution`] instead when sampling many times.
pub fn cascade_solution(coefficients: &CascadeCoefficients, k: usize, t: f64) -> Result<f64> {
    CascadeSolution::new(coefficients)?.value(k, t)
}
