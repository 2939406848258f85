//! Shell ladders: collective relaxation closed on Hamming-weight shells.
//!
//! A coupling that only moves single excitations (the collective bit-flip
//! channel) keeps the reduced dynamics inside one variable per Hamming-weight
//! shell. `z_alpha` aggregates shell `alpha`: for the incoherent channel it
//! is the shell's total population, for the coherent channel it is the
//! shell's coherence sum, normalised so that both channels share one ladder
//! layout and `z_0` is the ground population in either case.
//!
//! Everything is propagated in *occupancy* variables
//! `p_alpha = z_alpha / C(n, alpha)`: they stay of order one where the shell
//! variables span hundreds of orders of magnitude, and for the coherent
//! channel the occupancy chain is a genuine birth-death process (gains
//! `(n - alpha)(alpha + 1)` both ways), which makes its stationary state a
//! Boltzmann distribution over shells and its conserved quantity the plain
//! occupancy total.
//!
//! Three propagation backends, picked automatically:
//!
//! * **Zero temperature** — no absorption, the chain is upper-bidiagonal and
//!   is advanced by exact scaled-Taylor steps.
//! * **Modal** — a diagonal similarity `D = diag(exp(ell_alpha))` makes the
//!   occupancy chain symmetric tridiagonal; when the similarity's condition
//!   estimate `exp(max ell - min ell)` stays below `1e8`, the propagator is
//!   an orthogonal eigendecomposition evaluated by signed log-sum-exp, which
//!   is exact at arbitrary times and comes with per-sample error bounds.
//! * **Marching** — beyond that threshold the eigenvectors would need
//!   components far below what floating point resolves (the stationary
//!   mode's top-shell amplitude is `exp(-beta E_n / 2)`), so the chain is
//!   advanced by the same scaled-Taylor stepping on the full tridiagonal
//!   generator. An explicit adaptive integrator is *not* safe here: once
//!   the transient decays, its controller grows the step past the stability
//!   boundary and the parasitic mode it excites is invisible to the
//!   embedded error estimate.

use ndarray::Array2;

use crate::bath::BathSpectrum;
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::model::{gibbs_ground_probability, ShellLadder};
use crate::numeric::bidiagonal::BidiagonalSystem;
use crate::numeric::logsum::{log_sum_exp, signed_log_sum, SignedLog};
use crate::numeric::tridiag::{symmetric_tridiagonal_eigen, TridiagonalSystem};

use super::Method;

/// Condition estimate above which the modal (eigendecomposition) propagator
/// is abandoned for adaptive stepping, stored as a logarithm: `ln(1e8)`.
const LN_CONDITION_LIMIT: f64 = 18.420_680_743_952_367;

/// Eigenvalues within this relative distance of zero are the conserved mode
/// and are snapped to exactly zero.
const KERNEL_PIN_RELATIVE: f64 = 1e-11;

/// Positive eigenvalues beyond this relative size indicate a broken
/// decomposition rather than roundoff on the zero mode.
const POSITIVE_MODE_LIMIT: f64 = 1e-8;

/// Maximum number of cached propagation checkpoints a marching evaluator
/// keeps around for restarting near earlier query times.
const MAX_CHECKPOINTS: usize = 1024;

/// The occupancy-variable generator: `dp/dt = M p` with sub-diagonal `sub`
/// (flow from shell `alpha` up to `alpha + 1`), super-diagonal `sup` (flow
/// from `alpha + 1` down to `alpha`) and diagonal `diag` (total outflow).
#[derive(Debug, Clone)]
struct ChainOde {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
}

impl ChainOde {
    fn apply(&self, p: &[f64], out: &mut [f64]) {
        let shells = self.diag.len();
        for alpha in 0..shells {
            let mut v = self.diag[alpha] * p[alpha];
            if alpha > 0 {
                v += self.sub[alpha - 1] * p[alpha - 1];
            }
            if alpha + 1 < shells {
                v += self.sup[alpha] * p[alpha + 1];
            }
            out[alpha] = v;
        }
    }
}

/// A relaxation ladder for one channel (incoherent or coherent), one bath
/// and one coupling strength, ready to be propagated from any shell state.
#[derive(Debug, Clone)]
pub struct LadderSystem {
    method: Method,
    ladder: ShellLadder,
    strength: f64,
    beta: f64,
    zero_temperature: bool,
    chain: ChainOde,
    /// Shell-variable generator entries `M_z[alpha+1][alpha]` (upward feed).
    feed_up: Vec<f64>,
    /// Shell-variable generator entries `M_z[alpha][alpha+1]` (downward feed).
    feed_down: Vec<f64>,
    /// `ln C(n, alpha)` for every shell.
    ln_degeneracy: Vec<f64>,
}

/// Build the shell ladder for `method` from a shell layout, a bath and the
/// coupling strength `lambda` with operator normalisation `eta`.
///
/// The per-bond rates are the bath's emission and absorption rates across
/// each shell gap, scaled by `(lambda * eta)^2` and the shell multiplicities:
/// independent spin counting for the incoherent channel, the product of
/// excited and unexcited multiplicities for the coherent one.
///
/// Finite-temperature baths whose absorption rate underflows to zero across
/// any gap are rejected — that regime must be modelled with an explicitly
/// zero-temperature bath so the propagator can pick the exact branch.
pub fn build_ladder(
    method: Method,
    ladder: &ShellLadder,
    bath: &BathSpectrum,
    lambda: f64,
    eta: f64,
) -> Result<LadderSystem> {
    ensure_positive("system-bath coupling", lambda)?;
    ensure_positive("coupling normalisation", eta)?;
    let strength = (lambda * eta) * (lambda * eta);
    let n = ladder.n_qubits();
    let shells = ladder.shells();
    let zero_temperature = bath.is_zero_temperature();

    let mut emit = Vec::with_capacity(n);
    let mut absorb = Vec::with_capacity(n);
    for alpha in 0..n {
        let gap = ladder.gap(alpha)?;
        let down = bath.gamma(gap)?;
        let up = bath.gamma(-gap)?;
        if down <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "emission rate vanishes across the gap above shell {alpha}; \
                 the spectral density must be positive at every gap"
            )));
        }
        if !zero_temperature && up <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "absorption across the gap above shell {alpha} underflows to zero \
                 at this temperature; use a zero-temperature bath instead"
            )));
        }
        emit.push(down);
        absorb.push(up);
    }

    let nf = n as f64;
    let mut sub = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let mut feed_up = vec![0.0; n];
    let mut feed_down = vec![0.0; n];
    for alpha in 0..n {
        let af = alpha as f64;
        match method {
            Method::Rate => {
                // Independent spins: n - alpha of them can absorb, alpha + 1
                // can emit. The occupancy form swaps the counting factors
                // through the degeneracy ratio C(n, alpha+1) / C(n, alpha).
                feed_up[alpha] = strength * ((nf - af) * absorb[alpha]);
                feed_down[alpha] = strength * ((af + 1.0) * emit[alpha]);
                sub[alpha] = strength * ((af + 1.0) * absorb[alpha]);
                sup[alpha] = strength * ((nf - af) * emit[alpha]);
            }
            Method::Quantum => {
                // Collective flips: the squared shell-to-shell amplitude is
                // (excited count) x (unexcited count), identical both ways
                // in occupancy form.
                let pair = (nf - af) * (af + 1.0);
                feed_up[alpha] = strength * ((nf - af) * (nf - af) * absorb[alpha]);
                feed_down[alpha] = strength * ((af + 1.0) * (af + 1.0) * emit[alpha]);
                sub[alpha] = strength * (pair * absorb[alpha]);
                sup[alpha] = strength * (pair * emit[alpha]);
            }
        }
    }

    // The diagonal is minus the total outflow, assembled in the
    // representation whose columns the channel conserves: shell variables
    // for the incoherent channel (probability), occupancies for the coherent
    // one. This keeps the respective conservation law exact to the last bit.
    let mut diag = vec![0.0; shells];
    for alpha in 0..shells {
        let loss_up = if alpha < n {
            match method {
                Method::Rate => feed_up[alpha],
                Method::Quantum => sub[alpha],
            }
        } else {
            0.0
        };
        let loss_down = if alpha > 0 {
            match method {
                Method::Rate => feed_down[alpha - 1],
                Method::Quantum => sup[alpha - 1],
            }
        } else {
            0.0
        };
        diag[alpha] = -(loss_up + loss_down);
    }

    let ln_degeneracy =
        (0..shells).map(|alpha| ladder.ln_degeneracy(alpha)).collect::<Result<Vec<_>>>()?;

    Ok(LadderSystem {
        method,
        ladder: ladder.clone(),
        strength,
        beta: bath.beta(),
        zero_temperature,
        chain: ChainOde { sub, diag, sup },
        feed_up,
        feed_down,
        ln_degeneracy,
    })
}

impl LadderSystem {
    pub fn method(&self) -> Method {
        self.method
    }

    pub fn ladder(&self) -> &ShellLadder {
        &self.ladder
    }

    /// `(lambda * eta)^2`, the overall rate scale.
    pub fn strength(&self) -> f64 {
        self.strength
    }

    /// Number of shells, `n + 1`.
    pub fn shells(&self) -> usize {
        self.chain.diag.len()
    }

    /// Shell-variable generator entry feeding shell `alpha + 1` from
    /// shell `alpha` (absorption), for `alpha` in `0..n`.
    pub fn shell_feed_up(&self, alpha: usize) -> Result<f64> {
        self.bond_entry(&self.feed_up, alpha)
    }

    /// Shell-variable generator entry feeding shell `alpha` from
    /// shell `alpha + 1` (emission), for `alpha` in `0..n`.
    pub fn shell_feed_down(&self, alpha: usize) -> Result<f64> {
        self.bond_entry(&self.feed_down, alpha)
    }

    /// Diagonal generator entry of shell `alpha` (identical in the shell and
    /// occupancy representations).
    pub fn shell_loss(&self, alpha: usize) -> Result<f64> {
        if alpha >= self.shells() {
            return Err(Error::IndexOutOfRange { index: alpha, size: self.shells() });
        }
        Ok(self.chain.diag[alpha])
    }

    fn bond_entry(&self, entries: &[f64], alpha: usize) -> Result<f64> {
        entries
            .get(alpha)
            .copied()
            .ok_or(Error::IndexOutOfRange { index: alpha, size: entries.len() })
    }

    /// Everything in the top shell: the fully inverted register.
    pub fn initial_top_shell(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.shells()];
        z[self.shells() - 1] = 1.0;
        z
    }

    /// The fully mixed register: every basis state at weight `2^-n`, so
    /// shell `alpha` holds `C(n, alpha) / 2^n`.
    pub fn initial_mixed(&self) -> Vec<f64> {
        let n = self.ladder.n_qubits() as f64;
        self.ln_degeneracy
            .iter()
            .map(|&ln_c| (ln_c - n * std::f64::consts::LN_2).exp())
            .collect()
    }

    /// Thermal shell populations at the system's own temperature,
    /// normalised to total probability one.
    pub fn initial_gibbs(&self) -> Vec<f64> {
        let shells = self.shells();
        if self.zero_temperature {
            let mut z = vec![0.0; shells];
            z[0] = 1.0;
            return z;
        }
        let energies = self.ladder.energies();
        let ground = energies[0];
        let ln_weights: Vec<f64> = (0..shells)
            .map(|alpha| self.ln_degeneracy[alpha] - self.beta * (energies[alpha] - ground))
            .collect();
        let total = log_sum_exp(&ln_weights);
        ln_weights.iter().map(|&w| (w - total).exp()).collect()
    }

    /// Convert shell variables to occupancies `p_alpha = z_alpha / C(n, alpha)`.
    pub fn occupancies_from_shells(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_state(z)?;
        Ok(self.occupancies(z))
    }

    /// Convert occupancies back to shell variables `z_alpha = C(n, alpha) p_alpha`.
    pub fn shells_from_occupancies(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.check_state(p)?;
        Ok(self.shells_unchecked(p))
    }

    fn occupancies(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.ln_degeneracy).map(|(&v, &ln_c)| rescale(v, -ln_c)).collect()
    }

    fn shells_unchecked(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(&self.ln_degeneracy).map(|(&v, &ln_c)| rescale(v, ln_c)).collect()
    }

    /// The quantity the channel conserves along every trajectory: total
    /// probability `sum_alpha z_alpha` for the incoherent channel, total
    /// occupancy `sum_alpha z_alpha / C(n, alpha)` for the coherent one.
    pub fn conserved_charge(&self, z: &[f64]) -> Result<f64> {
        self.check_state(z)?;
        Ok(match self.method {
            Method::Rate => z.iter().sum(),
            Method::Quantum => self.occupancies(z).iter().sum(),
        })
    }

    /// Ground-shell value the trajectory from `z0` converges to.
    ///
    /// Both channels relax towards shell weights proportional to
    /// `C(n, alpha) exp(-beta E_alpha)`; the overall scale is fixed by the
    /// conserved charge. At zero temperature everything reaches the ground
    /// shell, so the limit is the charge itself.
    pub fn stationary_ground(&self, z0: &[f64]) -> Result<f64> {
        let charge = self.conserved_charge(z0)?;
        if self.zero_temperature {
            return Ok(charge);
        }
        let levels: Vec<(f64, f64)> = match self.method {
            // Boltzmann weights over microstates: degeneracies count.
            Method::Rate => self.ladder.gibbs_levels(),
            // The occupancy chain satisfies detailed balance per *shell*, so
            // its stationary weights are degeneracy-free.
            Method::Quantum => self.ladder.energies().iter().map(|&e| (e, 0.0)).collect(),
        };
        Ok(charge * gibbs_ground_probability(&levels, self.beta)?)
    }

    /// Smallest nonzero decay rate of the ladder, the timescale on which the
    /// last transient disappears.
    pub fn slowest_rate(&self) -> Result<f64> {
        let slowest = self
            .spectrum()?
            .iter()
            .map(|v| v.abs())
            .filter(|a| *a > 0.0)
            .fold(f64::INFINITY, f64::min);
        if !slowest.is_finite() {
            return Err(Error::ConvergenceFailure("ladder has no decaying mode".into()));
        }
        Ok(slowest)
    }

    /// Generator eigenvalues, ascending (most negative first, the conserved
    /// zero mode last). Exact for any size: at zero temperature the chain is
    /// triangular, otherwise the values come from the symmetrized form,
    /// whose eigenvalue problem is perfectly conditioned even when the
    /// similarity itself is not.
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        if self.zero_temperature {
            let mut values = self.chain.diag.clone();
            values.sort_by(f64::total_cmp);
            return Ok(values);
        }
        Ok(self.eigen_parts()?.0)
    }

    /// Log of the condition estimate of the symmetrizing similarity; the
    /// modal propagator is trustworthy only while this is moderate.
    fn similarity_log_range(&self) -> f64 {
        let mut ell = 0.0;
        let mut lo = 0.0f64;
        let mut hi = 0.0f64;
        for alpha in 0..self.shells() - 1 {
            ell += 0.5 * (self.chain.sub[alpha].ln() - self.chain.sup[alpha].ln());
            lo = lo.min(ell);
            hi = hi.max(ell);
        }
        hi - lo
    }

    fn modal_path_permitted(&self) -> bool {
        self.similarity_log_range() < LN_CONDITION_LIMIT
    }

    /// Similarity scales, symmetrized off-diagonal, eigenvalues (ascending,
    /// kernel pinned to zero) and eigenvectors of the symmetrized chain.
    fn eigen_parts(&self) -> Result<(Vec<f64>, Array2<f64>, Vec<f64>)> {
        let shells = self.shells();
        let mut ell = vec![0.0; shells];
        let mut off = vec![0.0; shells - 1];
        for alpha in 0..shells - 1 {
            let ln_sub = self.chain.sub[alpha].ln();
            let ln_sup = self.chain.sup[alpha].ln();
            ell[alpha + 1] = ell[alpha] + 0.5 * (ln_sub - ln_sup);
            // Through logs: the direct product can hit subnormals long
            // before either factor does.
            off[alpha] = (0.5 * (ln_sub + ln_sup)).exp();
        }
        let eigen = symmetric_tridiagonal_eigen(&self.chain.diag, &off)?;
        let mut values = eigen.values;
        let scale = values.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let mut kernel = 0;
        for (j, &v) in values.iter().enumerate() {
            if v.abs() < values[kernel].abs() {
                kernel = j;
            }
        }
        if values[kernel].abs() <= KERNEL_PIN_RELATIVE * scale {
            values[kernel] = 0.0;
        }
        for v in values.iter_mut() {
            if *v > 0.0 {
                if *v > POSITIVE_MODE_LIMIT * scale {
                    return Err(Error::ConvergenceFailure(format!(
                        "ladder decomposition produced a growing mode ({v:.3e})"
                    )));
                }
                // Roundoff satellites of the zero mode; the generator cannot
                // grow anything.
                *v = 0.0;
            }
        }
        Ok((values, eigen.vectors, ell))
    }

    /// The occupancy chain as a stepped-Taylor propagator.
    fn tridiagonal_system(&self) -> Result<TridiagonalSystem> {
        TridiagonalSystem::new(
            self.chain.sub.clone(),
            self.chain.diag.clone(),
            self.chain.sup.clone(),
        )
    }

    /// Shell trajectories from `z0` at the given strictly increasing,
    /// non-negative times.
    pub fn solve(&self, z0: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_state(z0)?;
        check_times(times)?;
        let p0 = self.occupancies(z0);
        if self.zero_temperature {
            let system =
                BidiagonalSystem::new(self.chain.diag.clone(), self.chain.sup.clone())?;
            let path = system.propagate_path(&p0, times)?;
            return Ok(path.iter().map(|p| self.shells_unchecked(p)).collect());
        }
        if self.modal_path_permitted() {
            return self.solve_modal(&p0, times);
        }
        let system = self.tridiagonal_system()?;
        let path = system.propagate_path(&p0, times)?;
        Ok(path.iter().map(|p| self.shells_unchecked(p)).collect())
    }

    fn solve_modal(&self, p0: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>> {
        let (values, vectors, ell) = self.eigen_parts()?;
        let shells = self.shells();
        let loads = modal_loads(&vectors, &values, &ell, p0);
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            let mut row = vec![0.0; shells];
            for (alpha, slot) in row.iter_mut().enumerate() {
                let base = self.ln_degeneracy[alpha] + ell[alpha];
                let sum = signed_log_sum((0..shells).map(|j| {
                    let v = vectors[[alpha, j]];
                    let load = &loads[j];
                    if v == 0.0 || load.sign == 0.0 {
                        SignedLog::ZERO
                    } else {
                        SignedLog {
                            sign: v.signum() * load.sign,
                            ln_abs: base + v.abs().ln() + load.ln_abs + values[j] * t,
                        }
                    }
                }));
                *slot = sum.total.value();
                ensure_finite("ladder shell variable", *slot)?;
            }
            out.push(row);
        }
        Ok(out)
    }

    /// A reusable evaluator of the ground-shell trajectory from `z0`,
    /// suitable for crossing searches: each query returns the value and an
    /// absolute error bound, and queries may come in any order.
    pub fn ground_evaluator(&self, z0: &[f64]) -> Result<GroundEvaluator> {
        self.check_state(z0)?;
        let p0 = self.occupancies(z0);
        let stationary = self.stationary_ground(z0)?;
        let slowest_rate = self.slowest_rate()?;
        let p_scale = p0.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let backend = if self.zero_temperature {
            Backend::Marching {
                propagator: ChainPropagator::Bidiagonal(BidiagonalSystem::new(
                    self.chain.diag.clone(),
                    self.chain.sup.clone(),
                )?),
                checkpoints: vec![(0.0, p0)],
                error_floor: 1e-12 * p_scale,
            }
        } else if self.modal_path_permitted() {
            Backend::Modal { modes: self.modes_for(&p0)? }
        } else {
            Backend::Marching {
                propagator: ChainPropagator::Tridiagonal(self.tridiagonal_system()?),
                checkpoints: vec![(0.0, p0)],
                error_floor: 1e-12 * p_scale,
            }
        };
        Ok(GroundEvaluator { backend, stationary, slowest_rate })
    }

    fn modes_for(&self, p0: &[f64]) -> Result<Vec<Mode>> {
        let (values, vectors, ell) = self.eigen_parts()?;
        let shells = self.shells();
        // Eigenvector entries carry ~1e-16 *absolute* error; through the
        // inverse similarity that floor is amplified by the largest
        // rescaled initial component.
        let ln_load_floor = (0..shells)
            .filter(|&b| p0[b] != 0.0)
            .map(|b| p0[b].abs().ln() - ell[b])
            .fold(f64::NEG_INFINITY, f64::max)
            - 33.0;
        let loads = modal_loads(&vectors, &values, &ell, p0);
        let mut modes = Vec::with_capacity(shells);
        for j in 0..shells {
            let v0 = vectors[[0, j]];
            let load = &loads[j];
            let (sign, ln_weight) = if v0 == 0.0 || load.sign == 0.0 {
                (0.0, f64::NEG_INFINITY)
            } else {
                (v0.signum() * load.sign, v0.abs().ln() + load.ln_abs)
            };
            let ln_v0 = v0.abs().ln();
            let ln_error = (ln_v0 + ln_load_floor).max(load.ln_abs - 33.0);
            modes.push(Mode { rate: values[j], sign, ln_weight, ln_error });
        }
        Ok(modes)
    }

    /// Instantaneous energy outflow `-d<E>/dt` of the shell state `z`.
    pub fn energy_flux(&self, z: &[f64]) -> Result<f64> {
        self.check_state(z)?;
        let energies = self.ladder.energies();
        let shells = self.shells();
        let n = shells - 1;
        Ok(match self.method {
            Method::Rate => {
                // Shell populations flow through the shell-variable
                // generator; total probability is conserved, so the energy
                // origin drops out.
                let mut flux = 0.0;
                for alpha in 0..shells {
                    let mut zdot = self.chain.diag[alpha] * z[alpha];
                    if alpha > 0 {
                        zdot += self.feed_up[alpha - 1] * z[alpha - 1];
                    }
                    if alpha < n {
                        zdot += self.feed_down[alpha] * z[alpha + 1];
                    }
                    flux -= energies[alpha] * zdot;
                }
                flux
            }
            Method::Quantum => {
                // Occupancies are the level populations of the coherent
                // cascade; their total is conserved.
                let p = self.occupancies(z);
                let mut pdot = vec![0.0; shells];
                self.chain.apply(&p, &mut pdot);
                -energies.iter().zip(&pdot).map(|(&e, &d)| e * d).sum::<f64>()
            }
        })
    }

    /// Energy expectation of the shell state `z`.
    pub fn energy_expectation(&self, z: &[f64]) -> Result<f64> {
        self.check_state(z)?;
        let energies = self.ladder.energies();
        Ok(match self.method {
            Method::Rate => energies.iter().zip(z).map(|(&e, &v)| e * v).sum(),
            Method::Quantum => {
                energies.iter().zip(self.occupancies(z)).map(|(&e, v)| e * v).sum()
            }
        })
    }

    fn check_state(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.shells() {
            return Err(Error::DimensionMismatch { expected: self.shells(), got: state.len() });
        }
        for &v in state {
            ensure_finite("shell state component", v)?;
        }
        Ok(())
    }
}

/// `v * exp(ln_scale)` evaluated through logarithms so that neither the
/// scale nor the product overflows prematurely; exact zero stays zero.
fn rescale(v: f64, ln_scale: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.signum() * (v.abs().ln() + ln_scale).exp()
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite() || *t < 0.0)
        || times.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::UnsortedTimes);
    }
    Ok(())
}

/// Modal expansion coefficients of the rescaled initial state:
/// `load_j = sum_b V[b][j] exp(-ell_b) p0_b`.
fn modal_loads(
    vectors: &Array2<f64>,
    values: &[f64],
    ell: &[f64],
    p0: &[f64],
) -> Vec<SignedLog> {
    let shells = values.len();
    (0..shells)
        .map(|j| {
            signed_log_sum((0..shells).map(|b| {
                let v = vectors[[b, j]];
                if v == 0.0 || p0[b] == 0.0 {
                    SignedLog::ZERO
                } else {
                    SignedLog {
                        sign: v.signum() * p0[b].signum(),
                        ln_abs: v.abs().ln() + p0[b].abs().ln() - ell[b],
                    }
                }
            }))
            .total
        })
        .collect()
}

struct Mode {
    rate: f64,
    sign: f64,
    ln_weight: f64,
    ln_error: f64,
}

/// Stepped-Taylor propagators for the marching backend: the zero-temperature
/// chain has no absorption and stays upper-bidiagonal, the finite-temperature
/// chain needs both off-diagonals.
enum ChainPropagator {
    Bidiagonal(BidiagonalSystem),
    Tridiagonal(TridiagonalSystem),
}

enum Backend {
    Modal { modes: Vec<Mode> },
    Marching {
        propagator: ChainPropagator,
        /// Previously computed states, sorted by time; queries restart from
        /// the nearest earlier checkpoint instead of from zero.
        checkpoints: Vec<(f64, Vec<f64>)>,
        error_floor: f64,
    },
}

/// Ground-shell trajectory evaluator produced by
/// [`LadderSystem::ground_evaluator`].
pub struct GroundEvaluator {
    backend: Backend,
    stationary: f64,
    slowest_rate: f64,
}

impl GroundEvaluator {
    /// Ground-shell value at time `t` together with an absolute error bound.
    ///
    /// The bound is honest rather than tight: deep in the early-time regime
    /// the value can be exponentially smaller than the transient terms that
    /// cancel to produce it, and the bound says so. Callers searching for a
    /// threshold crossing should classify such samples by
    /// `value + error < threshold`, not trust their digits.
    pub fn evaluate(&mut self, t: f64) -> Result<(f64, f64)> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "evaluation time must be finite and non-negative, got {t}"
            )));
        }
        match &mut self.backend {
            Backend::Modal { modes } => {
                let sum = signed_log_sum(modes.iter().map(|m| {
                    if m.sign == 0.0 {
                        SignedLog::ZERO
                    } else {
                        SignedLog { sign: m.sign, ln_abs: m.ln_weight + m.rate * t }
                    }
                }));
                let ln_errors: Vec<f64> =
                    modes.iter().map(|m| m.ln_error + m.rate * t).collect();
                let value = sum.total.value();
                ensure_finite("ladder ground population", value)?;
                Ok((value, sum.error_bound() + log_sum_exp(&ln_errors).exp()))
            }
            Backend::Marching { propagator, checkpoints, error_floor } => {
                let at = checkpoints.partition_point(|c| c.0 <= t);
                let (t_start, p_start) = &checkpoints[at - 1];
                if *t_start == t {
                    return Ok((p_start[0], *error_floor));
                }
                let span = t - t_start;
                let mut path = match propagator {
                    ChainPropagator::Bidiagonal(system) => {
                        system.propagate_path(p_start, &[span])?
                    }
                    ChainPropagator::Tridiagonal(system) => {
                        system.propagate_path(p_start, &[span])?
                    }
                };
                let p = path.pop().expect("one sample time yields one state");
                let value = p[0];
                if checkpoints.len() < MAX_CHECKPOINTS {
                    checkpoints.insert(at, (t, p));
                }
                Ok((value, 1e-9 * value.abs() + *error_floor))
            }
        }
    }

    /// The value the trajectory converges to.
    pub fn stationary(&self) -> f64 {
        self.stationary
    }

    /// Smallest nonzero decay rate; its inverse is the natural unit for
    /// bracketing searches.
    pub fn slowest_rate(&self) -> f64 {
        self.slowest_rate
    }
}

/// Closed-form spectrum of the incoherent equidistant ladder: mode `alpha`
/// decays at `alpha` times the single-spin rate, the sum of emission and
/// absorption across the common gap, times `(lambda * eta)^2`. Returned in
/// shell order `0..=n` (zero first, most negative last).
pub fn ladder_rate_eigenvalues(
    ladder: &ShellLadder,
    bath: &BathSpectrum,
    lambda: f64,
    eta: f64,
) -> Result<Vec<f64>> {
    ensure_positive("system-bath coupling", lambda)?;
    ensure_positive("coupling normalisation", eta)?;
    let gap = ladder.gap(0)?;
    for alpha in 1..ladder.n_qubits() {
        if (ladder.gap(alpha)? - gap).abs() > 1e-12 * gap.abs() {
            return Err(Error::InvalidParameter(
                "closed-form ladder spectrum requires equidistant shells".into(),
            ));
        }
    }
    let per_spin = (lambda * eta) * (lambda * eta) * (bath.gamma(gap)? + bath.gamma(-gap)?);
    Ok((0..ladder.shells()).map(|alpha| -(alpha as f64) * per_spin).collect())
}
