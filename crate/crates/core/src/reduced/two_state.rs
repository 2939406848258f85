//! Two-variable closures for the nonlocal couplings.
//!
//! For projector, indirect, direct, and Hadamard couplings the master
//! equation closes on the pair
//!
//! ```text
//! z1 = rho_ww                    (solution population)
//! z2 = an aggregate over everything else,
//! ```
//!
//! where `z2` is the remaining population for the rate method, the plain
//! coherent sum `sum_{a,b != w} rho_ab` for the quantum method, and the
//! sign-weighted sum `sum (-1)^{w.a + w.b} rho_ab` for the Hadamard
//! coupling. In every case the generator is a scalar multiple of one of two
//! universal matrices,
//!
//! ```text
//! M_rate    = (lambda^2/N^2) [[-(N-1) g_down,  g_up          ],
//!                             [ (N-1) g_down, -g_up          ]]
//! M_quantum = (lambda^2/N^2) [[-(N-1) g_down,  g_up          ],
//!                             [ (N-1)^2 g_down, -(N-1) g_up  ]]
//! ```
//!
//! with `g_up = gamma(+gap)` (emission into the solution) and
//! `g_down = gamma(-gap)` (absorption out of it). The per-coupling scalar
//! is `eta^2 N^2 / N^2 = eta^2` for the indirect kind, `eta^2 N` for the
//! direct kind, and `N` for the Hadamard kind. Zero-frequency rates and the
//! principal-value level shifts drop out of these closures identically —
//! the diagonal-frequency operators are block diagonal and enter `z1`, `z2`
//! only through exactly cancelling gain and loss terms.
//!
//! Both matrices have determinant zero *in floating point* (the products
//! cross-cancel exactly), so their spectra `{0, trace}` and the long-time
//! limits are exact.

use crate::bath::BathSpectrum;
use crate::error::{Error, Result};
use crate::model::{CouplingKind, MarkedStateModel};
use crate::numeric::two_by_two::TwoByTwo;
use crate::reduced::{InitialState, Method};

/// A closed two-variable system `dz/dt = M z`.
#[derive(Debug, Clone)]
pub struct TwoStateSystem {
    matrix: TwoByTwo,
    kind: CouplingKind,
    method: Method,
    model: MarkedStateModel,
}

/// Build the closed two-variable generator for a nonlocal coupling.
///
/// The collective bit flip does not close on two variables and is rejected;
/// it belongs to [`crate::reduced::ladder`].
pub fn build_two_state(
    kind: CouplingKind,
    method: Method,
    model: &MarkedStateModel,
    bath: &BathSpectrum,
    lambda: f64,
) -> Result<TwoStateSystem> {
    if kind.is_shell_local() {
        return Err(Error::InvalidParameter(format!(
            "coupling '{}' closes on a shell ladder, not on a two-state system",
            kind.label()
        )));
    }
    crate::error::ensure_positive("system-bath coupling lambda", lambda)?;
    let big_n = model.dimension_f64();
    let g_up = bath.gamma(model.gap)?;
    let g_down = bath.gamma(-model.gap)?;
    let scale = lambda * lambda / (big_n * big_n) * coupling_prefactor(kind, model.n_qubits)?;
    let m = match method {
        Method::Rate => [
            [-(big_n - 1.0) * g_down, g_up],
            [(big_n - 1.0) * g_down, -g_up],
        ],
        Method::Quantum => [
            [-(big_n - 1.0) * g_down, g_up],
            [(big_n - 1.0) * (big_n - 1.0) * g_down, -(big_n - 1.0) * g_up],
        ],
    };
    let matrix = TwoByTwo::new([
        [scale * m[0][0], scale * m[0][1]],
        [scale * m[1][0], scale * m[1][1]],
    ]);
    Ok(TwoStateSystem { matrix, kind, method, model: *model })
}

/// The scalar multiplying the universal projector-coupling matrices:
/// `1` (projector), `eta^2` (indirect), `eta^2 N` (direct), `N` (Hadamard).
pub fn coupling_prefactor(kind: CouplingKind, n_qubits: u32) -> Result<f64> {
    let eta = kind.eta(n_qubits)?;
    let big_n = f64::exp2(n_qubits as f64);
    Ok(match kind {
        CouplingKind::Projector => 1.0,
        CouplingKind::Indirect => eta * eta,
        CouplingKind::Direct => eta * eta * big_n,
        CouplingKind::Hadamard => big_n,
        CouplingKind::CollectiveBitFlip => {
            return Err(Error::InvalidParameter(
                "collective_bitflip has no two-state prefactor".into(),
            ))
        }
    })
}

impl TwoStateSystem {
    pub fn matrix(&self) -> &TwoByTwo {
        &self.matrix
    }

    pub fn kind(&self) -> CouplingKind {
        self.kind
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Initial `(z1, z2)` for the supported preparations.
    ///
    /// The solution label matters only through the Hadamard sign weights:
    /// for the superposition preparation the signed aggregate collapses from
    /// `(N-1)^2/N` to `1/N` as soon as the solution is not the all-zeros
    /// label.
    pub fn initial(&self, init: InitialState) -> [f64; 2] {
        let big_n = self.model.dimension_f64();
        let z1 = 1.0 / big_n;
        let z2 = match (init, self.method) {
            // Mixed state: no coherences, so every aggregate is the plain
            // excited population, signed weights squaring to one.
            (InitialState::Mixed, _) => (big_n - 1.0) / big_n,
            (InitialState::Superposition, Method::Rate) => (big_n - 1.0) / big_n,
            (InitialState::Superposition, Method::Quantum) => match self.kind {
                CouplingKind::Hadamard => {
                    hadamard_initial_z2(self.model.n_qubits, self.model.solution)
                }
                _ => (big_n - 1.0) * (big_n - 1.0) / big_n,
            },
        };
        [z1, z2]
    }

    /// Trajectory of `(z1, z2)` at the given times.
    pub fn solve(&self, z0: [f64; 2], times: &[f64]) -> Result<Vec<[f64; 2]>> {
        times.iter().map(|&t| self.matrix.propagate(z0, t)).collect()
    }

    /// Solution population `z1(t)`.
    pub fn ground_population(&self, z0: [f64; 2], t: f64) -> Result<f64> {
        Ok(self.matrix.propagate(z0, t)?[0])
    }

    /// Long-time limit of the solution population.
    pub fn stationary_ground(&self, z0: [f64; 2]) -> Result<f64> {
        Ok(self.matrix.limit(z0)?[0])
    }

    /// The decay time `1/|mu|` of the single relaxing mode.
    pub fn decay_time(&self) -> Result<f64> {
        let (_, mu) = self.matrix.eigenvalues()?;
        if mu >= 0.0 {
            return Err(Error::InvalidParameter(
                "two-state system has no decaying mode".into(),
            ));
        }
        Ok(-1.0 / mu)
    }
}

/// Closed-form relaxation time of the projector-coupling rate equation,
///
/// ```text
/// tau = N^2 / (lambda^2 (gamma(+gap) + (N-1) gamma(-gap))),
/// ```
///
/// the inverse of the single nonzero eigenvalue of `M_rate`. For a flat
/// density `g` this is `N^2 (1 - e^{-beta gap}) / (lambda^2 g (1 + (N-1)
/// e^{-beta gap}))`, growing as `N^2` once `beta` is calibrated against the
/// shrinking Gibbs weight of the solution.
pub fn rate_decay_time(model: &MarkedStateModel, bath: &BathSpectrum, lambda: f64) -> Result<f64> {
    let big_n = model.dimension_f64();
    let g_up = bath.gamma(model.gap)?;
    let g_down = bath.gamma(-model.gap)?;
    Ok(big_n * big_n / (lambda * lambda * (g_up + (big_n - 1.0) * g_down)))
}

/// Closed-form relaxation time of the projector-coupling quantum master
/// equation,
///
/// ```text
/// tau = N^2 / (lambda^2 (N-1) (gamma(+gap) + gamma(-gap))),
/// ```
///
/// which for a flat density reduces to
/// `N^2 tanh(beta gap / 2) / (lambda^2 g (N-1))` — only *linear* in `N` for
/// large registers: coherent aggregates feed the solution `N - 1` times
/// faster than populations do.
pub fn quantum_decay_time(
    model: &MarkedStateModel,
    bath: &BathSpectrum,
    lambda: f64,
) -> Result<f64> {
    let big_n = model.dimension_f64();
    let g_up = bath.gamma(model.gap)?;
    let g_down = bath.gamma(-model.gap)?;
    Ok(big_n * big_n / (lambda * lambda * (big_n - 1.0) * (g_up + g_down)))
}

/// Explicit projector-coupling rate-equation solution from the mixed state,
///
/// ```text
/// z1(t) = zbar + (1/N - zbar) e^{-t/tau},    zbar = Gibbs weight of w,
/// ```
///
/// written directly from the scalar ODE rather than the matrix exponential,
/// so it can serve as an independent check on the latter.
pub fn rate_ground_closed_form(
    model: &MarkedStateModel,
    bath: &BathSpectrum,
    lambda: f64,
    t: f64,
) -> Result<f64> {
    let big_n = model.dimension_f64();
    let g_up = bath.gamma(model.gap)?;
    let g_down = bath.gamma(-model.gap)?;
    let stationary = g_up / (g_up + (big_n - 1.0) * g_down);
    let tau = rate_decay_time(model, bath, lambda)?;
    Ok(stationary + (1.0 / big_n - stationary) * (-t / tau).exp())
}

/// Initial signed Hadamard aggregate for the uniform superposition,
///
/// ```text
/// z2(0) = (N d_{w,0} - (-1)^{|w|})^2 / N,
/// ```
///
/// with `|w|` the Hamming weight of the solution: `(N-1)^2/N` when `w` is
/// the all-zeros label and `1/N` otherwise. The character sum
/// `sum_a (-1)^{w.a} = N d_{w,0}` is what makes the all-zeros case special.
pub fn hadamard_initial_z2(n_qubits: u32, solution: u64) -> f64 {
    let big_n = f64::exp2(n_qubits as f64);
    let delta = if solution == 0 { big_n } else { 0.0 };
    let sign = if solution.count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
    let s = delta - sign;
    s * s / big_n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::SpectralDensity;
    use approx::assert_relative_eq;

    fn flat_bath(beta: f64) -> BathSpectrum {
        BathSpectrum::new(SpectralDensity::Flat { amplitude: 2.0 }, beta).unwrap()
    }

    fn model_n4() -> MarkedStateModel {
        MarkedStateModel::new(2, 0, 1.0).unwrap()
    }

    #[test]
    fn decay_times_match_the_worked_example() {
        // N = 4, e^{beta gap} = 57, lambda = 0.01, flat g = 2.
        let model = model_n4();
        let bath = flat_bath(57f64.ln());
        let tau_rate = rate_decay_time(&model, &bath, 0.01).unwrap();
        let tau_quantum = quantum_decay_time(&model, &bath, 0.01).unwrap();
        assert_relative_eq!(tau_rate, 16.0 * 56.0 / (1e-4 * 2.0 * 60.0), max_relative = 1e-12);
        let tanh_half = 56.0 / 58.0;
        assert_relative_eq!(tau_quantum, 16.0 * tanh_half / (1e-4 * 2.0 * 3.0), max_relative = 1e-12);
        assert_relative_eq!(tau_rate, 74666.666667, max_relative = 1e-9);
        assert_relative_eq!(tau_quantum, 25747.126437, max_relative = 1e-9);
    }

    #[test]
    fn generator_trace_reproduces_the_decay_times() {
        let model = model_n4();
        let bath = flat_bath(57f64.ln());
        for (method, closed_form) in [
            (Method::Rate, rate_decay_time(&model, &bath, 0.01).unwrap()),
            (Method::Quantum, quantum_decay_time(&model, &bath, 0.01).unwrap()),
        ] {
            let sys =
                build_two_state(CouplingKind::Projector, method, &model, &bath, 0.01).unwrap();
            assert_relative_eq!(sys.decay_time().unwrap(), closed_form, max_relative = 1e-13);
        }
    }

    #[test]
    fn rate_and_quantum_generators_coincide_for_one_qubit() {
        // N = 2: the (N-1) factors collapse and both methods agree entrywise.
        let model = MarkedStateModel::new(1, 0, 1.0).unwrap();
        let bath = flat_bath(1.3);
        let rate =
            build_two_state(CouplingKind::Projector, Method::Rate, &model, &bath, 0.05).unwrap();
        let quantum =
            build_two_state(CouplingKind::Projector, Method::Quantum, &model, &bath, 0.05)
                .unwrap();
        assert_eq!(rate.matrix(), quantum.matrix());
    }

    #[test]
    fn prefactors_scale_the_projector_matrices() {
        let model = MarkedStateModel::new(4, 3, 1.0).unwrap();
        let bath = flat_bath(0.8);
        for method in Method::ALL {
            let base = build_two_state(CouplingKind::Projector, method, &model, &bath, 0.01)
                .unwrap();
            for kind in [CouplingKind::Indirect, CouplingKind::Direct, CouplingKind::Hadamard] {
                let sys = build_two_state(kind, method, &model, &bath, 0.01).unwrap();
                let factor = coupling_prefactor(kind, 4).unwrap();
                for r in 0..2 {
                    for c in 0..2 {
                        assert_relative_eq!(
                            sys.matrix().m[r][c],
                            factor * base.matrix().m[r][c],
                            max_relative = 1e-14
                        );
                    }
                }
            }
        }
        // The stated scalars themselves, N = 16.
        assert_relative_eq!(
            coupling_prefactor(CouplingKind::Indirect, 4).unwrap(),
            (16.0 / 17.0f64).powi(2),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            coupling_prefactor(CouplingKind::Direct, 4).unwrap(),
            256.0 / 25.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            coupling_prefactor(CouplingKind::Hadamard, 4).unwrap(),
            16.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn rate_stationary_state_is_gibbs() {
        // e^{beta gap} = 57, N = 4: Gibbs weight 57/60 = 0.95.
        let model = model_n4();
        let bath = flat_bath(57f64.ln());
        let sys =
            build_two_state(CouplingKind::Projector, Method::Rate, &model, &bath, 0.01).unwrap();
        let z0 = sys.initial(InitialState::Mixed);
        assert_relative_eq!(sys.stationary_ground(z0).unwrap(), 0.95, max_relative = 1e-12);
    }

    #[test]
    fn quantum_stationary_states_split_by_preparation() {
        let model = model_n4();
        let beta = 1.25f64;
        let bath = flat_bath(beta);
        let sys =
            build_two_state(CouplingKind::Projector, Method::Quantum, &model, &bath, 0.01)
                .unwrap();
        let boltzmann = (-beta).exp();
        // Superposition: an effective two-level Gibbs weight, independent of N.
        let from_superposition =
            sys.stationary_ground(sys.initial(InitialState::Superposition)).unwrap();
        assert_relative_eq!(from_superposition, 1.0 / (1.0 + boltzmann), max_relative = 1e-12);
        // Mixed: the same weight suppressed by N/2 — non-ergodic trapping.
        let from_mixed = sys.stationary_ground(sys.initial(InitialState::Mixed)).unwrap();
        assert_relative_eq!(
            from_mixed,
            2.0 / (4.0 * (1.0 + boltzmann)),
            max_relative = 1e-12
        );
    }

    #[test]
    fn closed_form_matches_matrix_exponential_over_a_decade() {
        let bath = flat_bath(2.0);
        for n_qubits in [2u32, 4, 6] {
            let model = MarkedStateModel::new(n_qubits, 0, 1.0).unwrap();
            let sys =
                build_two_state(CouplingKind::Projector, Method::Rate, &model, &bath, 0.02)
                    .unwrap();
            let z0 = sys.initial(InitialState::Mixed);
            let tau = sys.decay_time().unwrap();
            for k in 0..=10 {
                let t = tau * 0.5 * (k as f64 * (20f64.ln() / 10.0)).exp(); // 0.5 tau .. 10 tau
                let via_matrix = sys.ground_population(z0, t).unwrap();
                let via_formula = rate_ground_closed_form(&model, &bath, 0.02, t).unwrap();
                assert_relative_eq!(via_matrix, via_formula, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn hadamard_initial_aggregate_depends_on_the_solution_label() {
        // w = 0: (N-1)^2/N; any other w: 1/N.
        assert_relative_eq!(hadamard_initial_z2(3, 0), 49.0 / 8.0, max_relative = 1e-15);
        assert_relative_eq!(hadamard_initial_z2(3, 5), 1.0 / 8.0, max_relative = 1e-15);
        assert_relative_eq!(hadamard_initial_z2(3, 1), 1.0 / 8.0, max_relative = 1e-15);
    }

    #[test]
    fn hadamard_initial_matches_brute_force_character_sum() {
        for n in 1..=8u32 {
            let big_n = 1u64 << n;
            for w in [0u64, 1, big_n / 2, big_n - 1] {
                // Brute force: (1/N) [sum_{a != w} (-1)^{w.a}]^2 via the
                // full double sum.
                let mut total = 0.0;
                for a in 0..big_n {
                    if a == w {
                        continue;
                    }
                    for b in 0..big_n {
                        if b == w {
                            continue;
                        }
                        let parity = ((w & a).count_ones() + (w & b).count_ones()) % 2;
                        let sign = if parity == 0 { 1.0 } else { -1.0 };
                        total += sign / big_n as f64;
                    }
                }
                let closed = hadamard_initial_z2(n, w);
                assert!(
                    (closed - total).abs() < 1e-12,
                    "n={n} w={w}: closed {closed} vs brute {total}"
                );
            }
        }
    }

    #[test]
    fn bitflip_is_rejected() {
        let model = model_n4();
        let bath = flat_bath(1.0);
        assert!(build_two_state(
            CouplingKind::CollectiveBitFlip,
            Method::Rate,
            &model,
            &bath,
            0.01
        )
        .is_err());
    }

    #[test]
    fn trajectory_conserves_what_each_method_conserves() {
        let model = model_n4();
        let bath = flat_bath(1.0);
        let z0_sum = |z: [f64; 2]| z[0] + z[1];
        // Rate: z1 + z2 is the total population, conserved exactly.
        let rate =
            build_two_state(CouplingKind::Projector, Method::Rate, &model, &bath, 0.01).unwrap();
        let z0 = rate.initial(InitialState::Mixed);
        for z in rate.solve(z0, &[0.0, 10.0, 1e4, 1e6]).unwrap() {
            assert_relative_eq!(z0_sum(z), 1.0, max_relative = 1e-12);
        }
        // Quantum: (N-1) z1 + z2 is conserved instead.
        let quantum =
            build_two_state(CouplingKind::Projector, Method::Quantum, &model, &bath, 0.01)
                .unwrap();
        let z0 = quantum.initial(InitialState::Superposition);
        let invariant = 3.0 * z0[0] + z0[1];
        for z in quantum.solve(z0, &[0.0, 10.0, 1e4, 1e6]).unwrap() {
            assert_relative_eq!(3.0 * z[0] + z[1], invariant, max_relative = 1e-12);
        }
    }
}
