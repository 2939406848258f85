//! The reduced systems against the full master equations they summarize.
//!
//! Every closure in `reduced` claims that a handful of aggregates of the
//! full density matrix (or population vector) evolve autonomously. These
//! tests evolve the *full* generators on registers small enough to afford
//! it, project the trajectories onto the aggregates, and demand agreement
//! with the reduced solutions at every sample — the strongest end-to-end
//! check the crate has, since the two sides share no dynamical code.

use relax_core::analysis::calibrate_beta;
use relax_core::bath::{BathSpectrum, SpectralDensity};
use relax_core::master::{
    build_quantum_generator, build_rate_generator, project_reduced, DensityMatrix,
    EnergyEigenbasisModel, ReducedVariables,
};
use relax_core::model::{CouplingKind, MarkedStateModel, ShellLadder};
use relax_core::reduced::{build_ladder, build_two_state, InitialState, Method};

type Preparation = fn(usize) -> relax_core::Result<DensityMatrix>;

const NONLOCAL: [CouplingKind; 4] = [
    CouplingKind::Projector,
    CouplingKind::Indirect,
    CouplingKind::Direct,
    CouplingKind::Hadamard,
];

/// A flat bath calibrated so the model's thermal ground weight is 0.95.
///
/// The zero-frequency rate is undefined for a flat density, and the full
/// generators need one wherever the spectrum is degenerate — so pin an
/// arbitrary value. The aggregates must not feel it: transitions at zero
/// frequency only shuffle weight inside the degenerate manifolds the
/// closures sum over.
fn calibrated_bath(levels: &[(f64, f64)]) -> BathSpectrum {
    let beta = calibrate_beta(levels, 0.95).expect("calibration");
    BathSpectrum::new(SpectralDensity::Flat { amplitude: 2.0 }, beta)
        .and_then(|bath| bath.with_gamma_zero(0.8))
        .expect("bath")
}

/// Eleven samples from zero to five decay times.
fn sample_grid(tau: f64) -> Vec<f64> {
    (0..=10).map(|i| 5.0 * tau * i as f64 / 10.0).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn two_state_closures_match_the_full_quantum_evolution() {
    let lambda = 0.1;
    for kind in NONLOCAL {
        for n_qubits in [2u32, 3, 4] {
            let solution = (1u64 << n_qubits) - 2;
            let model = MarkedStateModel::new(n_qubits, solution, 1.0).unwrap();
            let bath = calibrated_bath(&model.gibbs_levels());
            let eigen = EnergyEigenbasisModel::from_marked_state(&model, kind).unwrap();
            let generator = build_quantum_generator(&eigen, &bath, lambda, true).unwrap();

            let system =
                build_two_state(kind, Method::Quantum, &model, &bath, lambda).unwrap();
            let times = sample_grid(system.decay_time().unwrap());
            let variables = match kind {
                CouplingKind::Hadamard => ReducedVariables::HadamardPair,
                _ => ReducedVariables::CoherentPair,
            };

            let preparations: [(InitialState, Preparation); 2] = [
                (InitialState::Superposition, DensityMatrix::uniform_superposition),
                (InitialState::Mixed, DensityMatrix::uniform_diagonal),
            ];
            for (preparation, full_state) in preparations {
                let reduced =
                    system.solve(system.initial(preparation), &times).unwrap();
                let full = generator
                    .evolve(&full_state(model.dimension()).unwrap(), &times)
                    .unwrap();
                for (step, (z, rho)) in reduced.iter().zip(&full).enumerate() {
                    let projected =
                        project_reduced(rho, variables, solution, n_qubits).unwrap();
                    let difference = max_abs_diff(z, &projected);
                    assert!(
                        difference <= 1e-6,
                        "{} n={n_qubits} {:?} step {step}: closure off by {difference:.2e}",
                        kind.label(),
                        preparation,
                    );
                }
            }
        }
    }
}

#[test]
fn ground_pair_closures_match_the_full_rate_evolution() {
    let lambda = 0.1;
    for kind in NONLOCAL {
        for n_qubits in [2u32, 3, 4] {
            let solution = (1u64 << n_qubits) - 2;
            let model = MarkedStateModel::new(n_qubits, solution, 1.0).unwrap();
            let bath = calibrated_bath(&model.gibbs_levels());
            let eigen = EnergyEigenbasisModel::from_marked_state(&model, kind).unwrap();
            let generator = build_rate_generator(&eigen, &bath, lambda).unwrap();

            let system = build_two_state(kind, Method::Rate, &model, &bath, lambda).unwrap();
            let times = sample_grid(system.decay_time().unwrap());
            let reduced = system.solve(system.initial(InitialState::Mixed), &times).unwrap();

            let dimension = model.dimension();
            let uniform = vec![1.0 / dimension as f64; dimension];
            let full = generator.evolve(&uniform, &times).unwrap();
            for (step, (z, populations)) in reduced.iter().zip(&full).enumerate() {
                let state = DensityMatrix::from_populations(populations).unwrap();
                let projected = project_reduced(
                    &state,
                    ReducedVariables::GroundPair,
                    solution,
                    n_qubits,
                )
                .unwrap();
                let difference = max_abs_diff(z, &projected);
                assert!(
                    difference <= 1e-6,
                    "{} n={n_qubits} step {step}: rate closure off by {difference:.2e}",
                    kind.label(),
                );
            }
        }
    }
}

#[test]
fn shell_closures_match_the_full_bitflip_evolution() {
    let lambda = 0.1;
    for n_qubits in [3usize, 5] {
        let ladder = ShellLadder::equidistant(n_qubits, 1.0).unwrap();
        let bath = calibrated_bath(&ladder.gibbs_levels());
        let solution = 0b101u64 & ((1 << n_qubits) - 1);
        let top_label = solution ^ ((1u64 << n_qubits) - 1);
        let eta = CouplingKind::CollectiveBitFlip.eta(n_qubits as u32).unwrap();
        let eigen = EnergyEigenbasisModel::from_bitflip_ladder(&ladder, solution).unwrap();

        // Coherent channel: shell element sums against the full matrix.
        let chain = build_ladder(Method::Quantum, &ladder, &bath, lambda, eta).unwrap();
        let times = sample_grid(1.0 / chain.slowest_rate().unwrap());
        let reduced = chain.solve(&chain.initial_top_shell(), &times).unwrap();
        let generator = build_quantum_generator(&eigen, &bath, lambda, true).unwrap();
        let initial = DensityMatrix::basis_state(1 << n_qubits, top_label as usize).unwrap();
        let full = generator.evolve(&initial, &times).unwrap();
        for (step, (z, rho)) in reduced.iter().zip(&full).enumerate() {
            let projected = project_reduced(
                rho,
                ReducedVariables::CoherentShells,
                solution,
                n_qubits as u32,
            )
            .unwrap();
            let difference = max_abs_diff(z, &projected);
            assert!(
                difference <= 1e-6,
                "coherent shells n={n_qubits} step {step}: off by {difference:.2e}"
            );
        }

        // Incoherent channel: shell population sums against the full
        // Pauli equation.
        let chain = build_ladder(Method::Rate, &ladder, &bath, lambda, eta).unwrap();
        let times = sample_grid(1.0 / chain.slowest_rate().unwrap());
        let reduced = chain.solve(&chain.initial_top_shell(), &times).unwrap();
        let generator = build_rate_generator(&eigen, &bath, lambda).unwrap();
        let mut populations = vec![0.0; 1 << n_qubits];
        populations[top_label as usize] = 1.0;
        let full = generator.evolve(&populations, &times).unwrap();
        for (step, (z, populations)) in reduced.iter().zip(&full).enumerate() {
            let state = DensityMatrix::from_populations(populations).unwrap();
            let projected = project_reduced(
                &state,
                ReducedVariables::PopulationShells,
                solution,
                n_qubits as u32,
            )
            .unwrap();
            let difference = max_abs_diff(z, &projected);
            assert!(
                difference <= 1e-6,
                "population shells n={n_qubits} step {step}: off by {difference:.2e}"
            );
        }
    }
}
