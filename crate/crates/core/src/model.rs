//! System models: marked-state search Hamiltonians, coupling-operator
//! families, and shell ladders with their degeneracies.
//!
//! The register holds `n` qubits, so the Hilbert space dimension is
//! `N = 2^n` and computational basis states are bit labels `0..N`. A search
//! model singles out one *solution* label `w` and gives it energy `0`, all
//! other states sitting `gap` above it. The five coupling families differ in
//! how they connect the solution to the rest:
//!
//! - `Projector`: onto the uniform superposition; every matrix element `1/N`.
//! - `Indirect`: uniform projector plus solution projector — the solution
//!   enters only through its population.
//! - `Direct`: uniform state to solution transition — a genuine amplitude
//!   bridge into the solution.
//! - `Hadamard`: the full Hadamard transform as coupling operator.
//! - `CollectiveBitFlip`: sum of single-qubit flips; connects labels at
//!   Hamming distance one, closing on Hamming-weight shells.
//!
//! Every kind carries its normalization `eta`, fixed so the coupling
//! operator has unit norm (up to the documented indirect-kind overshoot).

use ndarray::Array2;
use num_bigint::BigUint;

use crate::error::{ensure_positive, Error, Result};
use crate::numeric::logsum::{ln_factorial_table, log_sum_exp};

/// Widest register for which dense `2^n`-dimensional objects are built.
pub const MAX_DENSE_QUBITS: u32 = 8;

/// The five coupling-operator families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CouplingKind {
    Projector,
    Indirect,
    Direct,
    Hadamard,
    CollectiveBitFlip,
}

impl CouplingKind {
    /// All kinds, in the order used for reports.
    pub const ALL: [CouplingKind; 5] = [
        CouplingKind::Projector,
        CouplingKind::Indirect,
        CouplingKind::Direct,
        CouplingKind::Hadamard,
        CouplingKind::CollectiveBitFlip,
    ];

    /// Stable lowercase name (CLI vocabulary).
    pub fn label(&self) -> &'static str {
        match self {
            CouplingKind::Projector => "projector",
            CouplingKind::Indirect => "indirect",
            CouplingKind::Direct => "direct",
            CouplingKind::Hadamard => "hadamard",
            CouplingKind::CollectiveBitFlip => "collective_bitflip",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        CouplingKind::ALL
            .iter()
            .copied()
            .find(|k| k.label() == s)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown coupling kind '{s}' (expected one of projector, indirect, direct, hadamard, collective_bitflip)"
                ))
            })
    }

    /// True for the coupling that closes on Hamming shells (a ladder of
    /// `n + 1` variables) rather than on a two-variable reduced system.
    pub fn is_shell_local(&self) -> bool {
        matches!(self, CouplingKind::CollectiveBitFlip)
    }

    /// Normalization factor `eta` for a register of `n_qubits`.
    ///
    /// With `N = 2^n`: projector and hadamard are already normalized
    /// (`eta = 1`); indirect carries `N/(N+1)`, direct `sqrt(N)/(1+sqrt(N))`,
    /// and the collective bit flip `1/n`.
    pub fn eta(&self, n_qubits: u32) -> Result<f64> {
        validate_register(n_qubits)?;
        let big_n = f64::exp2(n_qubits as f64);
        Ok(match self {
            CouplingKind::Projector | CouplingKind::Hadamard => 1.0,
            CouplingKind::Indirect => big_n / (big_n + 1.0),
            CouplingKind::Direct => big_n.sqrt() / (1.0 + big_n.sqrt()),
            CouplingKind::CollectiveBitFlip => 1.0 / n_qubits as f64,
        })
    }

    /// Exact coupling matrix element `<a| A |b>`, including `eta`.
    pub fn matrix_element(&self, a: u64, b: u64, n_qubits: u32, solution: u64) -> Result<f64> {
        validate_register(n_qubits)?;
        for label in [a, b, solution] {
            validate_label(label, n_qubits)?;
        }
        let big_n = f64::exp2(n_qubits as f64);
        let eta = self.eta(n_qubits)?;
        Ok(match self {
            CouplingKind::Projector => 1.0 / big_n,
            CouplingKind::Indirect => {
                eta * (1.0 / big_n + if a == solution && b == solution { 1.0 } else { 0.0 })
            }
            CouplingKind::Direct => {
                let bridge = (if b == solution { 1.0 } else { 0.0 })
                    + (if a == solution { 1.0 } else { 0.0 });
                eta * bridge / big_n.sqrt()
            }
            CouplingKind::Hadamard => {
                let sign = if (a & b).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
                sign / big_n.sqrt()
            }
            CouplingKind::CollectiveBitFlip => {
                if hamming_distance(a, b) == 1 {
                    eta
                } else {
                    0.0
                }
            }
        })
    }

    /// Dense `N x N` coupling matrix (capped at [`MAX_DENSE_QUBITS`]).
    pub fn coupling_matrix(&self, n_qubits: u32, solution: u64) -> Result<Array2<f64>> {
        validate_register(n_qubits)?;
        if n_qubits > MAX_DENSE_QUBITS {
            return Err(Error::ScaleExceeded {
                dim: 1usize << n_qubits,
                max: 1usize << MAX_DENSE_QUBITS,
            });
        }
        validate_label(solution, n_qubits)?;
        let n = 1usize << n_qubits;
        let mut m = Array2::<f64>::zeros((n, n));
        for a in 0..n {
            for b in 0..n {
                m[(a, b)] = self.matrix_element(a as u64, b as u64, n_qubits, solution)?;
            }
        }
        Ok(m)
    }
}

/// Number of differing bits between two basis labels.
pub fn hamming_distance(a: u64, b: u64) -> u32 {
    (a ^ b).count_ones()
}

fn validate_register(n_qubits: u32) -> Result<()> {
    if n_qubits == 0 || n_qubits > 63 {
        return Err(Error::InvalidParameter(format!(
            "register size must be between 1 and 63 qubits, got {n_qubits}"
        )));
    }
    Ok(())
}

fn validate_label(label: u64, n_qubits: u32) -> Result<()> {
    if n_qubits < 64 && label >> n_qubits != 0 {
        return Err(Error::LabelWidth { label, bits: n_qubits });
    }
    Ok(())
}

/// A register with one marked low-energy basis state: the solution sits at
/// energy zero and every other label sits `gap` above it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkedStateModel {
    pub n_qubits: u32,
    pub solution: u64,
    pub gap: f64,
}

impl MarkedStateModel {
    pub fn new(n_qubits: u32, solution: u64, gap: f64) -> Result<Self> {
        validate_register(n_qubits)?;
        validate_label(solution, n_qubits)?;
        ensure_positive("energy gap", gap)?;
        Ok(MarkedStateModel { n_qubits, solution, gap })
    }

    pub fn dimension(&self) -> usize {
        1usize << self.n_qubits
    }

    pub fn dimension_f64(&self) -> f64 {
        f64::exp2(self.n_qubits as f64)
    }

    /// Energy of basis label `a`.
    pub fn energy(&self, a: u64) -> f64 {
        if a == self.solution {
            0.0
        } else {
            self.gap
        }
    }

    /// All `N` energies, solution first having energy zero.
    pub fn energies(&self) -> Vec<f64> {
        (0..self.dimension() as u64).map(|a| self.energy(a)).collect()
    }

    /// The two thermal levels `(energy, ln degeneracy)`: the solution and
    /// the `N - 1` degenerate states above it.
    pub fn gibbs_levels(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 0.0), (self.gap, (self.dimension_f64() - 1.0).ln())]
    }
}

/// Energy shells of a qubit register under a collective (permutation
/// symmetric) Hamiltonian: shell `alpha` holds the `C(n, alpha)` labels of
/// Hamming weight `alpha` at energy `energies[alpha]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellLadder {
    n_qubits: usize,
    energies: Vec<f64>,
    ln_factorials: Vec<f64>,
}

impl ShellLadder {
    /// Equidistant ladder: shell `alpha` at energy `alpha * gap`.
    pub fn equidistant(n_qubits: usize, gap: f64) -> Result<Self> {
        ensure_positive("energy gap", gap)?;
        let energies = (0..=n_qubits).map(|alpha| alpha as f64 * gap).collect();
        Self::with_energies(n_qubits, energies)
    }

    /// Ladder with explicit shell energies (must increase strictly so that
    /// "down the ladder" and "down in energy" coincide).
    pub fn with_energies(n_qubits: usize, energies: Vec<f64>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidParameter("ladder needs at least one qubit".into()));
        }
        if energies.len() != n_qubits + 1 {
            return Err(Error::DimensionMismatch { expected: n_qubits + 1, got: energies.len() });
        }
        for &e in &energies {
            crate::error::ensure_finite("shell energy", e)?;
        }
        if energies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "shell energies must be strictly increasing".into(),
            ));
        }
        let ln_factorials = ln_factorial_table(n_qubits);
        Ok(ShellLadder { n_qubits, energies, ln_factorials })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Number of shells, `n + 1`.
    pub fn shells(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Upward gap `E_{alpha+1} - E_alpha`, for `alpha` in `0..n`.
    pub fn gap(&self, alpha: usize) -> Result<f64> {
        if alpha + 1 >= self.energies.len() {
            return Err(Error::IndexOutOfRange { index: alpha, size: self.energies.len() - 1 });
        }
        Ok(self.energies[alpha + 1] - self.energies[alpha])
    }

    /// `ln C(n, alpha)`.
    pub fn ln_degeneracy(&self, alpha: usize) -> Result<f64> {
        if alpha >= self.shells() {
            return Err(Error::IndexOutOfRange { index: alpha, size: self.shells() });
        }
        Ok(crate::numeric::logsum::ln_binomial(&self.ln_factorials, self.n_qubits, alpha))
    }

    /// Thermal levels `(energy, ln degeneracy)` for every shell.
    pub fn gibbs_levels(&self) -> Vec<(f64, f64)> {
        (0..self.shells())
            .map(|alpha| {
                (self.energies[alpha], self.ln_degeneracy(alpha).expect("alpha < len"))
            })
            .collect()
    }
}

/// Exact shell degeneracy `C(n, k)` as a big integer.
pub fn shell_degeneracy(n: usize, k: usize) -> Result<BigUint> {
    if k > n {
        return Err(Error::IndexOutOfRange { index: k, size: n + 1 });
    }
    let k = k.min(n - k);
    let mut value = BigUint::from(1u32);
    // Multiply/divide alternately; each prefix is itself a binomial, so the
    // division is always exact.
    for i in 0..k {
        value = value * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    Ok(value)
}

/// Gibbs weight of the lowest level among `levels = (energy, ln degeneracy)`
/// pairs at inverse temperature `beta` (infinity allowed).
///
/// Levels must have distinct energies; the result is
/// `d0 e^{-beta E0} / sum_a d_a e^{-beta E_a}`, evaluated in log space so
/// that neither huge `beta` nor huge degeneracies overflow.
pub fn gibbs_ground_probability(levels: &[(f64, f64)], beta: f64) -> Result<f64> {
    if levels.is_empty() {
        return Err(Error::InvalidParameter("no thermal levels given".into()));
    }
    if beta.is_nan() || beta <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "inverse temperature must be positive (or infinite), got {beta}"
        )));
    }
    let ground = levels
        .iter()
        .copied()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("levels is non-empty");
    let mut ln_weights = Vec::with_capacity(levels.len());
    for &(energy, ln_deg) in levels {
        crate::error::ensure_finite("level energy", energy)?;
        crate::error::ensure_finite("level ln-degeneracy", ln_deg)?;
        // Guard energy == ground against beta = inf (inf * 0 is NaN).
        let ln_w = if energy == ground.0 { ln_deg } else { ln_deg - beta * (energy - ground.0) };
        ln_weights.push(ln_w);
    }
    let total = log_sum_exp(&ln_weights);
    Ok((ground.1 - total).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eta_closed_forms() {
        assert_eq!(CouplingKind::Projector.eta(5).unwrap(), 1.0);
        assert_eq!(CouplingKind::Hadamard.eta(5).unwrap(), 1.0);
        // N = 4: indirect 4/5, direct 2/3.
        assert_relative_eq!(CouplingKind::Indirect.eta(2).unwrap(), 0.8, max_relative = 1e-15);
        assert_relative_eq!(
            CouplingKind::Direct.eta(2).unwrap(),
            2.0 / 3.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            CouplingKind::CollectiveBitFlip.eta(10).unwrap(),
            0.1,
            max_relative = 1e-15
        );
    }

    #[test]
    fn projector_elements_are_uniform() {
        for a in 0..8u64 {
            for b in 0..8u64 {
                let v = CouplingKind::Projector.matrix_element(a, b, 3, 5).unwrap();
                assert_eq!(v, 0.125);
            }
        }
    }

    #[test]
    fn indirect_adds_solution_population() {
        let w = 2u64;
        let plain = CouplingKind::Indirect.matrix_element(0, 1, 2, w).unwrap();
        let marked = CouplingKind::Indirect.matrix_element(w, w, 2, w).unwrap();
        // eta (1/N) off the solution, eta (1/N + 1) on it; N = 4, eta = 4/5.
        assert_relative_eq!(plain, 0.8 * 0.25, max_relative = 1e-15);
        assert_relative_eq!(marked, 0.8 * 1.25, max_relative = 1e-15);
    }

    #[test]
    fn direct_bridges_solution_and_uniform_state() {
        let w = 1u64;
        let eta = CouplingKind::Direct.eta(2).unwrap();
        let off = CouplingKind::Direct.matrix_element(3, w, 2, w).unwrap();
        let diag = CouplingKind::Direct.matrix_element(w, w, 2, w).unwrap();
        let dead = CouplingKind::Direct.matrix_element(0, 3, 2, w).unwrap();
        assert_relative_eq!(off, eta / 2.0, max_relative = 1e-15);
        assert_relative_eq!(diag, eta, max_relative = 1e-15); // both deltas fire
        assert_eq!(dead, 0.0);
    }

    #[test]
    fn hadamard_element_signs_follow_bitwise_overlap() {
        // <3| A |3> for two qubits: (-1)^{popcount(3)} / 2 = +1/2.
        let v = CouplingKind::Hadamard.matrix_element(3, 3, 2, 0).unwrap();
        assert_eq!(v, 0.5);
        let v = CouplingKind::Hadamard.matrix_element(1, 3, 2, 0).unwrap();
        assert_eq!(v, -0.5);
    }

    #[test]
    fn hadamard_matrix_is_an_involution() {
        for n in 1..=6u32 {
            let a = CouplingKind::Hadamard.coupling_matrix(n, 0).unwrap();
            let sq = a.dot(&a);
            let dim = 1usize << n;
            for i in 0..dim {
                for j in 0..dim {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (sq[(i, j)] - expected).abs() < 1e-12,
                        "n={n} entry ({i},{j}) = {}",
                        sq[(i, j)]
                    );
                }
            }
        }
    }

    #[test]
    fn bitflip_connects_hamming_neighbours_only() {
        let k = CouplingKind::CollectiveBitFlip;
        assert_relative_eq!(k.matrix_element(0b101, 0b100, 3, 0).unwrap(), 1.0 / 3.0);
        assert_eq!(k.matrix_element(0b101, 0b110, 3, 0).unwrap(), 0.0);
        assert_eq!(k.matrix_element(0b101, 0b101, 3, 0).unwrap(), 0.0);
    }

    #[test]
    fn labels_must_fit_the_register() {
        let err = CouplingKind::Projector.matrix_element(4, 0, 2, 0);
        assert!(matches!(err, Err(Error::LabelWidth { label: 4, bits: 2 })));
        assert!(MarkedStateModel::new(2, 7, 1.0).is_err());
    }

    #[test]
    fn coupling_norms_are_unit_up_to_the_indirect_overshoot() {
        // Largest-magnitude eigenvalue of each dense coupling matrix. The
        // indirect kind overshoots 1 slightly: |s> and |w> are not
        // orthogonal, and eta = N/(N+1) normalizes the overlapping pair to
        // (N + sqrt(N))/(N + 1) rather than exactly 1.
        use crate::numeric::jacobi::symmetric_eigenvalues;
        let n = 4u32;
        let big_n = 16.0f64;
        for kind in CouplingKind::ALL {
            let m = kind.coupling_matrix(n, 3).unwrap();
            let vals = symmetric_eigenvalues(&m).unwrap();
            let norm = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            let expected = match kind {
                CouplingKind::Indirect => (big_n + big_n.sqrt()) / (big_n + 1.0),
                _ => 1.0,
            };
            assert_relative_eq!(norm, expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn shell_degeneracy_exact_values() {
        assert_eq!(shell_degeneracy(10, 6).unwrap(), BigUint::from(210u32));
        assert_eq!(shell_degeneracy(0, 0).unwrap(), BigUint::from(1u32));
        assert_eq!(shell_degeneracy(60, 30).unwrap(), BigUint::from(118_264_581_564_861_424u64));
        assert!(shell_degeneracy(5, 6).is_err());
    }

    #[test]
    fn ladder_gaps_and_degeneracies() {
        let ladder = ShellLadder::equidistant(10, 0.5).unwrap();
        assert_eq!(ladder.shells(), 11);
        assert_eq!(ladder.gap(3).unwrap(), 0.5);
        assert_relative_eq!(ladder.ln_degeneracy(6).unwrap(), 210.0f64.ln(), max_relative = 1e-14);
        assert!(ladder.gap(10).is_err());
    }

    #[test]
    fn ladder_rejects_non_monotone_energies() {
        assert!(ShellLadder::with_energies(2, vec![0.0, 1.0, 1.0]).is_err());
        assert!(ShellLadder::with_energies(2, vec![0.0, 2.0, 1.0]).is_err());
    }

    #[test]
    fn gibbs_ground_probability_two_level_closed_form() {
        // P0 = 1 / (1 + (N-1) e^{-beta gap}) for the marked-state model.
        let model = MarkedStateModel::new(2, 0, 1.0).unwrap();
        let beta = 57f64.ln(); // e^{beta} = 57 makes P0 = 57/60 = 0.95
        let p0 = gibbs_ground_probability(&model.gibbs_levels(), beta).unwrap();
        assert_relative_eq!(p0, 0.95, max_relative = 1e-13);
    }

    #[test]
    fn gibbs_ground_probability_ladder_closed_form() {
        // Independent qubits: P0 = (1 + e^{-beta gap})^{-n}.
        let ladder = ShellLadder::equidistant(50, 1.0).unwrap();
        let beta = 2.0;
        let p0 = gibbs_ground_probability(&ladder.gibbs_levels(), beta).unwrap();
        let expected = (1.0 + (-2.0f64).exp()).powi(-50);
        assert_relative_eq!(p0, expected, max_relative = 1e-12);
    }

    #[test]
    fn gibbs_ground_probability_zero_temperature() {
        let model = MarkedStateModel::new(3, 1, 0.7).unwrap();
        let p0 = gibbs_ground_probability(&model.gibbs_levels(), f64::INFINITY).unwrap();
        assert_eq!(p0, 1.0);
    }

    #[test]
    fn parse_round_trips_labels() {
        for kind in CouplingKind::ALL {
            assert_eq!(CouplingKind::parse(kind.label()).unwrap(), kind);
        }
        assert!(CouplingKind::parse("sigma_z").is_err());
    }
}
