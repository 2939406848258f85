//! Direct integration of the weak-coupling (Born–Markov–secular) master
//! equation in the system energy eigenbasis, at small register sizes.
//!
//! This is the crate's reference path. The closed models in
//! [`crate::reduced`] evolve two or `n + 1` aggregates; here the full
//! density matrix is evolved under the Lindblad generator assembled from a
//! hermitian coupling operator and a thermal bath, and
//! [`project_reduced`] folds the result back onto those aggregates. Any
//! disagreement points at a wrong closure, a wrong rate, or a wrong sign —
//! which is exactly what a reference integrator is for.
//!
//! # Generator assembly
//!
//! The coupling operator is decomposed into eigenoperators by transition
//! frequency: a nonzero element `A_ab` belongs to the frequency
//! `E_b - E_a`, and elements whose frequencies agree within the model's
//! matching tolerance share one class with a common rate
//! `lambda^2 gamma(omega)`. Each class contributes a sandwich term
//! `A(omega) rho A(omega)^T`; the accumulated quadratic form
//! `K = lambda^2 sum_omega gamma(omega) A(omega)^T A(omega)` drives the
//! anticommutator loss; and an optional level-shift matrix, built from the
//! bath's principal-value table, enters as a commutator. Both `K` and the
//! level shift only connect degenerate levels, so neither moves
//! populations across energy manifolds, and the level shift drops out of
//! every aggregate the reduced models track — the tests pin that down.
//!
//! # Propagation
//!
//! In the frame co-rotating with the bare phases `e^{i(E_a - E_b)t}` the
//! secular generator is autonomous: every dissipative term connects matrix
//! elements of equal transition frequency, so the phases cancel
//! identically. Trajectories are therefore marched in that frame by a
//! scaled Taylor expansion of the exponential, with substeps sized against
//! a rigorous bound on the generator norm, and the bare phases are
//! restored at each returned sample. Class members whose frequencies
//! differ within the matching tolerance are treated as exactly degenerate
//! by this propagator — the same identification the rate construction
//! makes, and the only self-consistent reading of a finite tolerance.
//!
//! # Scale caps
//!
//! Evolution works on anything the dense coupling constructors can build,
//! up to [`MAX_EVOLUTION_DIM`] states — a full register of
//! [`MAX_DENSE_QUBITS`] qubits. The explicit superoperator dumps sit
//! behind stricter caps ([`MAX_DENSE_SUPEROPERATOR_DIM`],
//! [`MAX_SPARSE_SUPEROPERATOR_DIM`]): they exist for inspection and
//! cross-checks, where quartic enumerations must stay cheap, not for
//! production evolution.

use ndarray::Array2;
use num_complex::Complex64;

use crate::bath::BathSpectrum;
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::model::{hamming_distance, CouplingKind, MarkedStateModel, ShellLadder, MAX_DENSE_QUBITS};
use crate::numeric::jacobi::hermitian_eigenvalues;
use crate::numeric::linsolve::solve_dense;

/// Largest eigenbasis dimension the evolution path accepts.
pub const MAX_EVOLUTION_DIM: usize = 1 << MAX_DENSE_QUBITS;

/// Largest dimension for which the dense `N^2 x N^2` superoperator matrix
/// (and the quartic damping-tensor enumeration) is materialized.
pub const MAX_DENSE_SUPEROPERATOR_DIM: usize = 32;

/// Largest dimension for which sparse superoperator entries are enumerated.
pub const MAX_SPARSE_SUPEROPERATOR_DIM: usize = 64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Generator-norm budget per Taylor substep. Larger phases need longer
/// series but fewer substeps; at 4 the series settles within ~36 terms
/// while intermediate-term growth stays below e^4, keeping cancellation
/// noise per substep near 1e-14.
const TAYLOR_STEP_PHASE: f64 = 4.0;

/// Relative size at which the Taylor series is considered converged. Terms
/// this small no longer change the accumulated sum in f64.
const TAYLOR_TERM_CUTOFF: f64 = 1e-17;

/// Hard cap on Taylor terms per substep; with the phase budget above the
/// series converges near term 36, so hitting this means the norm bound lied.
const TAYLOR_TERM_LIMIT: usize = 64;

/// A Hamiltonian spectrum together with a hermitian coupling operator,
/// both expressed in the energy eigenbasis.
#[derive(Debug, Clone)]
pub struct EnergyEigenbasisModel {
    energies: Vec<f64>,
    coupling: Array2<f64>,
    /// Absolute tolerance for matching transition frequencies and for
    /// deciding which levels count as degenerate.
    tolerance: f64,
}

impl EnergyEigenbasisModel {
    /// Assemble a model from explicit level energies and a real symmetric
    /// coupling matrix `<a|A|b>`.
    pub fn new(energies: Vec<f64>, coupling: Array2<f64>) -> Result<Self> {
        let n = energies.len();
        if n == 0 {
            return Err(Error::InvalidParameter("a model needs at least one level".into()));
        }
        if n > MAX_EVOLUTION_DIM {
            return Err(Error::ScaleExceeded { dim: n, max: MAX_EVOLUTION_DIM });
        }
        if coupling.nrows() != n || coupling.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: coupling.nrows().max(coupling.ncols()) });
        }
        let mut energy_scale = 0.0f64;
        for &e in &energies {
            ensure_finite("level energy", e)?;
            energy_scale = energy_scale.max(e.abs());
        }
        let mut coupling_scale = 0.0f64;
        for &v in coupling.iter() {
            ensure_finite("coupling matrix element", v)?;
            coupling_scale = coupling_scale.max(v.abs());
        }
        let symmetry_tolerance = 1e-12 * coupling_scale.max(1.0);
        for a in 0..n {
            for b in a + 1..n {
                if (coupling[(a, b)] - coupling[(b, a)]).abs() > symmetry_tolerance {
                    return Err(Error::InvalidParameter(format!(
                        "coupling matrix must be symmetric; elements ({a},{b}) and ({b},{a}) differ"
                    )));
                }
            }
        }
        let tolerance = 1e-9 * energy_scale.max(1.0);
        Ok(EnergyEigenbasisModel { energies, coupling, tolerance })
    }

    /// The marked-state register with one of the nonlocal couplings.
    pub fn from_marked_state(model: &MarkedStateModel, kind: CouplingKind) -> Result<Self> {
        let coupling = kind.coupling_matrix(model.n_qubits, model.solution)?;
        Self::new(model.energies(), coupling)
    }

    /// A qubit register whose energy depends only on the Hamming distance
    /// to `solution`, coupled through the collective bit flip. Label `a`
    /// inherits the shell energy at distance `hamming(a, solution)`.
    pub fn from_bitflip_ladder(ladder: &ShellLadder, solution: u64) -> Result<Self> {
        let n_qubits = ladder.n_qubits() as u32;
        let coupling = CouplingKind::CollectiveBitFlip.coupling_matrix(n_qubits, solution)?;
        let energies = (0..coupling.nrows())
            .map(|a| ladder.energies()[hamming_distance(a as u64, solution) as usize])
            .collect();
        Self::new(energies, coupling)
    }

    pub fn dimension(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn coupling(&self) -> &Array2<f64> {
        &self.coupling
    }

    /// Absolute tolerance used to group transition frequencies and detect
    /// degenerate levels.
    pub fn energy_match_tolerance(&self) -> f64 {
        self.tolerance
    }
}

/// A trace-one hermitian matrix in the energy eigenbasis.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    matrix: Array2<Complex64>,
}

impl DensityMatrix {
    /// Validate and wrap an explicit matrix: finite entries, hermitian to
    /// 1e-12 (relative to the largest entry), trace one to 1e-10.
    pub fn from_matrix(matrix: Array2<Complex64>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n || n == 0 {
            return Err(Error::DimensionMismatch { expected: n.max(1), got: matrix.ncols() });
        }
        let matrix = if matrix.is_standard_layout() {
            matrix
        } else {
            matrix.as_standard_layout().into_owned()
        };
        let mut scale = 0.0f64;
        for v in matrix.iter() {
            ensure_finite("density matrix entry (real part)", v.re)?;
            ensure_finite("density matrix entry (imaginary part)", v.im)?;
            scale = scale.max(v.norm());
        }
        let hermitian_tolerance = 1e-12 * scale.max(1.0);
        for a in 0..n {
            for b in a..n {
                if (matrix[(a, b)] - matrix[(b, a)].conj()).norm() > hermitian_tolerance {
                    return Err(Error::InvalidParameter(format!(
                        "density matrix is not hermitian at elements ({a},{b})/({b},{a})"
                    )));
                }
            }
        }
        let trace: Complex64 = (0..n).map(|a| matrix[(a, a)]).sum();
        if (trace.re - 1.0).abs() > 1e-10 || trace.im.abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "density matrix trace must be 1, got {} + {}i",
                trace.re, trace.im
            )));
        }
        Ok(DensityMatrix { matrix })
    }

    /// The maximally mixed preparation: `1/N` on the diagonal. Needs no
    /// knowledge of where the solution sits.
    pub fn uniform_diagonal(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidParameter("a density matrix needs at least one state".into()));
        }
        let weight = 1.0 / dimension as f64;
        let mut matrix = Array2::from_elem((dimension, dimension), ZERO);
        for a in 0..dimension {
            matrix[(a, a)] = Complex64::new(weight, 0.0);
        }
        Ok(DensityMatrix { matrix })
    }

    /// The equal-superposition projector: every matrix element `1/N`. Also
    /// preparation-blind with respect to the solution label.
    pub fn uniform_superposition(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidParameter("a density matrix needs at least one state".into()));
        }
        let weight = 1.0 / dimension as f64;
        Ok(DensityMatrix { matrix: Array2::from_elem((dimension, dimension), Complex64::new(weight, 0.0)) })
    }

    /// A single basis state `|index><index|` — for ladders, the top shell
    /// is the lone state at full Hamming distance from the solution.
    pub fn basis_state(dimension: usize, index: usize) -> Result<Self> {
        if index >= dimension {
            return Err(Error::IndexOutOfRange { index, size: dimension });
        }
        let mut matrix = Array2::from_elem((dimension, dimension), ZERO);
        matrix[(index, index)] = Complex64::new(1.0, 0.0);
        Ok(DensityMatrix { matrix })
    }

    /// A diagonal matrix from a population vector (must sum to one).
    pub fn from_populations(populations: &[f64]) -> Result<Self> {
        if populations.is_empty() {
            return Err(Error::InvalidParameter("a density matrix needs at least one state".into()));
        }
        let mut total = 0.0;
        for &p in populations {
            ensure_finite("population", p)?;
            total += p;
        }
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!("populations must sum to 1, got {total}")));
        }
        let n = populations.len();
        let mut matrix = Array2::from_elem((n, n), ZERO);
        for (a, &p) in populations.iter().enumerate() {
            matrix[(a, a)] = Complex64::new(p, 0.0);
        }
        Ok(DensityMatrix { matrix })
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.matrix
    }

    /// Diagonal element `rho_aa` as a real occupation.
    pub fn population(&self, state: usize) -> Result<f64> {
        if state >= self.dimension() {
            return Err(Error::IndexOutOfRange { index: state, size: self.dimension() });
        }
        Ok(self.matrix[(state, state)].re)
    }

    /// Real part of the trace (the imaginary part vanishes for hermitian
    /// input up to rounding).
    pub fn trace(&self) -> f64 {
        (0..self.dimension()).map(|a| self.matrix[(a, a)].re).sum()
    }

    /// Largest deviation from hermiticity, `max |rho_ab - conj(rho_ba)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dimension();
        let mut defect = 0.0f64;
        for a in 0..n {
            for b in a..n {
                defect = defect.max((self.matrix[(a, b)] - self.matrix[(b, a)].conj()).norm());
            }
        }
        defect
    }

    /// Smallest eigenvalue — the positivity margin. Costs a dense
    /// eigensolve of the doubled real embedding, so intended for
    /// verification at modest dimensions rather than inner loops.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let values = hermitian_eigenvalues(&self.matrix)?;
        Ok(values.first().copied().unwrap_or(0.0))
    }
}

/// One transition-frequency class of the coupling operator: the elements
/// `(a, b, A_ab)` whose `E_b - E_a` agree within tolerance, with the bath
/// rate already attached. `omega > 0` lowers the energy (emission).
#[derive(Debug, Clone)]
struct FrequencyClass {
    omega: f64,
    /// `lambda^2 gamma(omega)`; a class whose rate underflowed to zero is
    /// kept for bookkeeping but skipped during application.
    rate: f64,
    elements: Vec<(usize, usize, f64)>,
}

/// The full secular generator: frequency-resolved sandwich terms, the
/// quadratic loss form, and the optional level-shift commutator.
#[derive(Debug, Clone)]
pub struct QuantumGenerator {
    dimension: usize,
    energies: Vec<f64>,
    classes: Vec<FrequencyClass>,
    /// Sparse symmetric triplets of `K = lambda^2 sum gamma A(w)^T A(w)`.
    loss: Vec<(usize, usize, f64)>,
    /// Sparse symmetric triplets of the level-shift matrix; connects only
    /// degenerate levels.
    lamb: Vec<(usize, usize, f64)>,
    /// Upper bound on the 2-norm of the dissipative action, used to size
    /// Taylor substeps.
    norm_bound: f64,
}

/// Assemble the quantum master-equation generator for a model, bath, and
/// coupling strength. `include_lamb_shift` attaches the bath's
/// principal-value table as a level-shift commutator; the flag exists so
/// its (provable) cancellation in every reduced aggregate can be tested by
/// switching nothing else.
pub fn build_quantum_generator(
    model: &EnergyEigenbasisModel,
    bath: &BathSpectrum,
    lambda: f64,
    include_lamb_shift: bool,
) -> Result<QuantumGenerator> {
    ensure_positive("system-bath coupling lambda", lambda)?;
    let n = model.dimension();
    let energies = model.energies().to_vec();
    let tolerance = model.energy_match_tolerance();
    let strength = lambda * lambda;

    // A single level cannot relax: the sandwich and loss terms cancel
    // exactly for any rate, so skip the rate lookups (a flat bath would
    // otherwise demand a zero-frequency rate it never uses).
    if n == 1 {
        return Ok(QuantumGenerator {
            dimension: 1,
            energies,
            classes: Vec::new(),
            loss: Vec::new(),
            lamb: Vec::new(),
            norm_bound: 0.0,
        });
    }

    // Group the nonzero coupling elements by transition frequency.
    let mut tagged: Vec<(f64, usize, usize, f64)> = Vec::new();
    for a in 0..n {
        for b in 0..n {
            let v = model.coupling()[(a, b)];
            if v != 0.0 {
                tagged.push((energies[b] - energies[a], a, b, v));
            }
        }
    }
    tagged.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut classes: Vec<FrequencyClass> = Vec::new();
    let mut start = 0;
    while start < tagged.len() {
        let mut end = start + 1;
        while end < tagged.len() && tagged[end].0 - tagged[end - 1].0 <= tolerance {
            end += 1;
        }
        let members = &tagged[start..end];
        let mut omega = members.iter().map(|m| m.0).sum::<f64>() / members.len() as f64;
        if omega.abs() <= tolerance {
            omega = 0.0;
        }
        let rate = strength * bath.gamma(omega)?;
        let elements = members.iter().map(|&(_, a, b, v)| (a, b, v)).collect();
        classes.push(FrequencyClass { omega, rate, elements });
        start = end;
    }

    // Loss form K: per class, elements sharing a row multiply pairwise.
    let mut quadratic = Array2::<f64>::zeros((n, n));
    for class in &classes {
        if class.rate == 0.0 {
            continue;
        }
        let mut by_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(a, b, v) in &class.elements {
            by_row[a].push((b, v));
        }
        for row in &by_row {
            for &(b1, v1) in row {
                for &(b2, v2) in row {
                    quadratic[(b1, b2)] += class.rate * v1 * v2;
                }
            }
        }
    }
    let mut loss = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if quadratic[(a, b)] != 0.0 {
                loss.push((a, b, quadratic[(a, b)]));
            }
        }
    }

    // Level shift: only degenerate pairs, weighted by the tabulated
    // principal-value shifts at the frequencies reachable from them.
    let mut lamb = Vec::new();
    if include_lamb_shift && bath.has_lamb_shifts() {
        for a in 0..n {
            for b in 0..n {
                if (energies[a] - energies[b]).abs() > tolerance {
                    continue;
                }
                let mut shift = 0.0;
                for c in 0..n {
                    let left = model.coupling()[(c, a)];
                    let right = model.coupling()[(c, b)];
                    if left == 0.0 || right == 0.0 {
                        continue;
                    }
                    let s = bath.lamb_shift(energies[a] - energies[c], tolerance);
                    if s != 0.0 {
                        shift += s * left * right;
                    }
                }
                let value = 0.5 * strength * shift;
                if value != 0.0 {
                    lamb.push((a, b, value));
                }
            }
        }
    }

    // Rigorous norm bound: |A rho B| <= |A| |B| |rho| in Frobenius norm,
    // with each operator 2-norm bounded by sqrt(norm_1 * norm_inf).
    let mut norm_bound = 0.0;
    for class in &classes {
        let b = holder_bound(class.elements.iter().copied(), n);
        norm_bound += class.rate * b * b;
    }
    norm_bound += holder_bound(loss.iter().copied(), n);
    norm_bound += 2.0 * holder_bound(lamb.iter().copied(), n);

    Ok(QuantumGenerator { dimension: n, energies, classes, loss, lamb, norm_bound })
}

/// `sqrt(norm_1 * norm_inf)` over sparse triplets — an upper bound on the
/// matrix 2-norm.
fn holder_bound(triplets: impl Iterator<Item = (usize, usize, f64)>, n: usize) -> f64 {
    let mut row_sums = vec![0.0f64; n];
    let mut col_sums = vec![0.0f64; n];
    for (a, b, v) in triplets {
        row_sums[a] += v.abs();
        col_sums[b] += v.abs();
    }
    let rows = row_sums.iter().fold(0.0f64, |acc, &v| acc.max(v));
    let cols = col_sums.iter().fold(0.0f64, |acc, &v| acc.max(v));
    (rows * cols).sqrt()
}

impl QuantumGenerator {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// The transition-frequency classes as `(omega, rate, element count)`,
    /// sorted by frequency — the coarsest summary of what the coupling can
    /// drive.
    pub fn frequency_classes(&self) -> Vec<(f64, f64, usize)> {
        self.classes.iter().map(|c| (c.omega, c.rate, c.elements.len())).collect()
    }

    /// Dissipative action in the co-rotating frame, written onto `out`.
    /// All loops walk contiguous rows; `scratch` holds one intermediate
    /// product.
    fn dissipator_into(&self, rho: &[Complex64], scratch: &mut [Complex64], out: &mut [Complex64]) {
        let n = self.dimension;
        out.fill(ZERO);
        for class in &self.classes {
            if class.rate == 0.0 {
                continue;
            }
            // scratch = A(w) rho: row a of the product collects A_ab row b.
            scratch.fill(ZERO);
            for &(a, b, v) in &class.elements {
                let (dst, src) = (a * n, b * n);
                for j in 0..n {
                    scratch[dst + j] += v * rho[src + j];
                }
            }
            // out += rate * scratch A(w)^T: column a collects column b.
            for x in 0..n {
                let row = x * n;
                for &(a, b, v) in &class.elements {
                    out[row + a] += (class.rate * v) * scratch[row + b];
                }
            }
        }
        // -1/2 {K, rho}.
        for &(a, c, v) in &self.loss {
            let w = -0.5 * v;
            let (dst, src) = (a * n, c * n);
            for j in 0..n {
                out[dst + j] += w * rho[src + j];
            }
        }
        for x in 0..n {
            let row = x * n;
            for &(c, y, v) in &self.loss {
                out[row + y] -= (0.5 * v) * rho[row + c];
            }
        }
        // -i [shift, rho].
        for &(a, c, v) in &self.lamb {
            let alpha = Complex64::new(0.0, -v);
            let (dst, src) = (a * n, c * n);
            for j in 0..n {
                out[dst + j] += alpha * rho[src + j];
            }
        }
        for x in 0..n {
            let row = x * n;
            for &(c, y, v) in &self.lamb {
                out[row + y] += Complex64::new(0.0, v) * rho[row + c];
            }
        }
    }

    /// Full (laboratory-frame) action including the bare phases.
    fn generator_into(&self, rho: &[Complex64], scratch: &mut [Complex64], out: &mut [Complex64]) {
        let n = self.dimension;
        self.dissipator_into(rho, scratch, out);
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                let gap = self.energies[a] - self.energies[b];
                out[a * n + b] += Complex64::new(0.0, -gap) * rho[a * n + b];
            }
        }
    }

    /// Apply the generator to an arbitrary matrix (not necessarily a
    /// density matrix) — the exact linear action the superoperator dumps
    /// tabulate.
    pub fn apply(&self, rho: &Array2<Complex64>) -> Result<Array2<Complex64>> {
        let n = self.dimension;
        if rho.nrows() != n || rho.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: rho.nrows().max(rho.ncols()) });
        }
        let mut input = vec![ZERO; n * n];
        for a in 0..n {
            for b in 0..n {
                input[a * n + b] = rho[(a, b)];
            }
        }
        let mut scratch = vec![ZERO; n * n];
        let mut out = vec![ZERO; n * n];
        self.generator_into(&input, &mut scratch, &mut out);
        Ok(Array2::from_shape_vec((n, n), out).expect("square buffer"))
    }

    /// Evolve a density matrix and return it at each requested time
    /// (absolute, starting from the preparation at `t = 0`; strictly
    /// increasing).
    pub fn evolve(&self, initial: &DensityMatrix, times: &[f64]) -> Result<Vec<DensityMatrix>> {
        let n = self.dimension;
        if initial.dimension() != n {
            return Err(Error::DimensionMismatch { expected: n, got: initial.dimension() });
        }
        check_times(times)?;

        let mut state = vec![ZERO; n * n];
        for a in 0..n {
            for b in 0..n {
                state[a * n + b] = initial.matrix()[(a, b)];
            }
        }
        let mut term = vec![ZERO; n * n];
        let mut next = vec![ZERO; n * n];
        let mut scratch = vec![ZERO; n * n];

        let mut now = 0.0;
        let mut trajectory = Vec::with_capacity(times.len());
        for &t in times {
            self.march(&mut state, t - now, &mut term, &mut next, &mut scratch)?;
            now = t;
            trajectory.push(self.restore_phases(&state, t));
        }
        Ok(trajectory)
    }

    /// Advance the co-rotating state by `dt` with scaled Taylor substeps.
    fn march(
        &self,
        state: &mut [Complex64],
        dt: f64,
        term: &mut Vec<Complex64>,
        next: &mut Vec<Complex64>,
        scratch: &mut [Complex64],
    ) -> Result<()> {
        if dt == 0.0 || self.norm_bound == 0.0 {
            return Ok(());
        }
        let steps = ((self.norm_bound * dt / TAYLOR_STEP_PHASE).ceil() as usize).max(1);
        let h = dt / steps as f64;
        for _ in 0..steps {
            term.copy_from_slice(state);
            let mut converged = false;
            for k in 1..=TAYLOR_TERM_LIMIT {
                // next = (h/k) L term, accumulated onto the state.
                self.dissipator_into(term, scratch, next);
                let factor = h / k as f64;
                let mut term_norm_sq = 0.0;
                for v in next.iter_mut() {
                    *v *= factor;
                    term_norm_sq += v.norm_sqr();
                }
                let mut state_norm_sq = 0.0;
                for (s, v) in state.iter_mut().zip(next.iter()) {
                    *s += v;
                    state_norm_sq += s.norm_sqr();
                }
                std::mem::swap(term, next);
                if term_norm_sq.sqrt() <= TAYLOR_TERM_CUTOFF * state_norm_sq.sqrt() {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::IntegrationFailure(format!(
                    "matrix-exponential series did not settle within {TAYLOR_TERM_LIMIT} terms \
                     (norm bound {:.3e}, substep {:.3e})",
                    self.norm_bound, h
                )));
            }
        }
        Ok(())
    }

    /// Undo the co-rotating transformation at time `t`. Degenerate pairs
    /// pick up the exactly real factor `z conj(z)`, so manifold-internal
    /// coherences acquire no spurious phase.
    fn restore_phases(&self, state: &[Complex64], t: f64) -> DensityMatrix {
        let n = self.dimension;
        let phases: Vec<Complex64> =
            self.energies.iter().map(|&e| Complex64::new(0.0, -e * t).exp()).collect();
        let mut matrix = Array2::from_elem((n, n), ZERO);
        for a in 0..n {
            for b in 0..n {
                let value = state[a * n + b];
                matrix[(a, b)] = if a == b { value } else { value * phases[a] * phases[b].conj() };
            }
        }
        DensityMatrix { matrix }
    }

    /// Dense superoperator matrix on row-major matrix coefficients:
    /// column `c*N + d` holds the action on the unit matrix `E_cd`.
    pub fn superoperator_matrix(&self) -> Result<Array2<Complex64>> {
        let n = self.dimension;
        if n > MAX_DENSE_SUPEROPERATOR_DIM {
            return Err(Error::ScaleExceeded { dim: n, max: MAX_DENSE_SUPEROPERATOR_DIM });
        }
        let square = n * n;
        let mut matrix = Array2::from_elem((square, square), ZERO);
        let mut basis = vec![ZERO; square];
        let mut scratch = vec![ZERO; square];
        let mut column = vec![ZERO; square];
        for source in 0..square {
            basis[source] = Complex64::new(1.0, 0.0);
            self.generator_into(&basis, &mut scratch, &mut column);
            basis[source] = ZERO;
            for (target, &v) in column.iter().enumerate() {
                matrix[(target, source)] = v;
            }
        }
        Ok(matrix)
    }

    /// Sparse superoperator entries `(target, source, value)` on the same
    /// coefficient ordering as [`Self::superoperator_matrix`], sorted by
    /// target then source.
    pub fn superoperator_entries(&self) -> Result<Vec<(usize, usize, Complex64)>> {
        let n = self.dimension;
        if n > MAX_SPARSE_SUPEROPERATOR_DIM {
            return Err(Error::ScaleExceeded { dim: n, max: MAX_SPARSE_SUPEROPERATOR_DIM });
        }
        let square = n * n;
        let mut entries = Vec::new();
        let mut basis = vec![ZERO; square];
        let mut scratch = vec![ZERO; square];
        let mut column = vec![ZERO; square];
        for source in 0..square {
            basis[source] = Complex64::new(1.0, 0.0);
            self.generator_into(&basis, &mut scratch, &mut column);
            basis[source] = ZERO;
            for (target, &v) in column.iter().enumerate() {
                if v != ZERO {
                    entries.push((target, source, v));
                }
            }
        }
        entries.sort_by_key(|&(target, source, _)| (target, source));
        Ok(entries)
    }
}

/// The population-only restriction of the master equation: a classical
/// generator whose columns balance gain against loss exactly.
#[derive(Debug, Clone)]
pub struct RateGenerator {
    energies: Vec<f64>,
    matrix: Array2<f64>,
    norm_bound: f64,
}

/// Assemble the rate generator. Off-diagonal `R_ab` carries the transition
/// `b -> a` at `lambda^2 gamma(E_b - E_a) A_ab^2`; each diagonal is the
/// negated ordered sum of its column, so every column cancels bit-exactly
/// when re-summed in index order with the off-diagonal part grouped first.
pub fn build_rate_generator(
    model: &EnergyEigenbasisModel,
    bath: &BathSpectrum,
    lambda: f64,
) -> Result<RateGenerator> {
    ensure_positive("system-bath coupling lambda", lambda)?;
    let n = model.dimension();
    let energies = model.energies().to_vec();
    let tolerance = model.energy_match_tolerance();
    let strength = lambda * lambda;

    let mut matrix = Array2::<f64>::zeros((n, n));
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            let v = model.coupling()[(a, b)];
            if v == 0.0 {
                continue;
            }
            // Degenerate pairs sit at the zero-frequency point; snapping
            // avoids feeding the rate formula a tolerance-sized frequency,
            // where a flat density would produce an enormous bogus rate.
            let omega = energies[b] - energies[a];
            let omega = if omega.abs() <= tolerance { 0.0 } else { omega };
            matrix[(a, b)] = strength * bath.gamma(omega)? * v * v;
        }
    }
    for b in 0..n {
        let mut outflow = 0.0;
        for a in 0..n {
            if a != b {
                outflow += matrix[(a, b)];
            }
        }
        matrix[(b, b)] = -outflow;
    }

    let norm_bound = {
        let mut rows = vec![0.0f64; n];
        let mut cols = vec![0.0f64; n];
        for a in 0..n {
            for b in 0..n {
                rows[a] += matrix[(a, b)].abs();
                cols[b] += matrix[(a, b)].abs();
            }
        }
        let r = rows.iter().fold(0.0f64, |acc, &v| acc.max(v));
        let c = cols.iter().fold(0.0f64, |acc, &v| acc.max(v));
        (r * c).sqrt()
    };

    Ok(RateGenerator { energies, matrix, norm_bound })
}

impl RateGenerator {
    pub fn dimension(&self) -> usize {
        self.energies.len()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Evolve a population vector, returning it at each requested time.
    pub fn evolve(&self, initial: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = self.dimension();
        if initial.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: initial.len() });
        }
        for &p in initial {
            ensure_finite("population", p)?;
        }
        check_times(times)?;

        let mut state = initial.to_vec();
        let mut term = vec![0.0; n];
        let mut next = vec![0.0; n];
        let mut now = 0.0;
        let mut trajectory = Vec::with_capacity(times.len());
        for &t in times {
            self.march(&mut state, t - now, &mut term, &mut next)?;
            now = t;
            trajectory.push(state.clone());
        }
        Ok(trajectory)
    }

    fn march(&self, state: &mut [f64], dt: f64, term: &mut Vec<f64>, next: &mut Vec<f64>) -> Result<()> {
        if dt == 0.0 || self.norm_bound == 0.0 {
            return Ok(());
        }
        let steps = ((self.norm_bound * dt / TAYLOR_STEP_PHASE).ceil() as usize).max(1);
        let h = dt / steps as f64;
        for _ in 0..steps {
            term.copy_from_slice(state);
            let mut converged = false;
            for k in 1..=TAYLOR_TERM_LIMIT {
                let factor = h / k as f64;
                let mut term_norm_sq = 0.0;
                for (row, slot) in self.matrix.rows().into_iter().zip(next.iter_mut()) {
                    let acc: f64 = row.iter().zip(term.iter()).map(|(&m, &t)| m * t).sum();
                    let v = factor * acc;
                    *slot = v;
                    term_norm_sq += v * v;
                }
                let mut state_norm_sq = 0.0;
                for (s, &v) in state.iter_mut().zip(next.iter()) {
                    *s += v;
                    state_norm_sq += *s * *s;
                }
                std::mem::swap(term, next);
                if term_norm_sq.sqrt() <= TAYLOR_TERM_CUTOFF * state_norm_sq.sqrt() {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::IntegrationFailure(format!(
                    "rate-equation series did not settle within {TAYLOR_TERM_LIMIT} terms \
                     (norm bound {:.3e}, substep {:.3e})",
                    self.norm_bound, h
                )));
            }
        }
        Ok(())
    }

    /// The normalized stationary population vector, from a dense solve of
    /// the balance equations with the normalization row substituted in.
    pub fn stationary(&self) -> Result<Vec<f64>> {
        let n = self.dimension();
        let mut system = self.matrix.clone();
        for b in 0..n {
            system[(0, b)] = 1.0;
        }
        let mut rhs = vec![0.0; n];
        rhs[0] = 1.0;
        solve_dense(&system, &rhs)
    }
}

/// One matched damping entry: the element pair `(a, b), (c, d)` and the
/// rate it carries.
pub type DampingEntry = ((usize, usize, usize, usize), f64);

/// The damping coefficients and level shifts as literal sparse maps, for
/// inspection and invariant checks. Unlike the generator, which groups
/// elements into frequency classes, this tabulates every matched pair
/// `(a,b),(c,d)` individually.
#[derive(Debug, Clone)]
pub struct DampingTensor {
    rates: Vec<DampingEntry>,
    shifts: Vec<((usize, usize), f64)>,
}

/// Tabulate the damping tensor: entries `((a,b,c,d), value)` where the
/// transition frequencies of `(a,b)` and `(c,d)` match within tolerance,
/// plus the level-shift map from the bath's principal-value table.
pub fn build_damping_tensor(
    model: &EnergyEigenbasisModel,
    bath: &BathSpectrum,
    lambda: f64,
) -> Result<DampingTensor> {
    ensure_positive("system-bath coupling lambda", lambda)?;
    let n = model.dimension();
    if n > MAX_DENSE_SUPEROPERATOR_DIM {
        return Err(Error::ScaleExceeded { dim: n, max: MAX_DENSE_SUPEROPERATOR_DIM });
    }
    let energies = model.energies();
    let tolerance = model.energy_match_tolerance();
    let strength = lambda * lambda;

    let mut pairs: Vec<(usize, usize, f64, f64)> = Vec::new();
    for a in 0..n {
        for b in 0..n {
            let v = model.coupling()[(a, b)];
            if v != 0.0 {
                let omega = energies[b] - energies[a];
                let omega = if omega.abs() <= tolerance { 0.0 } else { omega };
                pairs.push((a, b, v, omega));
            }
        }
    }

    let mut rates = Vec::new();
    for &(a, b, v_ab, omega_ab) in &pairs {
        let rate = strength * bath.gamma(omega_ab)?;
        for &(c, d, v_cd, omega_cd) in &pairs {
            if (omega_ab - omega_cd).abs() <= tolerance {
                rates.push(((a, b, c, d), rate * v_ab * v_cd));
            }
        }
    }

    let mut shifts = Vec::new();
    if bath.has_lamb_shifts() {
        for a in 0..n {
            for b in 0..n {
                if (energies[a] - energies[b]).abs() > tolerance {
                    continue;
                }
                let mut shift = 0.0;
                for c in 0..n {
                    let left = model.coupling()[(c, a)];
                    let right = model.coupling()[(c, b)];
                    if left == 0.0 || right == 0.0 {
                        continue;
                    }
                    shift += bath.lamb_shift(energies[a] - energies[c], tolerance) * left * right;
                }
                let value = 0.5 * strength * shift;
                if value != 0.0 {
                    shifts.push(((a, b), value));
                }
            }
        }
    }

    Ok(DampingTensor { rates, shifts })
}

impl DampingTensor {
    /// Matched damping entries `((a, b, c, d), value)`.
    pub fn rates(&self) -> &[DampingEntry] {
        &self.rates
    }

    /// Level-shift entries `((a, b), value)` on degenerate pairs.
    pub fn shifts(&self) -> &[((usize, usize), f64)] {
        &self.shifts
    }
}

/// The aggregates the closed reduced models evolve. Pair sets return
/// `[z1, z2]`; shell sets return one entry per Hamming shell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReducedVariables {
    /// Solution population and the summed remaining populations.
    GroundPair,
    /// Solution population and the full off-solution element sum,
    /// coherences included.
    CoherentPair,
    /// Solution population and the sign-weighted off-solution element sum,
    /// each element carrying `(-1)^{|w&a| + |w&b|}`.
    HadamardPair,
    /// Population of each Hamming shell around the solution.
    PopulationShells,
    /// Full element sum within each Hamming shell, coherences included.
    CoherentShells,
}

impl ReducedVariables {
    pub const ALL: [ReducedVariables; 5] = [
        ReducedVariables::GroundPair,
        ReducedVariables::CoherentPair,
        ReducedVariables::HadamardPair,
        ReducedVariables::PopulationShells,
        ReducedVariables::CoherentShells,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ReducedVariables::GroundPair => "ground_pair",
            ReducedVariables::CoherentPair => "coherent_pair",
            ReducedVariables::HadamardPair => "hadamard_pair",
            ReducedVariables::PopulationShells => "population_shells",
            ReducedVariables::CoherentShells => "coherent_shells",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.label() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown variable set '{s}'")))
    }
}

/// Project a density matrix onto a reduced variable set around `solution`
/// in an `n_qubits` register.
pub fn project_reduced(
    rho: &DensityMatrix,
    variables: ReducedVariables,
    solution: u64,
    n_qubits: u32,
) -> Result<Vec<f64>> {
    project_matrix_elements(rho.matrix(), variables, solution, n_qubits)
}

/// The same aggregation applied to an arbitrary matrix — e.g. the output
/// of [`QuantumGenerator::apply`], whose projection is the exact time
/// derivative of the reduced variables.
pub fn project_matrix_elements(
    matrix: &Array2<Complex64>,
    variables: ReducedVariables,
    solution: u64,
    n_qubits: u32,
) -> Result<Vec<f64>> {
    if n_qubits == 0 || n_qubits > 30 {
        return Err(Error::InvalidParameter(format!(
            "register size must be between 1 and 30 qubits, got {n_qubits}"
        )));
    }
    let n = 1usize << n_qubits;
    if matrix.nrows() != n || matrix.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: matrix.nrows().max(matrix.ncols()) });
    }
    if solution >> n_qubits != 0 {
        return Err(Error::LabelWidth { label: solution, bits: n_qubits });
    }
    let w = solution as usize;

    let projected = match variables {
        ReducedVariables::GroundPair => {
            let mut rest = 0.0;
            for a in 0..n {
                if a != w {
                    rest += matrix[(a, a)].re;
                }
            }
            vec![matrix[(w, w)].re, rest]
        }
        ReducedVariables::CoherentPair => {
            let mut aggregate = 0.0;
            for a in 0..n {
                if a == w {
                    continue;
                }
                for b in 0..n {
                    if b != w {
                        aggregate += matrix[(a, b)].re;
                    }
                }
            }
            vec![matrix[(w, w)].re, aggregate]
        }
        ReducedVariables::HadamardPair => {
            let mut aggregate = 0.0;
            for a in 0..n {
                if a == w {
                    continue;
                }
                let sign_a = (solution & a as u64).count_ones();
                for b in 0..n {
                    if b == w {
                        continue;
                    }
                    let parity = sign_a + (solution & b as u64).count_ones();
                    let term = matrix[(a, b)].re;
                    aggregate += if parity.is_multiple_of(2) { term } else { -term };
                }
            }
            vec![matrix[(w, w)].re, aggregate]
        }
        ReducedVariables::PopulationShells => {
            let mut shells = vec![0.0; n_qubits as usize + 1];
            for a in 0..n {
                shells[hamming_distance(a as u64, solution) as usize] += matrix[(a, a)].re;
            }
            shells
        }
        ReducedVariables::CoherentShells => {
            let mut shells = vec![0.0; n_qubits as usize + 1];
            for a in 0..n {
                let shell = hamming_distance(a as u64, solution) as usize;
                for b in 0..n {
                    if hamming_distance(b as u64, solution) as usize == shell {
                        shells[shell] += matrix[(a, b)].re;
                    }
                }
            }
            shells
        }
    };
    Ok(projected)
}

/// Decay rate of the coherence between two eigenstates of a coupling that
/// commutes with the Hamiltonian: `lambda^2 gamma(0) (d_a - d_b)^2 / 2`.
pub fn dephasing_decay_rate(d_a: f64, d_b: f64, lambda: f64, gamma_zero: f64) -> f64 {
    let difference = d_a - d_b;
    0.5 * lambda * lambda * gamma_zero * difference * difference
}

/// Shared validation for trajectory sample times: finite, nonnegative,
/// strictly increasing.
fn check_times(times: &[f64]) -> Result<()> {
    let mut previous = f64::NEG_INFINITY;
    for &t in times {
        ensure_finite("sample time", t)?;
        if t < 0.0 {
            return Err(Error::InvalidParameter(format!("sample times must be >= 0, got {t}")));
        }
        if t <= previous {
            return Err(Error::UnsortedTimes);
        }
        previous = t;
    }
    Ok(())
}
