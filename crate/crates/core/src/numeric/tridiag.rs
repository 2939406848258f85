//! Tridiagonal workhorses: eigendecomposition of real symmetric matrices
//! and stepped propagation of birth-death generators.
//!
//! The eigensolver is implicit-shift QL with accumulated rotations.
//! Shell-ladder generators are similar to symmetric tridiagonal matrices
//! after a diagonal scaling, so it backs every modal finite-temperature
//! ladder solve. The matrices involved are small (a few hundred rows);
//! robustness, not blocked performance, is what matters here.
//!
//! The propagator exists because the scaling that makes the modal route
//! possible can span hundreds of orders of magnitude on strongly biased
//! chains, and because explicit adaptive integrators are treacherous on
//! stiff linear flows: once the transient has decayed the controller grows
//! the step past the stability boundary, the truncation estimate — blind
//! to the parasitic mode both embedded solutions share — keeps accepting,
//! and roundoff amplifies exponentially. Stepped Taylor summation with
//! `h ||M||_1 <= 1` has no such boundary to cross.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric
/// tridiagonal matrix. Column `j` of `vectors` is the eigenvector belonging
/// to `values[j]`.
#[derive(Debug, Clone)]
pub struct TridiagonalEigen {
    pub values: Vec<f64>,
    pub vectors: Array2<f64>,
}

/// Decompose the symmetric tridiagonal matrix with the given `diagonal`
/// (length n) and `off_diagonal` (length n-1).
pub fn symmetric_tridiagonal_eigen(diagonal: &[f64], off_diagonal: &[f64]) -> Result<TridiagonalEigen> {
    let n = diagonal.len();
    if n == 0 {
        return Err(Error::InvalidParameter("empty tridiagonal matrix".into()));
    }
    if off_diagonal.len() + 1 != n {
        return Err(Error::DimensionMismatch { expected: n - 1, got: off_diagonal.len() });
    }

    let mut d = diagonal.to_vec();
    // Working copy padded with a trailing zero, as the sweep below reads e[m].
    let mut e = Vec::with_capacity(n);
    e.extend_from_slice(off_diagonal);
    e.push(0.0);
    let mut z = Array2::<f64>::eye(n);

    for l in 0..n {
        let mut iterations = 0;
        loop {
            // Find the first negligible off-diagonal element at or past l.
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > 60 {
                return Err(Error::ConvergenceFailure(format!(
                    "QL sweep for eigenvalue {l} of a {n}x{n} tridiagonal matrix"
                )));
            }

            // Wilkinson-style shift from the leading 2x2 block.
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0f64, 1.0f64);
            let mut p = 0.0f64;

            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    // Rotation annihilated prematurely: restart the sweep.
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    f = z[(k, i + 1)];
                    z[(k, i + 1)] = s * z[(k, i)] + c * f;
                    z[(k, i)] = c * z[(k, i)] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    // Sort ascending, permuting eigenvector columns alongside.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values: Vec<f64> = order.iter().map(|&j| d[j]).collect();
    let mut vectors = Array2::<f64>::zeros((n, n));
    for (col, &j) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, col)] = z[(k, j)];
        }
    }
    Ok(TridiagonalEigen { values, vectors })
}

/// Tridiagonal generator: `diag[k]` acts on `x_k`, `sub[k]` couples `x_k`
/// into `x_{k+1}`, and `sup[k]` couples `x_{k+1}` into `x_k` (both
/// off-diagonals are one shorter than `diag`).
///
/// Each step evaluates the Taylor series of `exp(h M) x` with the step
/// chosen so `h * ||M||_1 <= 1`. Birth-death generators have nonnegative
/// off-diagonals, so in that regime the series has no destructive hump
/// (partial sums stay within a factor `e` of the result), terms decay
/// factorially after the first few, and the summation is exact to machine
/// rounding. Unlike an explicit adaptive integrator, there is no stability
/// boundary for the step controller to wander across once the transient
/// has died away.
#[derive(Debug, Clone)]
pub struct TridiagonalSystem {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
}

impl TridiagonalSystem {
    pub fn new(sub: Vec<f64>, diag: Vec<f64>, sup: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::InvalidParameter("empty tridiagonal system".into()));
        }
        if sub.len() + 1 != diag.len() {
            return Err(Error::DimensionMismatch { expected: diag.len() - 1, got: sub.len() });
        }
        if sup.len() + 1 != diag.len() {
            return Err(Error::DimensionMismatch { expected: diag.len() - 1, got: sup.len() });
        }
        for &v in sub.iter().chain(&diag).chain(&sup) {
            crate::error::ensure_finite("tridiagonal coefficient", v)?;
        }
        Ok(TridiagonalSystem { sub, diag, sup })
    }

    pub fn dimension(&self) -> usize {
        self.diag.len()
    }

    /// Column-sum norm; column k feeds rows k-1, k, and k+1.
    fn norm_one(&self) -> f64 {
        let n = self.diag.len();
        (0..n)
            .map(|k| {
                self.diag[k].abs()
                    + if k + 1 < n { self.sub[k].abs() } else { 0.0 }
                    + if k > 0 { self.sup[k - 1].abs() } else { 0.0 }
            })
            .fold(0.0, f64::max)
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.diag.len();
        for k in 0..n {
            let mut v = self.diag[k] * x[k];
            if k > 0 {
                v += self.sub[k - 1] * x[k - 1];
            }
            if k + 1 < n {
                v += self.sup[k] * x[k + 1];
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
            "Taylor series for a tridiagonal step did not terminate".into(),
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
                        "tridiagonal propagation would need {steps:.1e} steps"
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

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Reconstruct T from the decomposition and compare entrywise.
    fn assert_reconstructs(diag: &[f64], off: &[f64], eig: &TridiagonalEigen, tol: f64) {
        let n = diag.len();
        for i in 0..n {
            for j in 0..n {
                let expected = if i == j {
                    diag[i]
                } else if i.abs_diff(j) == 1 {
                    off[i.min(j)]
                } else {
                    0.0
                };
                let mut got = 0.0;
                for k in 0..n {
                    got += eig.vectors[(i, k)] * eig.values[k] * eig.vectors[(j, k)];
                }
                assert!(
                    (got - expected).abs() <= tol,
                    "entry ({i},{j}): {got} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn two_by_two_closed_form() {
        // [[1, 2], [2, 1]] has eigenvalues -1 and 3.
        let eig = symmetric_tridiagonal_eigen(&[1.0, 1.0], &[2.0]).unwrap();
        assert_relative_eq!(eig.values[0], -1.0, max_relative = 1e-14);
        assert_relative_eq!(eig.values[1], 3.0, max_relative = 1e-14);
    }

    #[test]
    fn discrete_laplacian_has_known_spectrum() {
        // Second-difference matrix: eigenvalues 2 - 2 cos(k pi / (n+1)).
        let n = 12;
        let diag = vec![2.0; n];
        let off = vec![-1.0; n - 1];
        let eig = symmetric_tridiagonal_eigen(&diag, &off).unwrap();
        for (k, &v) in eig.values.iter().enumerate() {
            let expected = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos();
            assert_relative_eq!(v, expected, max_relative = 1e-12, epsilon = 1e-12);
        }
        assert_reconstructs(&diag, &off, &eig, 1e-12);
    }

    #[test]
    fn eigenvectors_are_orthonormal() {
        let diag = [0.3, -1.7, 2.2, 0.9, -0.4];
        let off = [1.1, 0.6, -2.0, 0.05];
        let eig = symmetric_tridiagonal_eigen(&diag, &off).unwrap();
        for a in 0..5 {
            for b in 0..5 {
                let dot: f64 = (0..5).map(|k| eig.vectors[(k, a)] * eig.vectors[(k, b)]).sum();
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-13);
            }
        }
        assert_reconstructs(&diag, &off, &eig, 1e-13);
    }

    #[test]
    fn single_entry_matrix() {
        let eig = symmetric_tridiagonal_eigen(&[4.2], &[]).unwrap();
        assert_eq!(eig.values, vec![4.2]);
        assert_eq!(eig.vectors[(0, 0)], 1.0);
    }

    #[test]
    fn zero_off_diagonal_returns_sorted_diagonal() {
        let eig = symmetric_tridiagonal_eigen(&[3.0, 1.0, 2.0], &[0.0, 0.0]).unwrap();
        assert_eq!(eig.values, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn propagated_exchange_matches_closed_form() {
        // Two levels trading population at rates a (0 -> 1) and b (1 -> 0):
        // x0(t) = b/(a+b) + (x0(0) - b/(a+b)) e^{-(a+b)t}.
        let (a, b) = (0.7, 0.2);
        let sys = TridiagonalSystem::new(vec![a], vec![-a, -b], vec![b]).unwrap();
        let times = [0.3, 1.0, 4.0, 20.0];
        let path = sys.propagate_path(&[1.0, 0.0], &times).unwrap();
        let settled = b / (a + b);
        for (&t, p) in times.iter().zip(&path) {
            let expected = settled + (1.0 - settled) * (-(a + b) * t).exp();
            assert_relative_eq!(p[0], expected, max_relative = 1e-13);
            assert_relative_eq!(p[0] + p[1], 1.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn propagated_chain_conserves_and_settles_uniformly() {
        // Equal hop rates both ways: every column sums to zero and the
        // stationary state is flat across the chain.
        let n = 9;
        let sub = vec![1.0; n - 1];
        let sup = vec![1.0; n - 1];
        let diag: Vec<f64> = (0..n)
            .map(|k| {
                let mut out = 0.0;
                if k > 0 {
                    out -= 1.0;
                }
                if k + 1 < n {
                    out -= 1.0;
                }
                out
            })
            .collect();
        let sys = TridiagonalSystem::new(sub, diag, sup).unwrap();
        let mut x0 = vec![0.0; n];
        x0[0] = 1.0;
        let path = sys.propagate_path(&x0, &[0.05, 0.5, 5.0, 200.0]).unwrap();
        for p in &path {
            let total: f64 = p.iter().sum();
            assert_relative_eq!(total, 1.0, max_relative = 1e-12);
            assert!(p.iter().all(|&v| v >= -1e-15));
        }
        for &v in path.last().unwrap() {
            assert_relative_eq!(v, 1.0 / n as f64, max_relative = 1e-9);
        }
    }

    #[test]
    fn propagation_agrees_with_the_eigensolver() {
        // A birth-death generator with positive off-diagonals symmetrizes
        // under the diagonal scaling d_{k+1} = d_k sqrt(sup_k / sub_k), so
        // exp(M t) x can be assembled independently from this module's own
        // eigendecomposition and compared against the stepped Taylor path.
        let n = 7;
        let sub: Vec<f64> = (0..n - 1).map(|k| 0.4 + 0.2 * k as f64).collect();
        let sup: Vec<f64> = (0..n - 1).map(|k| 1.3 - 0.1 * k as f64).collect();
        let diag: Vec<f64> = (0..n)
            .map(|k| {
                let down = if k > 0 { sup[k - 1] } else { 0.0 };
                let up = if k + 1 < n { sub[k] } else { 0.0 };
                -(down + up) - 0.05 * k as f64
            })
            .collect();

        let mut d = vec![1.0f64; n];
        for k in 0..n - 1 {
            d[k + 1] = d[k] * (sup[k] / sub[k]).sqrt();
        }
        let symmetric_off: Vec<f64> =
            (0..n - 1).map(|k| (sup[k] * sub[k]).sqrt()).collect();
        let eig = symmetric_tridiagonal_eigen(&diag, &symmetric_off).unwrap();

        let x0: Vec<f64> = (0..n).map(|k| 1.0 / (k + 1) as f64).collect();
        let times = [0.2, 1.7, 6.0];
        let sys = TridiagonalSystem::new(sub, diag, sup).unwrap();
        let path = sys.propagate_path(&x0, &times).unwrap();

        let y0: Vec<f64> = (0..n).map(|k| d[k] * x0[k]).collect();
        for (&t, p) in times.iter().zip(&path) {
            for i in 0..n {
                let mut y = 0.0;
                for j in 0..n {
                    let overlap: f64 =
                        (0..n).map(|k| eig.vectors[(k, j)] * y0[k]).sum();
                    y += eig.vectors[(i, j)] * (eig.values[j] * t).exp() * overlap;
                }
                let expected = y / d[i];
                assert!(
                    (p[i] - expected).abs() <= 1e-11 * expected.abs().max(1.0),
                    "level {i} at t={t}: {} vs {expected}",
                    p[i]
                );
            }
        }
    }

    #[test]
    fn propagation_rejects_mismatched_couplings() {
        assert!(TridiagonalSystem::new(vec![1.0], vec![-1.0, -1.0, -1.0], vec![1.0, 1.0]).is_err());
        let sys = TridiagonalSystem::new(vec![0.5], vec![-0.5, -0.5], vec![0.5]).unwrap();
        assert!(matches!(sys.propagate_path(&[1.0, 0.0], &[1.0, 0.5]), Err(Error::UnsortedTimes)));
    }
}
