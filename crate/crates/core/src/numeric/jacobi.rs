//! Eigenvalues of dense symmetric and Hermitian matrices by cyclic Jacobi
//! sweeps.
//!
//! Used for positivity margins of density matrices and similar small-matrix
//! diagnostics, so only eigenvalues are accumulated. Hermitian input is
//! handled through the standard real embedding `[[X, -Y], [Y, X]]`, whose
//! spectrum is that of `X + iY` with every eigenvalue doubled.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigenvalues of a real symmetric matrix, ascending.
pub fn symmetric_eigenvalues(matrix: &Array2<f64>) -> Result<Vec<f64>> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: matrix.ncols() });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut a = matrix.clone();

    let frobenius: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if frobenius == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let target = f64::EPSILON * frobenius;

    for _sweep in 0..60 {
        let off: f64 = off_diagonal_norm(&a);
        if off <= target {
            let mut values: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
            values.sort_by(f64::total_cmp);
            return Ok(values);
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= target / (n as f64) {
                    continue;
                }
                // Classic two-sided rotation choosing the smaller angle.
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + theta.hypot(1.0))
                };
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    Err(Error::ConvergenceFailure(format!("Jacobi sweeps on a {n}x{n} symmetric matrix")))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(matrix: &Array2<Complex64>) -> Result<Vec<f64>> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: matrix.ncols() });
    }
    // Embed H = X + iY as the 2n x 2n symmetric matrix [[X, -Y], [Y, X]].
    let mut embedded = Array2::<f64>::zeros((2 * n, 2 * n));
    for i in 0..n {
        for j in 0..n {
            let v = matrix[(i, j)];
            embedded[(i, j)] = v.re;
            embedded[(n + i, n + j)] = v.re;
            embedded[(i, n + j)] = -v.im;
            embedded[(n + i, j)] = v.im;
        }
    }
    let doubled = symmetric_eigenvalues(&embedded)?;
    // Each eigenvalue of H appears twice in the embedding; take every other
    // one of the sorted list to undo the doubling.
    Ok(doubled.into_iter().step_by(2).collect())
}

fn off_diagonal_norm(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[(i, j)] * a[(i, j)];
            }
        }
    }
    sum.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn symmetric_three_by_three() {
        // det(A - x) factors as (2-x)[(3-x)(2-x) - 2], so the spectrum is {1, 2, 4}.
        let a = array![[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]];
        let vals = symmetric_eigenvalues(&a).unwrap();
        assert_relative_eq!(vals[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(vals[1], 2.0, max_relative = 1e-12);
        assert_relative_eq!(vals[2], 4.0, max_relative = 1e-12);
    }

    #[test]
    fn hermitian_pauli_like_matrix() {
        // [[0, -i], [i, 0]] has eigenvalues -1 and 1.
        let a = array![
            [Complex64::new(0.0, 0.0), Complex64::new(0.0, -1.0)],
            [Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0)]
        ];
        let vals = hermitian_eigenvalues(&a).unwrap();
        assert_eq!(vals.len(), 2);
        assert_relative_eq!(vals[0], -1.0, max_relative = 1e-13);
        assert_relative_eq!(vals[1], 1.0, max_relative = 1e-13);
    }

    #[test]
    fn hermitian_rank_one_projector() {
        // |v><v| for normalized v has eigenvalues {1, 0, 0}.
        let inv = 1.0 / 3.0f64.sqrt();
        let v = [
            Complex64::new(inv, 0.0),
            Complex64::new(0.0, inv),
            Complex64::new(-inv, 0.0),
        ];
        let mut a = Array2::<Complex64>::zeros((3, 3));
        for i in 0..3 {
            for j in 0..3 {
                a[(i, j)] = v[i] * v[j].conj();
            }
        }
        let vals = hermitian_eigenvalues(&a).unwrap();
        assert!(vals[0].abs() < 1e-13 && vals[1].abs() < 1e-13);
        assert_relative_eq!(vals[2], 1.0, max_relative = 1e-13);
    }

    #[test]
    fn diagonal_matrix_is_returned_sorted() {
        let a = array![[5.0, 0.0], [0.0, -3.0]];
        assert_eq!(symmetric_eigenvalues(&a).unwrap(), vec![-3.0, 5.0]);
    }
}
