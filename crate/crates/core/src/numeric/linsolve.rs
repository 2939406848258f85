//! Dense linear solves by Gaussian elimination with partial pivoting.
//!
//! Sized for the stationary-state systems that arise here (hundreds of rows
//! at most), where an explicit elimination is both fast enough and easy to
//! audit.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Solve `A x = b` for a square dense `A`.
pub fn solve_dense(a: &Array2<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }

    // Augmented working copy [A | b].
    let mut m = Array2::<f64>::zeros((n, n + 1));
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = a[(i, j)];
        }
        m[(i, n)] = b[i];
    }

    for col in 0..n {
        // Partial pivot: largest magnitude in this column at or below the diagonal.
        let pivot_row = (col..n)
            .max_by(|&r1, &r2| m[(r1, col)].abs().total_cmp(&m[(r2, col)].abs()))
            .expect("non-empty row range");
        let pivot = m[(pivot_row, col)];
        if pivot.abs() < f64::EPSILON * scale_of(&m, col, n) {
            return Err(Error::SingularSystem { pivot: pivot.abs(), column: col });
        }
        if pivot_row != col {
            for j in col..=n {
                m.swap((col, j), (pivot_row, j));
            }
        }
        for row in col + 1..n {
            let factor = m[(row, col)] / pivot;
            if factor == 0.0 {
                continue;
            }
            m[(row, col)] = 0.0;
            for j in col + 1..=n {
                let delta = factor * m[(col, j)];
                m[(row, j)] -= delta;
            }
        }
    }

    // Back substitution.
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = m[(row, n)];
        for j in row + 1..n {
            acc -= m[(row, j)] * x[j];
        }
        x[row] = acc / m[(row, row)];
    }
    Ok(x)
}

// Magnitude scale of the remaining block, for a relative singularity test.
fn scale_of(m: &Array2<f64>, col: usize, n: usize) -> f64 {
    let mut s = 0.0f64;
    for i in col..n {
        for j in col..n {
            s = s.max(m[(i, j)].abs());
        }
    }
    s.max(1e-300)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn solves_a_system_with_known_answer() {
        let a = array![[2.0, 1.0, -1.0], [-3.0, -1.0, 2.0], [-2.0, 1.0, 2.0]];
        let b = [8.0, -11.0, -3.0];
        let x = solve_dense(&a, &b).unwrap();
        assert_relative_eq!(x[0], 2.0, max_relative = 1e-13);
        assert_relative_eq!(x[1], 3.0, max_relative = 1e-13);
        assert_relative_eq!(x[2], -1.0, max_relative = 1e-13);
    }

    #[test]
    fn pivoting_handles_zero_on_diagonal() {
        let a = array![[0.0, 1.0], [1.0, 0.0]];
        let x = solve_dense(&a, &[3.0, 7.0]).unwrap();
        assert_eq!(x, vec![7.0, 3.0]);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = array![[1.0, 2.0], [2.0, 4.0]];
        assert!(matches!(solve_dense(&a, &[1.0, 2.0]), Err(Error::SingularSystem { .. })));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let a = array![[1.0, 0.0], [0.0, 1.0]];
        assert!(matches!(solve_dense(&a, &[1.0]), Err(Error::DimensionMismatch { .. })));
    }
}
