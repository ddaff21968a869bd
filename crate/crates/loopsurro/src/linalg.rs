//! Dense LU factorization with scaled partial pivoting.

use crate::matrix::Matrix;

/// Relative pivot threshold: a pivot smaller than this times the row scale
/// is treated as zero.
const PIVOT_TOL: f64 = 1e-14;

/// Solves `a * x = b` in place via LU with partial pivoting.
///
/// Returns `None` when the matrix is numerically singular (best pivot below
/// `1e-14` times the row scale) or when any row is identically zero.
pub fn lu_solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.rows();
    debug_assert_eq!(a.cols(), n);
    debug_assert_eq!(b.len(), n);

    // Column-major working copy.
    let mut lu = a.data().to_vec();
    let mut perm: Vec<usize> = (0..n).collect();

    // Row scales from the original matrix.
    let mut scale = vec![0.0f64; n];
    for j in 0..n {
        for i in 0..n {
            let v = lu[j * n + i].abs();
            if v > scale[i] {
                scale[i] = v;
            }
        }
    }
    if scale.iter().any(|&s| s == 0.0 || !s.is_finite()) {
        return None;
    }

    for k in 0..n {
        // Pick the pivot row by scaled magnitude.
        let mut pivot_row = k;
        let mut pivot_mag = lu[k * n + perm[k]].abs() / scale[perm[k]];
        for i in (k + 1)..n {
            let mag = lu[k * n + perm[i]].abs() / scale[perm[i]];
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = i;
            }
        }
        if !(pivot_mag > PIVOT_TOL) {
            return None;
        }
        perm.swap(k, pivot_row);

        let pk = perm[k];
        let pivot = lu[k * n + pk];
        for i in (k + 1)..n {
            let pi = perm[i];
            let factor = lu[k * n + pi] / pivot;
            lu[k * n + pi] = factor;
            for j in (k + 1)..n {
                lu[j * n + pi] -= factor * lu[j * n + pk];
            }
        }
    }

    // Forward substitution with the permuted right-hand side.
    let mut y = vec![0.0f64; n];
    for k in 0..n {
        let mut acc = b[perm[k]];
        for j in 0..k {
            acc -= lu[j * n + perm[k]] * y[j];
        }
        y[k] = acc;
    }
    // Back substitution.
    let mut x = vec![0.0f64; n];
    for k in (0..n).rev() {
        let mut acc = y[k];
        for j in (k + 1)..n {
            acc -= lu[j * n + perm[k]] * x[j];
        }
        x[k] = acc / lu[k * n + perm[k]];
    }
    Some(x)
}
