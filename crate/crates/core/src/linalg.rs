//! Dense helpers for the small symmetric positive-definite systems of the
//! linear-bandit posterior. Matrices are row-major `d × d` slices.

/// Cholesky factor `L` (lower, row-major) of an SPD matrix, or `None` if a
/// pivot is not positive.
pub fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    cholesky_into(a, d, &mut l).then_some(l)
}

/// [`cholesky`] into a caller-provided `d × d` buffer; `false` if not SPD.
pub fn cholesky_into(a: &[f64], d: usize, l: &mut [f64]) -> bool {
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if s <= 0.0 {
                    return false;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    true
}

/// Solves `L y = b` in place.
pub fn forward_solve(l: &[f64], d: usize, b: &mut [f64]) {
    for i in 0..d {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * d + k] * b[k];
        }
        b[i] = s / l[i * d + i];
    }
}

/// Solves `Lᵀ x = b` in place.
pub fn backward_solve_transpose(l: &[f64], d: usize, b: &mut [f64]) {
    for i in (0..d).rev() {
        let mut s = b[i];
        for k in i + 1..d {
            s -= l[k * d + i] * b[k];
        }
        b[i] = s / l[i * d + i];
    }
}

/// Solves `L Lᵀ x = b` in place.
pub fn cholesky_solve(l: &[f64], d: usize, b: &mut [f64]) {
    forward_solve(l, d, b);
    backward_solve_transpose(l, d, b);
}
