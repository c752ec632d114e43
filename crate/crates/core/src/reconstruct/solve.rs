//! Householder QR least squares with a condition-number guard.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("system is {rows}x{cols}; need rows >= cols > 0")]
    Shape { rows: usize, cols: usize },
    #[error("right-hand side has {got} entries, expected {expected}")]
    Rhs { expected: usize, got: usize },
    #[error("condition number {condition:e} exceeds bound {bound:e}")]
    IllConditioned { condition: f64, bound: f64 },
}

/// Solution of `min ||A x - b||` together with the Frobenius condition
/// number `||R||_F ||R^-1||_F` of the triangular factor, which equals that of
/// `A` and bounds its 2-norm condition from above.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub solution: Vec<f64>,
    pub condition: f64,
}

/// `a` is row-major `rows × cols`.
pub fn least_squares(
    a: &[f64],
    rows: usize,
    cols: usize,
    b: &[f64],
    max_condition: f64,
) -> Result<LeastSquares, SolveError> {
    if cols == 0 || rows < cols || a.len() != rows * cols {
        return Err(SolveError::Shape { rows, cols });
    }
    if b.len() != rows {
        return Err(SolveError::Rhs { expected: rows, got: b.len() });
    }
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    let at = |r: usize, c: usize| r * cols + c;

    for k in 0..cols {
        let norm = libm::sqrt((k..rows).map(|r| m[at(r, k)] * m[at(r, k)]).sum::<f64>());
        if norm == 0.0 {
            continue;
        }
        let alpha = if m[at(k, k)] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..rows).map(|r| m[at(r, k)]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for c in k..cols {
            let dot: f64 = (k..rows).map(|r| v[r - k] * m[at(r, c)]).sum();
            let f = 2.0 * dot / vnorm2;
            for r in k..rows {
                m[at(r, c)] -= f * v[r - k];
            }
        }
        let dot: f64 = (k..rows).map(|r| v[r - k] * rhs[r]).sum();
        let f = 2.0 * dot / vnorm2;
        for r in k..rows {
            rhs[r] -= f * v[r - k];
        }
    }

    let r_at = |r: usize, c: usize| m[at(r, c)];
    let condition = frobenius_condition(&r_at, cols);
    if !(condition <= max_condition) {
        return Err(SolveError::IllConditioned { condition, bound: max_condition });
    }
    let mut x = vec![0.0; cols];
    for i in (0..cols).rev() {
        let s: f64 = ((i + 1)..cols).map(|j| r_at(i, j) * x[j]).sum();
        x[i] = (rhs[i] - s) / r_at(i, i);
    }
    Ok(LeastSquares { solution: x, condition })
}

fn frobenius_condition(r: &dyn Fn(usize, usize) -> f64, n: usize) -> f64 {
    if (0..n).any(|i| r(i, i) == 0.0) {
        return f64::INFINITY;
    }
    let norm_r: f64 = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).map(|(i, j)| r(i, j) * r(i, j)).sum();
    // columns of R^-1 by back substitution against unit vectors
    let mut norm_inv = 0.0;
    let mut col = vec![0.0; n];
    for e in 0..n {
        col.iter_mut().for_each(|v| *v = 0.0);
        for i in (0..=e).rev() {
            let target = if i == e { 1.0 } else { 0.0 };
            let s: f64 = ((i + 1)..=e).map(|j| r(i, j) * col[j]).sum();
            col[i] = (target - s) / r(i, i);
        }
        norm_inv += col.iter().map(|v| v * v).sum::<f64>();
    }
    libm::sqrt(norm_r) * libm::sqrt(norm_inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_system() {
        // [2 1; 1 3] x = [3; 5] -> x = [0.8, 1.4]
        let s = least_squares(&[2.0, 1.0, 1.0, 3.0], 2, 2, &[3.0, 5.0], 1e12).unwrap();
        assert!((s.solution[0] - 0.8).abs() < 1e-12);
        assert!((s.solution[1] - 1.4).abs() < 1e-12);
    }

    #[test]
    fn overdetermined_fit() {
        // y = 1 + 2t sampled without noise
        let a = [1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0];
        let b = [1.0, 3.0, 5.0, 7.0];
        let s = least_squares(&a, 4, 2, &b, 1e12).unwrap();
        assert!((s.solution[0] - 1.0).abs() < 1e-12 && (s.solution[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn identity_condition_is_dimension() {
        let s = least_squares(&[1.0, 0.0, 0.0, 1.0], 2, 2, &[1.0, 1.0], 10.0).unwrap();
        assert!((s.condition - 2.0).abs() < 1e-12);
    }

    #[test]
    fn singular_rejected() {
        let err = least_squares(&[1.0, 2.0, 2.0, 4.0], 2, 2, &[1.0, 2.0], 1e12).unwrap_err();
        assert!(matches!(err, SolveError::IllConditioned { .. }));
        let err = least_squares(&[1.0, 1.0, 1.0, 1.0 + 1e-13], 2, 2, &[1.0, 2.0], 1e8).unwrap_err();
        assert!(matches!(err, SolveError::IllConditioned { .. }));
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(least_squares(&[1.0, 2.0], 1, 2, &[1.0], 1e3), Err(SolveError::Shape { .. })));
        assert!(matches!(least_squares(&[1.0], 1, 1, &[1.0, 2.0], 1e3), Err(SolveError::Rhs { .. })));
    }
}
