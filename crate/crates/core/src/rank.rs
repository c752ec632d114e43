//! Exact rank of integer matrices.
//!
//! Fraction-free Gaussian elimination: every row operation is a
//! cross-multiplication followed by division by the content (gcd of entries),
//! which is elimination over the rationals without ever leaving the integers.
//! Arithmetic is checked; an overflow is reported rather than producing a
//! wrong rank.

use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum RankError {
    #[error("integer overflow during elimination")]
    Overflow,
    #[error("vector of length {got}, expected {expected}")]
    Length { expected: usize, got: usize },
}

/// Incrementally maintained echelon basis.
///
/// Basis vector `k` is zero at the pivots of all earlier basis vectors, so
/// reducing a candidate against the basis in insertion order clears every
/// pivot.
#[derive(Debug, Clone)]
pub struct RankTracker {
    len: usize,
    basis: Vec<(usize, Vec<i128>)>,
}

impl RankTracker {
    pub fn new(len: usize) -> Self {
        Self { len, basis: Vec::new() }
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Adds `v` to the spanned set; returns `true` iff the rank went up.
    pub fn insert<T: Copy + Into<i128>>(&mut self, v: &[T]) -> Result<bool, RankError> {
        if v.len() != self.len {
            return Err(RankError::Length { expected: self.len, got: v.len() });
        }
        let mut cand: Vec<i128> = v.iter().map(|&x| x.into()).collect();
        for (pivot, b) in &self.basis {
            let vp = cand[*pivot];
            if vp == 0 {
                continue;
            }
            let bp = b[*pivot];
            let g = gcd(bp, vp);
            let (fb, fv) = (bp / g, vp / g);
            for (c, &bk) in cand.iter_mut().zip(b) {
                let lhs = c.checked_mul(fb).ok_or(RankError::Overflow)?;
                let rhs = bk.checked_mul(fv).ok_or(RankError::Overflow)?;
                *c = lhs.checked_sub(rhs).ok_or(RankError::Overflow)?;
            }
            normalize(&mut cand);
        }
        match cand.iter().position(|&x| x != 0) {
            Some(pivot) => {
                self.basis.push((pivot, cand));
                Ok(true)
            }
            None => Ok(false),
        }
    }
}

/// Rank of the column set of a row-major `rows × cols` matrix.
pub fn column_rank<T: Copy + Into<i128>>(
    entries: &[T],
    rows: usize,
    cols: usize,
) -> Result<usize, RankError> {
    if entries.len() != rows * cols {
        return Err(RankError::Length { expected: rows * cols, got: entries.len() });
    }
    let mut tracker = RankTracker::new(rows);
    let mut column = Vec::with_capacity(rows);
    for c in 0..cols {
        column.clear();
        column.extend((0..rows).map(|r| entries[r * cols + c]));
        tracker.insert(&column)?;
        if tracker.rank() == rows {
            break;
        }
    }
    Ok(tracker.rank())
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.unsigned_abs(), b.unsigned_abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    // inputs are never both zero here; the cast is safe for |x| < 2^127
    a as i128
}

fn normalize(v: &mut [i128]) {
    let g = v.iter().fold(0i128, |g, &x| if x == 0 { g } else if g == 0 { x.abs() } else { gcd(g, x) });
    if g > 1 {
        v.iter_mut().for_each(|x| *x /= g);
    }
}
