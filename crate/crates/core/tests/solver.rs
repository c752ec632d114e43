use ghostcarve_core::reconstruct::{carved_gi, least_squares, MAX_CONDITION};
use ghostcarve_core::{binarize, hadamard, PatternMatrix};
use proptest::prelude::*;

/// Gauss–Jordan inverse of a small dense matrix.
fn dense_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
        m.swap(c, p);
        let d = m[c][c];
        assert!(d.abs() > 1e-12, "singular");
        m[c].iter_mut().for_each(|v| *v /= d);
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                for k in 0..2 * n {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

fn forward(h: &PatternMatrix, object: &[f64]) -> Vec<f64> {
    (0..h.cols()).map(|j| (0..h.rows()).map(|i| f64::from(h.get(i, j)) * object[h.row_ids()[i]]).sum()).collect()
}

proptest! {
    #[test]
    fn carved_gi_matches_dense_inverse(order in 1u32..=4, seed in any::<u64>()) {
        let n = 1usize << order;
        let h = binarize(&hadamard(order).unwrap());
        let object: Vec<f64> = (0..n).map(|i| ((seed.rotate_left(i as u32 * 7) % 1000) as f64) / 1000.0).collect();
        let b = forward(&h, &object);
        let got = carved_gi(&b, &h, n, MAX_CONDITION).unwrap();
        // x = (Hᵀ)⁻¹ b
        let ht: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| f64::from(h.get(i, j))).collect()).collect();
        let inv = dense_inverse(&ht);
        for i in 0..n {
            let want: f64 = (0..n).map(|k| inv[i][k] * b[k]).sum();
            prop_assert!((got[i] - want).abs() < 1e-9);
            prop_assert!((got[i] - object[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn least_squares_residual_is_orthogonal(seed in any::<u64>()) {
        let (rows, cols) = (7usize, 3usize);
        let val = |k: u64| ((seed ^ k.wrapping_mul(0x9e37_79b9_7f4a_7c15)) % 997) as f64 / 97.0 - 5.0;
        let mut a: Vec<f64> = (0..rows * cols).map(|k| val(k as u64)).collect();
        // keep it well conditioned
        for i in 0..cols {
            a[i * cols + i] += 20.0;
        }
        let b: Vec<f64> = (0..rows).map(|k| val(100 + k as u64)).collect();
        let x = least_squares(&a, rows, cols, &b, 1e12).unwrap().solution;
        let r: Vec<f64> = (0..rows).map(|i| b[i] - (0..cols).map(|j| a[i * cols + j] * x[j]).sum::<f64>()).collect();
        for j in 0..cols {
            let dot: f64 = (0..rows).map(|i| a[i * cols + j] * r[i]).sum();
            prop_assert!(dot.abs() < 1e-8, "column {} dot {}", j, dot);
        }
    }
}

#[test]
fn uncarved_n4_recovers_object() {
    let h = binarize(&hadamard(2).unwrap());
    let object = [1.0, 0.0, 1.0, 0.0];
    let est = carved_gi(&forward(&h, &object), &h, 4, MAX_CONDITION).unwrap();
    for (a, b) in est.iter().zip(object) {
        assert!((a - b).abs() < 1e-12);
    }
}
