use std::collections::BTreeSet;
use std::convert::Infallible;

use ghostcarve_core::reconstruct::{reconstruct_carved, MAX_CONDITION};
use ghostcarve_core::{
    adaptive_acquire, calibrate, zero_threshold, CalibrationConfig, CalibrationCurve, Detector,
    ResponseModel, SimulatedDetector,
};
use proptest::prelude::*;

/// Exact pattern/object inner product.
struct Overlap(Vec<u8>);

impl Detector for Overlap {
    type Error = Infallible;
    fn measure(&mut self, _: usize, pattern: &[u8]) -> Result<f64, Infallible> {
        Ok(pattern.iter().zip(&self.0).map(|(&p, &o)| f64::from(p & o)).sum())
    }
}

fn bits(v: u32, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((v >> i) & 1) as u8).collect()
}

fn lit(row: usize, col: usize) -> bool {
    (row & col).count_ones() % 2 == 0
}

/// Rank by floating-point elimination with partial pivoting.
fn float_rank(rows: &[usize], cols: &[usize]) -> usize {
    let mut m: Vec<Vec<f64>> = rows
        .iter()
        .map(|&r| cols.iter().map(|&c| if lit(r, c) { 1.0 } else { 0.0 }).collect())
        .collect();
    let (h, w) = (m.len(), cols.len());
    let mut rank = 0;
    for c in 0..w {
        let Some(p) = (rank..h).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())) else { break };
        if m[p][c].abs() < 1e-9 {
            continue;
        }
        m.swap(rank, p);
        for r in 0..h {
            if r != rank {
                let f = m[r][c] / m[rank][c];
                for k in c..w {
                    m[r][k] -= f * m[rank][k];
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Offline carve trace for a known object: which columns get projected.
fn oracle_trace(object: &[u8]) -> Vec<usize> {
    let n = object.len();
    let mut rows: Vec<usize> = (0..n).collect();
    let mut cols: Vec<usize> = (0..n).collect();
    let mut done = BTreeSet::new();
    let mut order = Vec::new();
    while let Some(c) = cols.iter().copied().filter(|c| !done.contains(c)).min() {
        done.insert(c);
        order.push(c);
        let lit_rows: Vec<usize> = rows.iter().copied().filter(|&r| lit(r, c)).collect();
        if lit_rows.iter().any(|&r| object[r] == 1) {
            continue;
        }
        if lit_rows.len() == rows.len() {
            break;
        }
        rows.retain(|&r| !lit(r, c));
        let mut keep: Vec<usize> = Vec::new();
        for &cand in &cols {
            let mut trial = keep.clone();
            trial.push(cand);
            if float_rank(&rows, &trial) > keep.len() {
                keep.push(cand);
            }
        }
        cols = keep;
    }
    order
}

fn six_hz() -> (ResponseModel, CalibrationCurve) {
    let model = ResponseModel::default();
    let calib = calibrate(&model, None, &CalibrationConfig::new(6.0)).unwrap();
    (model, calib)
}

#[test]
fn masks_never_cover_the_object_exhaustive_n8() {
    for v in 0..256u32 {
        let object = bits(v, 8);
        let (state, _) = adaptive_acquire(&mut Overlap(object.clone()), 8, 0.5).unwrap();
        for (i, &m) in state.zero_mask().iter().enumerate() {
            assert!(!(m == 1 && object[i] == 1), "object {v:08b} pixel {i}");
        }
    }
}

#[test]
fn buckets_equal_carved_inner_products_exhaustive_n8() {
    for v in 0..256u32 {
        let object = bits(v, 8);
        let (state, record) = adaptive_acquire(&mut Overlap(object.clone()), 8, 0.5).unwrap();
        if state.is_empty_stripe() {
            continue;
        }
        let carved = state.current();
        for (j, &id) in carved.column_ids().iter().enumerate() {
            let want: u32 = (0..carved.rows())
                .map(|i| u32::from(carved.get(i, j) & object[carved.row_ids()[i]]))
                .sum();
            assert_eq!(record.get(id).unwrap().energy, f64::from(want), "object {v:08b} column {id}");
        }
    }
}

#[test]
fn projection_order_matches_oracle_exhaustive_n8() {
    for v in 0..256u32 {
        let object = bits(v, 8);
        let (_, record) = adaptive_acquire(&mut Overlap(object.clone()), 8, 0.5).unwrap();
        let got: Vec<usize> = record.entries.iter().map(|e| e.column_id).collect();
        assert_eq!(got, oracle_trace(&object), "object {v:08b}");
    }
}

#[test]
fn every_carve_halves_the_rank_exhaustive_n8() {
    for v in 1..256u32 {
        let object = bits(v, 8);
        let (state, _) = adaptive_acquire(&mut Overlap(object), 8, 0.5).unwrap();
        let carved = state.current();
        let expected = 8 >> state.carve_depth();
        assert_eq!(carved.rows(), expected, "object {v:08b}");
        assert_eq!(carved.cols(), expected);
        assert_eq!(float_rank(carved.row_ids(), carved.column_ids()), expected);
    }
}

#[test]
fn noiseless_simulated_pipeline_is_exact_exhaustive_n8() {
    let (model, calib) = six_hz();
    let threshold = zero_threshold(model.mu0).unwrap();
    for v in 0..256u32 {
        let object = bits(v, 8);
        let mut det = SimulatedDetector::new(object.clone(), model.clone(), None, calib.clone());
        let (state, record) = adaptive_acquire(&mut det, 8, threshold).unwrap();
        let est = reconstruct_carved(&state, &record, &calib, true, MAX_CONDITION).unwrap();
        let bin: Vec<u8> = est.iter().map(|&x| u8::from(x >= 0.5)).collect();
        assert_eq!(bin, object, "object {v:08b}");
        let got: Vec<usize> = record.entries.iter().map(|e| e.column_id).collect();
        assert_eq!(got, oracle_trace(&object));
    }
}

#[test]
fn empty_stripe_costs_at_most_log_n_plus_one() {
    for n in [2usize, 4, 8, 16, 32] {
        let (_, record) = adaptive_acquire(&mut Overlap(vec![0; n]), n, 0.5).unwrap();
        assert!(record.len() <= n.trailing_zeros() as usize + 1);
    }
}

#[test]
fn full_stripe_never_carves() {
    let (state, record) = adaptive_acquire(&mut Overlap(vec![1; 16]), 16, 0.5).unwrap();
    assert_eq!(state.carve_depth(), 0);
    assert_eq!(record.len(), 16);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn n16_invariants(v in any::<u16>()) {
        let object = bits(u32::from(v), 16);
        let (state, record) = adaptive_acquire(&mut Overlap(object.clone()), 16, 0.5).unwrap();
        let mask = state.zero_mask();
        prop_assert!(mask.iter().zip(&object).all(|(&m, &o)| !(m == 1 && o == 1)));
        let got: Vec<usize> = record.entries.iter().map(|e| e.column_id).collect();
        prop_assert_eq!(got, oracle_trace(&object));
        if !state.is_empty_stripe() {
            prop_assert_eq!(state.current().rows(), 16 >> state.carve_depth());
        }
        let ids: BTreeSet<usize> = record.entries.iter().map(|e| e.column_id).collect();
        prop_assert_eq!(ids.len(), record.len());
    }

    #[test]
    fn acquisition_is_deterministic(v in any::<u16>()) {
        let object = bits(u32::from(v), 16);
        let a = adaptive_acquire(&mut Overlap(object.clone()), 16, 0.5).unwrap();
        let b = adaptive_acquire(&mut Overlap(object), 16, 0.5).unwrap();
        prop_assert_eq!(a, b);
    }
}
