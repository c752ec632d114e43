//! Image recovery from bucket records.
//!
//! Three estimates are produced per stripe: standard correlation GI over
//! whatever patterns were projected, carved GI (a least-squares solve for the
//! pixels that survived carving) and carved GI with the dropped masks forced to zero.

mod solve;
mod ssim;

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::carve::{BucketRecord, CarveState};
use crate::detector::CalibrationCurve;
use crate::pattern::{PatternMatrix, ScanPlan};

pub use solve::{least_squares, LeastSquares, SolveError};
pub use ssim::{ssim, DYNAMIC_RANGE, K1, K2, WINDOW_RADIUS, WINDOW_SIGMA};

/// Default bound on the Frobenius condition number of the carved system.
pub const MAX_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReconstructError {
    #[error("invalid input: {0}")]
    Input(&'static str),
    #[error("{len} values do not fill a {width}x{height} image")]
    Size { width: usize, height: usize, len: usize },
    #[error("image is {got:?}, expected {expected:?}")]
    Dimensions { expected: (usize, usize), got: (usize, usize) },
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("stripe {index}: {source}")]
    Stripe { index: usize, source: Box<ReconstructError> },
    #[error("no estimate for stripes {gaps:?}")]
    Assembly { gaps: Vec<usize> },
    #[error("bucket for column {0} is missing")]
    MissingBucket(usize),
}

/// Row-major grayscale image, pixel `(x, y)` at `y * width + x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl SceneImage {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, ReconstructError> {
        if values.len() != width * height {
            return Err(ReconstructError::Size { width, height, len: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ReconstructError::Input("non-finite pixel value"));
        }
        Ok(Self { width, height, values })
    }

    pub fn from_binary(width: usize, height: usize, bits: &[u8]) -> Result<Self, ReconstructError> {
        Self::new(width, height, bits.iter().map(|&b| f64::from(u8::from(b != 0))).collect())
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Pixels at or above `level` become 1.
    pub fn binarize(&self, level: f64) -> Vec<u8> {
        self.values.iter().map(|&v| u8::from(v >= level)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Gi,
    Cgi,
    CgiMask,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Gi, Method::Cgi, Method::CgiMask];

    pub fn label(self) -> &'static str {
        match self {
            Method::Gi => "gi",
            Method::Cgi => "cgi",
            Method::CgiMask => "cgi-mask",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub image: SceneImage,
    pub method: Method,
    /// Against the ground truth, when one is known.
    pub ssim: Option<f64>,
    pub patterns_used: usize,
    /// Seconds.
    pub simulated_time: f64,
}

/// Raw correlation `sum_n (a_n - baseline) P_n / K`.
pub fn gi_correlation(
    buckets: &[f64],
    patterns: &[Vec<u8>],
    baseline: f64,
) -> Result<Vec<f64>, ReconstructError> {
    if buckets.len() != patterns.len() {
        return Err(ReconstructError::Input("bucket and pattern counts differ"));
    }
    let Some(len) = patterns.first().map(Vec::len) else {
        return Err(ReconstructError::Input("no patterns"));
    };
    if patterns.iter().any(|p| p.len() != len) {
        return Err(ReconstructError::Input("patterns differ in length"));
    }
    let mut acc = vec![0.0; len];
    for (a, p) in buckets.iter().zip(patterns) {
        let w = a - baseline;
        for (v, &bit) in acc.iter_mut().zip(p) {
            *v += w * f64::from(bit);
        }
    }
    let k = buckets.len() as f64;
    acc.iter_mut().for_each(|v| *v /= k);
    Ok(acc)
}

/// Rescales to `[0, 1]`; a flat input maps to zeros.
pub fn normalize_min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - lo) / span).collect()
}

/// Standard GI: baseline-subtracted correlation, min–max normalized.
pub fn standard_gi(
    buckets: &[f64],
    patterns: &[Vec<u8>],
    baseline: f64,
) -> Result<Vec<f64>, ReconstructError> {
    gi_correlation(buckets, patterns, baseline).map(|c| normalize_min_max(&c))
}

/// Bucket energies → pattern/object overlap counts through the calibration
/// inverse. Exact when the bias level is zero, which is what [`calibrate`]
/// produces.
///
/// [`calibrate`]: crate::detector::calibrate
pub fn linearize(energies: &[f64], calib: &CalibrationCurve, stripe_len: usize) -> Vec<f64> {
    let (lo, span) = (calib.bias_level(), calib.span());
    energies
        .iter()
        .map(|&e| (calib.intensity_for(e) - lo) / span * stripe_len as f64)
        .collect()
}

/// Solves `Hc^T x = b` in the least-squares sense for the retained pixels and
/// scatters `x` into a stripe of `stripe_len` zeros.
///
/// `overlaps[j]` is the linearized bucket of carved column `j`.
pub fn carved_gi(
    overlaps: &[f64],
    carved: &PatternMatrix,
    stripe_len: usize,
    max_condition: f64,
) -> Result<Vec<f64>, ReconstructError> {
    if overlaps.len() != carved.cols() {
        return Err(ReconstructError::Input("one bucket per carved column required"));
    }
    if carved.row_ids().iter().any(|&r| r >= stripe_len) {
        return Err(ReconstructError::Input("carved row outside the stripe"));
    }
    let mut out = vec![0.0; stripe_len];
    if carved.rows() == 0 {
        return Ok(out);
    }
    // rows of the system are the carved columns
    let (m, k) = (carved.cols(), carved.rows());
    let mut a = vec![0.0; m * k];
    for j in 0..m {
        for i in 0..k {
            a[j * k + i] = f64::from(carved.get(i, j));
        }
    }
    let ls = least_squares(&a, m, k, overlaps, max_condition)?;
    for (&row, v) in carved.row_ids().iter().zip(ls.solution) {
        out[row] = v;
    }
    Ok(out)
}

/// Least-squares estimate over every recorded bucket, each pattern restricted
/// to the retained pixels. Buckets taken before a carve stay valid because the
/// carved-away pixels are dark, so they overdetermine the carved system.
pub fn pooled_gi(
    state: &CarveState,
    record: &BucketRecord,
    calib: &CalibrationCurve,
    max_condition: f64,
) -> Result<Vec<f64>, ReconstructError> {
    let n = state.stripe_len();
    let rows = state.current().row_ids();
    let mut out = vec![0.0; n];
    if rows.is_empty() {
        return Ok(out);
    }
    let k = rows.len();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for e in &record.entries {
        if e.pattern.len() != n {
            return Err(ReconstructError::Input("recorded pattern length differs from stripe"));
        }
        let restricted: Vec<f64> = rows.iter().map(|&r| f64::from(e.pattern[r])).collect();
        if restricted.iter().all(|&v| v == 0.0) {
            continue;
        }
        a.extend(restricted);
        b.push(e.energy);
    }
    let b = linearize(&b, calib, n);
    let x = least_squares(&a, b.len(), k, &b, max_condition)?.solution;
    for (&row, v) in rows.iter().zip(x) {
        out[row] = v;
    }
    Ok(out)
}

/// Zeroes every pixel covered by any mask.
pub fn apply_zero_masks(estimate: &[f64], masks: &[Vec<u8>]) -> Vec<f64> {
    estimate
        .iter()
        .enumerate()
        .map(|(i, &v)| if masks.iter().any(|m| m.get(i).is_some_and(|&b| b != 0)) { 0.0 } else { v })
        .collect()
}

/// Places stripe estimates into the scene, clamped to `[0, 1]`.
pub fn assemble(stripes: &[Option<Vec<f64>>], plan: &ScanPlan) -> Result<SceneImage, ReconstructError> {
    if stripes.len() != plan.segment_count() {
        return Err(ReconstructError::Input("stripe count does not match the plan"));
    }
    let gaps: Vec<usize> = stripes.iter().enumerate().filter(|(_, s)| s.is_none()).map(|(i, _)| i).collect();
    if !gaps.is_empty() {
        return Err(ReconstructError::Assembly { gaps });
    }
    let mut values = vec![0.0; plan.width * plan.height];
    for (index, est) in stripes.iter().flatten().enumerate() {
        let pixels = plan.stripe(index);
        if est.len() != pixels.len() {
            return Err(ReconstructError::Stripe {
                index,
                source: Box::new(ReconstructError::Input("estimate length differs from stripe")),
            });
        }
        for (&p, &v) in pixels.iter().zip(est) {
            values[p] = v.clamp(0.0, 1.0);
        }
    }
    SceneImage::new(plan.width, plan.height, values)
}

/// Carved estimate of one finished stripe, solved over all its buckets (see
/// [`pooled_gi`]).
///
/// A stripe declared empty after its all-ones probe only has one bucket; its
/// minimum-norm solution spreads that bucket evenly over the stripe, and the
/// masked variant zeroes it.
pub fn reconstruct_carved(
    state: &CarveState,
    record: &BucketRecord,
    calib: &CalibrationCurve,
    masked: bool,
    max_condition: f64,
) -> Result<Vec<f64>, ReconstructError> {
    let n = state.stripe_len();
    let est = if state.is_empty_stripe() {
        let first = record.entries.first().ok_or(ReconstructError::MissingBucket(0))?;
        let total = linearize(&[first.energy], calib, n)[0];
        let lit = first.pattern.iter().filter(|&&b| b != 0).count().max(1);
        first.pattern.iter().map(|&b| if b != 0 { total / lit as f64 } else { 0.0 }).collect()
    } else {
        if let Some(&id) = state.current().column_ids().iter().find(|&&id| record.get(id).is_none()) {
            return Err(ReconstructError::MissingBucket(id));
        }
        pooled_gi(state, record, calib, max_condition)?
    };
    Ok(if masked { apply_zero_masks(&est, state.dropped_masks()) } else { est })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::{binarize, hadamard, make_scan_plan};

    #[test]
    fn gi_of_equal_baseline_buckets_is_flat() {
        let h = binarize(&hadamard(3).unwrap());
        let patterns: Vec<Vec<u8>> = (0..8).map(|c| h.column(c)).collect();
        let gi = standard_gi(&[1.0; 8], &patterns, 1.0).unwrap();
        assert!(gi.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gi_one_hot_peaks_on_the_pixel() {
        let h = binarize(&hadamard(3).unwrap());
        let patterns: Vec<Vec<u8>> = (0..8).map(|c| h.column(c)).collect();
        let hot = 5;
        let buckets: Vec<f64> = patterns.iter().map(|p| f64::from(p[hot])).collect();
        let gi = standard_gi(&buckets, &patterns, 0.0).unwrap();
        assert_eq!(gi[hot], 1.0);
        assert!(gi.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn carved_solution_scatters_into_rows() {
        // rows {5,7} with columns {0,2}: [[1,1],[1,0]]
        let full = binarize(&hadamard(3).unwrap());
        let carved = full.select_rows(&[5, 7]).select_columns(&[0, 2]);
        assert_eq!(carved.row_ids(), &[5, 7]);
        let object = [0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0];
        let overlaps: Vec<f64> = (0..carved.cols())
            .map(|j| carved.row_ids().iter().enumerate().map(|(i, &r)| object[r] * f64::from(carved.get(i, j))).sum())
            .collect();
        let est = carved_gi(&overlaps, &carved, 8, MAX_CONDITION).unwrap();
        for (a, b) in est.iter().zip(object) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn carved_gi_guards_condition() {
        let full = binarize(&hadamard(2).unwrap());
        // column 0 is all ones, and rows 0 and 2 agree on columns {0, 1}
        let bad = full.select_rows(&[0, 2]).select_columns(&[0, 1]);
        let err = carved_gi(&[1.0, 1.0], &bad, 4, MAX_CONDITION).unwrap_err();
        assert!(matches!(err, ReconstructError::Solve(SolveError::IllConditioned { .. })));
    }

    #[test]
    fn masks_zero_only_covered_pixels() {
        let est = [0.3, 0.4, 0.5, 0.6];
        let out = apply_zero_masks(&est, &[vec![1, 0, 0, 0], vec![0, 0, 1, 0]]);
        assert_eq!(out, vec![0.0, 0.4, 0.0, 0.6]);
    }

    #[test]
    fn assemble_reports_gaps() {
        let plan = make_scan_plan(4, 4).unwrap();
        let mut stripes = vec![Some(vec![0.5; 4]); 4];
        stripes[1] = None;
        stripes[3] = None;
        assert_eq!(assemble(&stripes, &plan), Err(ReconstructError::Assembly { gaps: vec![1, 3] }));
    }

    #[test]
    fn assemble_places_stripes_as_columns() {
        let plan = make_scan_plan(4, 2).unwrap();
        let stripes: Vec<Option<Vec<f64>>> = (0..4).map(|x| Some(vec![x as f64 / 4.0, 2.0])).collect();
        let img = assemble(&stripes, &plan).unwrap();
        for x in 0..4 {
            assert_eq!(img.get(x, 0), x as f64 / 4.0);
            assert_eq!(img.get(x, 1), 1.0);
        }
    }

    #[test]
    fn scene_image_size_checked() {
        assert!(matches!(SceneImage::new(3, 3, vec![0.0; 8]), Err(ReconstructError::Size { .. })));
    }
}
