//! Hadamard matrix carving.
//!
//! A pattern whose bucket value falls below the zero threshold has no overlap
//! with the object, so every pixel it lights is dark. Row carving drops those
//! pixels; column carving then keeps, left to right, only the columns that
//! raise the rank of the reduced matrix. For Sylvester sets each round halves
//! the pixel count and the number of patterns still to project.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pattern::{binarize, hadamard, PatternError, PatternMatrix, MAX_ORDER};
use crate::rank::{RankError, RankTracker};

/// Default ratio of baseline noise to baseline energy used by the threshold.
pub const THRESHOLD_SIGMA_RATIO: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CarveError {
    #[error("baseline energy must be positive, got {0}")]
    Calibration(f64),
    #[error("stripe length {0} is not a supported power of two")]
    StripeLength(usize),
    #[error("column {0} is not part of the current carved matrix")]
    UnknownColumn(usize),
    #[error("trigger column {0} lights no retained pixel")]
    DarkTrigger(usize),
    #[error("trigger column {0} lights every retained pixel")]
    FullTrigger(usize),
    #[error("expected a bucket for column {expected:?}, got column {got}")]
    OutOfOrder { expected: Option<usize>, got: usize },
    #[error("carved matrix has rank {rank} but {rows} rows")]
    RankDeficient { rank: usize, rows: usize },
    #[error("checkpoint is inconsistent: {0}")]
    Checkpoint(&'static str),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
}

/// Zero-overlap threshold `μ0 + 2σ` with `σ = 0.5 μ0`, i.e. `2 μ0`.
pub fn zero_threshold(mu0: f64) -> Result<f64, CarveError> {
    threshold_with(mu0, THRESHOLD_SIGMA_RATIO)
}

/// `μ0 + 2σ` with `σ = sigma_ratio · μ0`.
pub fn threshold_with(mu0: f64, sigma_ratio: f64) -> Result<f64, CarveError> {
    if !(mu0.is_finite() && mu0 > 0.0) {
        return Err(CarveError::Calibration(mu0));
    }
    Ok(mu0 + 2.0 * (sigma_ratio * mu0))
}

/// Row carving: drops every retained pixel lit by the trigger column.
///
/// Returns the row-reduced matrix and the original ids of the removed pixels.
/// An all-dark trigger removes nothing.
pub fn row_carve(
    current: &PatternMatrix,
    trigger_column_id: usize,
) -> Result<(PatternMatrix, Vec<usize>), CarveError> {
    let col = current
        .column_index(trigger_column_id)
        .ok_or(CarveError::UnknownColumn(trigger_column_id))?;
    let (keep, removed): (Vec<usize>, Vec<usize>) =
        (0..current.rows()).partition(|&r| current.get(r, col) == 0);
    let removed = removed.iter().map(|&r| current.row_ids()[r]).collect();
    Ok((current.select_rows(&keep), removed))
}

/// Column carving: scans columns left to right and keeps a column iff it
/// strictly increases the exact rank of the kept set.
pub fn column_carve(row_reduced: &PatternMatrix) -> Result<PatternMatrix, CarveError> {
    let rows = row_reduced.rows();
    let mut tracker = RankTracker::new(rows);
    let mut keep = Vec::with_capacity(rows);
    for c in 0..row_reduced.cols() {
        if tracker.rank() == rows {
            break;
        }
        if tracker.insert(&row_reduced.column(c))? {
            keep.push(c);
        }
    }
    if tracker.rank() != rows {
        return Err(CarveError::RankDeficient { rank: tracker.rank(), rows });
    }
    Ok(row_reduced.select_columns(&keep))
}

/// Carving state of one stripe.
#[derive(Debug, Clone, PartialEq)]
pub struct CarveState {
    stripe_len: usize,
    current: PatternMatrix,
    dropped_masks: Vec<Vec<u8>>,
    carve_depth: u32,
    projected: BTreeSet<usize>,
    threshold: f64,
    empty: bool,
}

impl CarveState {
    /// Uncarved state over the full binarized Hadamard set of `stripe_len`
    /// pixels.
    pub fn new(stripe_len: usize, threshold: f64) -> Result<Self, CarveError> {
        let order = stripe_order(stripe_len)?;
        Ok(Self {
            stripe_len,
            current: binarize(&hadamard(order)?),
            dropped_masks: Vec::new(),
            carve_depth: 0,
            projected: BTreeSet::new(),
            threshold,
            empty: false,
        })
    }

    pub fn stripe_len(&self) -> usize {
        self.stripe_len
    }

    pub fn current(&self) -> &PatternMatrix {
        &self.current
    }

    /// Lit regions of the patterns that triggered carving, over the full stripe.
    pub fn dropped_masks(&self) -> &[Vec<u8>] {
        &self.dropped_masks
    }

    pub fn carve_depth(&self) -> u32 {
        self.carve_depth
    }

    pub fn projected(&self) -> &BTreeSet<usize> {
        &self.projected
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Set when the all-ones pattern fell below threshold: the stripe is dark.
    pub fn is_empty_stripe(&self) -> bool {
        self.empty
    }

    /// Smallest original column id of the carved matrix not yet projected.
    pub fn next_column(&self) -> Option<usize> {
        if self.empty {
            return None;
        }
        self.current
            .column_ids()
            .iter()
            .copied()
            .filter(|id| !self.projected.contains(id))
            .min()
    }

    pub fn is_complete(&self) -> bool {
        self.next_column().is_none()
    }

    /// Full-stripe pattern for a column of the carved matrix.
    pub fn projection(&self, column_id: usize) -> Option<Vec<u8>> {
        let col = self.current.column_index(column_id)?;
        Some(self.current.scatter_column(col, self.stripe_len))
    }

    /// One carving round triggered by a below-threshold column: row carve,
    /// record the dropped mask, then column carve.
    pub fn carve(&mut self, trigger_column_id: usize) -> Result<(), CarveError> {
        let (reduced, removed) = row_carve(&self.current, trigger_column_id)?;
        if removed.is_empty() {
            return Err(CarveError::DarkTrigger(trigger_column_id));
        }
        if reduced.rows() == 0 {
            return Err(CarveError::FullTrigger(trigger_column_id));
        }
        let carved = column_carve(&reduced)?;
        self.dropped_masks.push(self.mask_of(&removed));
        self.current = carved;
        self.carve_depth += 1;
        Ok(())
    }

    /// Declares the whole stripe dark; its retained pixels become one mask.
    pub fn mark_empty(&mut self) {
        let pixels: Vec<usize> = self.current.row_ids().to_vec();
        self.dropped_masks.push(self.mask_of(&pixels));
        self.empty = true;
    }

    /// Union of all dropped masks.
    pub fn zero_mask(&self) -> Vec<u8> {
        let mut mask = vec![0u8; self.stripe_len];
        for m in &self.dropped_masks {
            for (acc, &v) in mask.iter_mut().zip(m) {
                *acc |= v;
            }
        }
        mask
    }

    fn mask_of(&self, pixels: &[usize]) -> Vec<u8> {
        let mut mask = vec![0u8; self.stripe_len];
        for &p in pixels {
            mask[p] = 1;
        }
        mask
    }
}

fn stripe_order(stripe_len: usize) -> Result<u32, CarveError> {
    if !stripe_len.is_power_of_two() || stripe_len.trailing_zeros() > MAX_ORDER {
        return Err(CarveError::StripeLength(stripe_len));
    }
    Ok(stripe_len.trailing_zeros())
}

/// One bucket measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketEntry {
    pub column_id: usize,
    pub energy: f64,
    pub below_threshold: bool,
    /// The full-stripe pattern that was actually projected.
    pub pattern: Vec<u8>,
}

/// Bucket values in projection order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BucketRecord {
    pub entries: Vec<BucketEntry>,
}

impl BucketRecord {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.energy).collect()
    }

    pub fn get(&self, column_id: usize) -> Option<&BucketEntry> {
        self.entries.iter().rev().find(|e| e.column_id == column_id)
    }

    /// Energies for the given columns, in that order.
    pub fn values_for(&self, column_ids: &[usize]) -> Option<Vec<f64>> {
        column_ids.iter().map(|&id| self.get(id).map(|e| e.energy)).collect()
    }
}

/// Something that turns a projected pattern into a bucket energy.
pub trait Detector {
    type Error;

    /// `pattern` covers the whole stripe; pixels outside the carved set are 0.
    fn measure(&mut self, column_id: usize, pattern: &[u8]) -> Result<f64, Self::Error>;
}

impl<D: Detector + ?Sized> Detector for &mut D {
    type Error = D::Error;

    fn measure(&mut self, column_id: usize, pattern: &[u8]) -> Result<f64, Self::Error> {
        (**self).measure(column_id, pattern)
    }
}

/// What happened after a bucket was submitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Kept,
    Carved { depth: u32 },
    EmptyStripe,
}

/// The adaptive acquisition loop for one stripe, driven one bucket at a time
/// so that interactive detectors can pause and resume it.
#[derive(Debug, Clone, PartialEq)]
pub struct Acquisition {
    state: CarveState,
    record: BucketRecord,
}

impl Acquisition {
    pub fn new(stripe_len: usize, threshold: f64) -> Result<Self, CarveError> {
        Ok(Self { state: CarveState::new(stripe_len, threshold)?, record: BucketRecord::default() })
    }

    pub fn state(&self) -> &CarveState {
        &self.state
    }

    pub fn record(&self) -> &BucketRecord {
        &self.record
    }

    pub fn into_parts(self) -> (CarveState, BucketRecord) {
        (self.state, self.record)
    }

    pub fn is_complete(&self) -> bool {
        self.state.is_complete()
    }

    /// Column id and full-stripe pattern to project next.
    pub fn next_projection(&self) -> Option<(usize, Vec<u8>)> {
        let id = self.state.next_column()?;
        Some((id, self.state.projection(id)?))
    }

    /// Records the bucket for the pending column and carves if it is below
    /// threshold. Columns measured before a carve keep their values: the
    /// carved pixels are dark, so inner products are unchanged.
    pub fn submit(&mut self, column_id: usize, energy: f64) -> Result<Step, CarveError> {
        let expected = self.state.next_column();
        if expected != Some(column_id) {
            return Err(CarveError::OutOfOrder { expected, got: column_id });
        }
        let pattern = self.state.projection(column_id).ok_or(CarveError::UnknownColumn(column_id))?;
        let below = energy < self.state.threshold;
        let lit_everywhere = pattern.iter().filter(|&&v| v == 1).count() == self.state.current.rows();
        self.state.projected.insert(column_id);
        self.record.entries.push(BucketEntry { column_id, energy, below_threshold: below, pattern });
        if !below {
            return Ok(Step::Kept);
        }
        if lit_everywhere {
            self.state.mark_empty();
            return Ok(Step::EmptyStripe);
        }
        self.state.carve(column_id)?;
        Ok(Step::Carved { depth: self.state.carve_depth })
    }

    /// Projects until every surviving column has a bucket.
    pub fn run<D: Detector>(&mut self, detector: &mut D) -> Result<(), AcquireFailure<D::Error>> {
        while let Some((id, pattern)) = self.next_projection() {
            let energy = detector.measure(id, &pattern).map_err(AcquireFailure::Detector)?;
            self.submit(id, energy).map_err(AcquireFailure::Carve)?;
        }
        Ok(())
    }

    pub fn checkpoint(&self) -> AcquisitionCheckpoint {
        AcquisitionCheckpoint {
            stripe_len: self.state.stripe_len,
            threshold: self.state.threshold,
            column_ids: self.state.current.column_ids().to_vec(),
            row_ids: self.state.current.row_ids().to_vec(),
            dropped_masks: self.state.dropped_masks.clone(),
            carve_depth: self.state.carve_depth,
            projected: self.state.projected.iter().copied().collect(),
            empty: self.state.empty,
            record: self.record.clone(),
        }
    }

    pub fn restore(cp: AcquisitionCheckpoint) -> Result<Self, CarveError> {
        stripe_order(cp.stripe_len)?;
        if cp.row_ids.iter().any(|&r| r >= cp.stripe_len)
            || cp.column_ids.iter().any(|&c| c >= cp.stripe_len)
        {
            return Err(CarveError::Checkpoint("id outside the stripe"));
        }
        if cp.dropped_masks.iter().any(|m| m.len() != cp.stripe_len) {
            return Err(CarveError::Checkpoint("mask length differs from stripe"));
        }
        if cp.record.entries.len() != cp.projected.len() {
            return Err(CarveError::Checkpoint("record and projected set disagree"));
        }
        let current = PatternMatrix::from_hadamard_ids(cp.row_ids, cp.column_ids)?;
        Ok(Self {
            state: CarveState {
                stripe_len: cp.stripe_len,
                current,
                dropped_masks: cp.dropped_masks,
                carve_depth: cp.carve_depth,
                projected: cp.projected.into_iter().collect(),
                threshold: cp.threshold,
                empty: cp.empty,
            },
            record: cp.record,
        })
    }
}

/// Serializable snapshot of an [`Acquisition`]; the carved matrix is rebuilt
/// from its ids on restore.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionCheckpoint {
    pub stripe_len: usize,
    pub threshold: f64,
    pub column_ids: Vec<usize>,
    pub row_ids: Vec<usize>,
    pub dropped_masks: Vec<Vec<u8>>,
    pub carve_depth: u32,
    pub projected: Vec<usize>,
    pub empty: bool,
    pub record: BucketRecord,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AcquireFailure<E> {
    #[error("detector failed")]
    Detector(E),
    #[error(transparent)]
    Carve(CarveError),
}

/// Acquisition aborted; the partial record is preserved.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquireError<E> {
    pub failure: AcquireFailure<E>,
    pub state: CarveState,
    pub record: BucketRecord,
}

/// Runs the full adaptive loop for one stripe of `stripe_len` pixels.
pub fn adaptive_acquire<D: Detector>(
    detector: &mut D,
    stripe_len: usize,
    threshold: f64,
) -> Result<(CarveState, BucketRecord), AcquireError<D::Error>> {
    let mut acq = Acquisition::new(stripe_len, threshold).map_err(|e| AcquireError {
        failure: AcquireFailure::Carve(e),
        state: CarveState::new(1, threshold).expect("unit stripe"),
        record: BucketRecord::default(),
    })?;
    match acq.run(detector) {
        Ok(()) => Ok(acq.into_parts()),
        Err(failure) => {
            let (state, record) = acq.into_parts();
            Err(AcquireError { failure, state, record })
        }
    }
}
